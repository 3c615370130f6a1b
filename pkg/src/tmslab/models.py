"""Built-in shift spaces and the JSON model-file format."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .lattice import AxisPairs, NeighborhoodTable, ShiftSpace, axis_pairs_space
from .potentials import LocalPotential, site_potential, three_spin, zero_potential


class ModelError(ValueError):
    """A model reference or model file that cannot be used."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class Model:
    space: ShiftSpace
    potential: LocalPotential
    anchor: str = ""
    observable: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.space.name


def full(n: int = 2, d: int = 1) -> ShiftSpace:
    return axis_pairs_space(d, range(n), [np.ones((n, n), bool)] * d, "full", {"n": n, "d": d})


def golden_mean(d: int = 1) -> ShiftSpace:
    A = np.array([[1, 1], [1, 0]], bool)
    return axis_pairs_space(d, (0, 1), [A] * d, "golden_mean", {"d": d})


def checkerboard(d: int = 2) -> ShiftSpace:
    A = np.array([[0, 1], [1, 0]], bool)
    return axis_pairs_space(d, (0, 1), [A] * d, "checkerboard", {"d": d})


def iceberg(M: int = 1, d: int = 2) -> ShiftSpace:
    """Symbols -M..M; neighbours along every axis satisfy x_n * x_{n+e_i} >= 0."""
    S = list(range(-M, M + 1))
    A = np.array([[s * t >= 0 for t in S] for s in S], bool)
    return axis_pairs_space(d, S, [A] * d, "iceberg", {"M": M, "d": d})


def beach_symbol(a: int, b: int) -> str:
    return f"a{a}b{b}"


def beach(A0: int = 1, A1: int = 1, B: int = 2, d: int = 2) -> ShiftSpace:
    """Symbols (alpha, beta) in (A0 + A1) x B, named ``a{alpha}b{beta}``.

    alpha < A0 marks the first class. Neighbours must both lie in the first
    class or share beta.
    """
    if A0 < 1:
        raise ModelError("beach model needs A0 >= 1")
    syms = [(a, b) for a in range(A0 + A1) for b in range(B)]
    A = np.array([[(s[0] < A0 and t[0] < A0) or s[1] == t[1] for t in syms] for s in syms], bool)
    names = [beach_symbol(a, b) for a, b in syms]
    return axis_pairs_space(d, names, [A] * d, "beach", {"A0": A0, "A1": A1, "B": B, "d": d})


def beach_parts(symbol: str) -> tuple[int, int]:
    m = re.fullmatch(r"a(\d+)b(\d+)", symbol)
    if not m:
        raise ValueError(f"not a beach symbol: {symbol!r}")
    return int(m.group(1)), int(m.group(2))


def ising_space() -> ShiftSpace:
    return axis_pairs_space(2, (-1, 1), [np.ones((2, 2), bool)] * 2, "three_spin_ising", {})


CATALOG = {
    "full": "full shift on n symbols; no constraints",
    "golden_mean": "forbidden word 11",
    "checkerboard": "adjacent symbols differ; not strongly irreducible",
    "iceberg": "Z^2 Iceberg model: x_{n+e_i} x_n >= 0, safe symbol 0",
    "beach": "generalized Z^d Beach model: S = (A0 + A1) x B",
    "three_spin_ising": "three-spin Ising model: Markov potential beta x_n x_{n+e1} x_{n+e2} on {-1,1}^{Z^2}",
}


def list_models() -> dict[str, str]:
    return dict(CATALOG)


_CALL = re.compile(r"^(\w+)(?:\((.*)\))?$")


def _parse_args(text: str | None) -> list:
    if not text:
        return []
    return [float(x) if "." in x else int(x) for x in (t.strip() for t in text.split(",")) if x]


def builtin(name: str, beta: float = 0.0, **kw) -> Model:
    """Resolve ``name`` such as ``iceberg``, ``iceberg(2)`` or ``beach(1,1,2)``."""
    m = _CALL.match(name.strip())
    if not m or m.group(1) not in CATALOG:
        raise ModelError(f"unknown model {name!r}; known: {sorted(CATALOG)}")
    base, args = m.group(1), _parse_args(m.group(2))
    kw = {k: v for k, v in kw.items() if v is not None}
    if base == "full":
        X = full(*args, **kw)
        G = zero_potential(X.dimension)
        obs = {"kind": "symbol_index"}
    elif base == "golden_mean":
        X = golden_mean(*args, **kw)
        G = site_potential({0: 0.0, 1: beta}, X.dimension)
        obs = {"kind": "symbol_index"}
    elif base == "checkerboard":
        X = checkerboard(*args, **kw)
        G = zero_potential(X.dimension)
        obs = {"kind": "symbol_index"}
    elif base == "iceberg":
        X = iceberg(*args, **kw)
        G = site_potential({s: (beta if s != 0 else 0.0) for s in X.alphabet}, X.dimension)
        obs = {"kind": "sign"}
    elif base == "beach":
        X = beach(*args, **kw)
        A0 = X.params["A0"]
        G = site_potential({s: (beta if beach_parts(s)[0] >= A0 else 0.0) for s in X.alphabet}, X.dimension)
        obs = {"kind": "beach_label"}
    else:
        X = ising_space()
        G = three_spin(beta)
        obs = {"kind": "value"}
    return Model(X, G, CATALOG[base], obs)


def observable_values(model_or_space, observable: dict | None = None) -> np.ndarray:
    """Real value attached to each symbol index for the model's origin observable."""
    X = model_or_space.space if isinstance(model_or_space, Model) else model_or_space
    obs = observable or (model_or_space.observable if isinstance(model_or_space, Model) else {})
    kind = obs.get("kind", "symbol_index")
    if kind == "value":
        return np.array([float(s) for s in X.alphabet])
    if kind == "sign":
        return np.sign(np.array([float(s) for s in X.alphabet]))
    if kind == "beach_label":
        # +1 on beta label 0, -1 on the others
        return np.array([1.0 if beach_parts(s)[1] == 0 else -1.0 for s in X.alphabet])
    return np.arange(X.size, dtype=float)


# --- JSON model files -------------------------------------------------------


def model_schema() -> dict:
    text = resources.files("tmslab").joinpath("schemas/model.schema.json").read_text()
    return json.loads(text)


def space_from_json(obj) -> ShiftSpace:
    """Validate a model document and build its shift space.

    Raises ModelError carrying the JSON path of the first violation.
    """
    try:
        jsonschema.validate(obj, model_schema())
    except jsonschema.ValidationError as exc:
        path = "$" + "".join(f"[{p!r}]" if isinstance(p, str) else f"[{p}]" for p in exc.absolute_path)
        raise ModelError(exc.message, path) from None
    d = obj["dimension"]
    alphabet = [tuple(s) if isinstance(s, list) else s for s in obj["alphabet"]]
    con = obj["constraint"]
    n = len(alphabet)
    try:
        if con["type"] == "axis_pairs":
            mats = con["allowed"]
            if len(mats) not in (1, d):
                raise ModelError(f"expected 1 or {d} matrices", "$['constraint']['allowed']")
            for i, m in enumerate(mats):
                a = np.asarray(m)
                if a.shape != (n, n):
                    raise ModelError(f"matrix shape {a.shape} != ({n}, {n})", f"$['constraint']['allowed'][{i}]")
            return axis_pairs_space(d, alphabet, mats, obj.get("name", "custom"))
        return ShiftSpace(d, tuple(alphabet), NeighborhoodTable(frozenset(map(tuple, con["entries"]))), obj.get("name", "custom"))
    except ModelError:
        raise
    except ValueError as exc:
        raise ModelError(str(exc), "$['constraint']") from None


def load_model(ref: str, beta: float = 0.0, **kw) -> Model:
    """A built-in name or a path to a JSON model file."""
    p = Path(ref)
    if ref.endswith(".json") or p.exists():
        try:
            obj = json.loads(p.read_text())
        except FileNotFoundError:
            raise ModelError(f"model file {ref} not found") from None
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON: {exc}", "$") from None
        X = space_from_json(obj)
        return Model(X, zero_potential(X.dimension), f"file {ref}", {"kind": "symbol_index"})
    return builtin(ref, beta=beta, **kw)


def is_axis_pairs(X: ShiftSpace) -> bool:
    return isinstance(X.constraint, AxisPairs)
