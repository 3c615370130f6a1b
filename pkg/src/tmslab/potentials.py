"""Local potentials of radius 0 (site) or 1 (Markov)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .lattice import Site, unit_vector


@dataclass(frozen=True, eq=False)
class LocalPotential:
    """A potential G(x) = func(x restricted to ``footprint``).

    The window anchored at j reads the sites j + o for o in ``footprint``;
    ``footprint`` must lie in the sup-norm ball of ``radius``.
    """

    dimension: int
    radius: int
    footprint: tuple[Site, ...]
    func: Callable[[tuple], float]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.radius not in (0, 1):
            raise ValueError("only radius 0 or 1 potentials are supported")
        fp = tuple(tuple(int(c) for c in o) for o in self.footprint)
        if not fp or len(set(fp)) != len(fp):
            raise ValueError("footprint must be nonempty and repeat-free")
        for o in fp:
            if len(o) != self.dimension or max(abs(c) for c in o) > self.radius:
                raise ValueError(f"offset {o} outside B(0, {self.radius})")
        object.__setattr__(self, "footprint", fp)

    def __call__(self, symbols: Sequence) -> float:
        return float(self.func(tuple(symbols)))

    def table(self, alphabet: Sequence) -> np.ndarray:
        """Values on all index tuples; entry sum_k i_k * |S|**k holds G for symbols i."""
        n, f = len(alphabet), len(self.footprint)
        out = np.empty(n**f, dtype=np.float64)
        for combo in itertools.product(range(n), repeat=f):
            idx = sum(c * n**k for k, c in enumerate(combo))
            out[idx] = self(tuple(alphabet[c] for c in combo))
        return out

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def to_json(self) -> dict:
        return {"name": self.name, "radius": self.radius, "params": self.params}


def zero_potential(dimension: int) -> LocalPotential:
    return LocalPotential(dimension, 0, ((0,) * dimension,), lambda s: 0.0, "zero")


def site_potential(values: Mapping, dimension: int) -> LocalPotential:
    vals = {k: float(v) for k, v in values.items()}
    return LocalPotential(
        dimension, 0, ((0,) * dimension,), lambda s: vals[s[0]], "site",
        {"values": [[k, v] for k, v in vals.items()]},
    )


def three_spin(beta: float) -> LocalPotential:
    """beta * x_n * x_{n+e1} * x_{n+e2} on {-1, +1}^{Z^2}."""
    fp = ((0, 0), unit_vector(2, 0), unit_vector(2, 1))
    return LocalPotential(
        2, 1, fp, lambda s: beta * s[0] * s[1] * s[2], "three_spin", {"beta": float(beta)}
    )


def nearest_neighbor(dimension: int, coupling: Callable, params: dict | None = None) -> LocalPotential:
    """Sum over axes of coupling(x_n, x_{n+e_i})."""
    fp = ((0,) * dimension,) + tuple(unit_vector(dimension, a) for a in range(dimension))

    def f(s):
        return sum(coupling(s[0], s[1 + a]) for a in range(dimension))

    return LocalPotential(dimension, 1, fp, f, "nearest_neighbor", dict(params or {}))
