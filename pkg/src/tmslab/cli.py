"""Command-line experiment runner: ``tmslab <subcommand> ...`` or ``tmslab run --config file.json``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__

STOCHASTIC = {"gibbs", "thermo-scan", "phase-probe", "spectrum", "check-mho"}


class UsageError(Exception):
    """Bad configuration; exit status 2."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)


class VerdictFailure(Exception):
    """A check returned a negative verdict; exit status 1 after writing output."""


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return x
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- model resolution --------------------------------------------------------------


def _model(args, beta: float | None = None):
    from .models import ModelError, load_model

    ref = args.model
    kw = {}
    if args.M is not None:
        kw["M"] = args.M
    if args.d is not None:
        kw["d"] = args.d
    for k in ("A0", "A1", "B", "n"):
        v = getattr(args, k, None)
        if v is not None:
            kw[k] = v
    b = args.beta if beta is None else beta
    try:
        if ref.endswith(".json") or os.path.exists(ref):
            return load_model(ref, beta=b)
        return load_model(ref, beta=b, **kw)
    except ModelError as exc:
        raise UsageError(str(exc)) from None
    except TypeError as exc:
        raise UsageError(f"model {ref!r}: {exc}") from None


def _model_name(args) -> str:
    """Built-in reference with its parameters, for worker processes."""
    if args.model == "iceberg":
        return f"iceberg({args.M or 1})"
    if args.model == "beach":
        return f"beach({args.A0 or 1},{args.A1 or 1},{args.B or 2})"
    return args.model


def _window(X, args):
    from .lattice import SiteSet

    if getattr(args, "l1", None) is not None:
        return SiteSet.l1_ball(X.dimension, args.l1)
    return SiteSet.cube(X.dimension, args.radius)


# --- subcommands -------------------------------------------------------------------------


def cmd_list_models(args):
    from .models import list_models

    return {"models": list_models()}


def cmd_enumerate(args):
    from .enumeration import count_patterns, enumerate_array

    X = _model(args).space
    F = _window(X, args)
    if args.count_only:
        return {"window": F.to_json(), "count": count_patterns(X, F, margin=args.margin, cap=args.cap)}
    rows = enumerate_array(X, F, margin=args.margin, cap=args.cap)
    pats = [list(X.decode(r)) for r in rows]
    return {"window": F.to_json(), "count": len(pats), "patterns": pats, "_rows": [["pattern"]] + [[" ".join(map(str, p))] for p in pats]}


def cmd_frontier(args):
    from .lattice import frontier

    X = _model(args).space
    F = _window(X, args)
    interior, boundary = frontier(F)
    return {"window": F.to_json(), "interior": interior.to_json(), "boundary": boundary.to_json()}


def cmd_check_irreducible(args):
    from .enumeration import check_irreducibility

    X = _model(args).space
    v = check_irreducibility(X, mode=args.mode, r=args.r, max_window=args.max_window, margin=args.margin)
    out = v.to_json()
    if not v.verified:
        raise VerdictFailure(out)
    return out


def cmd_check_maltese(args):
    from .aperiodicity import check_maltese

    v = check_maltese(_model(args).space)
    if not v.satisfied:
        raise VerdictFailure(v.to_json())
    return v.to_json()


def cmd_check_mho(args):
    from .aperiodicity import check_mho, estimate_H, mho_holds
    from .lattice import SiteSet
    from .relations import SiteFunction

    X = _model(args).space
    H = estimate_H(X, SiteFunction.sharp(X), windows=(1, 2), seed=args.seed)
    if args.l1 is not None:
        F = SiteSet.l1_ball(X.dimension, args.l1)
    else:
        F = SiteSet.cube(X.dimension, args.window)
    rep = check_mho(X, F, H.lattice, samples=args.samples, seed=args.seed)
    out = {"H_estimate": H.to_json(), "report": rep.to_json()}
    if not mho_holds(rep):
        raise VerdictFailure(out)
    return out


def _matrix(args):
    from .onedim import TransitionMatrix

    if getattr(args, "matrix", None):
        rows = [[int(x) for x in r.split(",")] for r in args.matrix.split(";")]
        return TransitionMatrix(np.array(rows))
    X = _model(args).space
    return TransitionMatrix.of(X)


def cmd_decomposition(args):
    from .onedim import NotIrreducible, periodic_decomposition

    T = _matrix(args)
    try:
        N, classes = periodic_decomposition(T)
    except NotIrreducible as exc:
        raise VerdictFailure({"error": str(exc), "classes": exc.classes}) from None
    return {"period": N, "classes": classes, "primitive": T.primitive}


def cmd_parry(args):
    from .onedim import parry_measure, uniform_specification_check

    mu = parry_measure(_matrix(args))
    out = {"lambda": mu.lam, "entropy": mu.entropy, "measure": mu.to_json()}
    if args.maxlen:
        out["max_deviation"] = uniform_specification_check(mu, args.maxlen)
    return out


def cmd_gibbs_markov(args):
    from .onedim import entropy_pressure, gibbs_markov

    phi = _floats(args.phi)
    mu = gibbs_markov(_matrix(args), phi)
    h, p = entropy_pressure(mu, phi)
    return {"lambda": mu.lam, "log_lambda": math.log(mu.lam), "entropy": h, "pressure": p, "measure": mu.to_json()}


def cmd_conformal_check_1d(args):
    from .onedim import conformality_check_1d, gibbs_markov

    phi = _floats(args.phi)
    mu = gibbs_markov(_matrix(args), phi)
    dev = conformality_check_1d(mu, args.maxlen)
    out = {"lambda": mu.lam, "entropy": mu.entropy, "max_deviation": dev, "tolerance": 1e-10}
    if dev > 1e-10:
        raise VerdictFailure(out)
    return out


def cmd_entropy_scan(args):
    from .thermo import box_entropy_scan

    X = _model(args).space
    scan = box_entropy_scan(X, args.nmax, margin=args.margin, cap=args.cap)
    out = scan.to_json()
    out["_rows"] = [["n", "log_count", "value"]] + [[r["n"], r["log_count"], r["value"]] for r in scan.rows]
    return out


def _volume(d: int, size: int):
    from .thermo import centered_box

    return centered_box(d, size)


def cmd_gibbs(args):
    from .models import observable_values
    from .thermo import batch_means, glauber_sample

    model = _model(args)
    X = model.space
    V = _volume(X.dimension, args.size)
    obs = observable_values(model)
    run = glauber_sample(X, model.potential, V, args.collar, seed=args.seed, sweeps=args.sweeps, thin=args.thin,
                         burn_in=args.burn_in, observable=obs, allow_unsafe=True)
    m, se = batch_means(run.observable(obs))
    return {"run": run.to_json(), "origin_mean": m, "origin_stderr": se,
            "replay": {"model": args.model, "beta": args.beta, "size": args.size, "collar": args.collar,
                       "seed": args.seed, "sweeps": args.sweeps, "thin": args.thin, "burn_in": run.burn_in}}


def cmd_thermo_scan(args):
    from .lattice import Pattern
    from .thermo import centered_box, thermo_limit_scan

    model = _model(args)
    X = model.space
    vols = [centered_box(X.dimension, s) for s in _ints(args.sizes)]
    origin = (0,) * X.dimension
    symbols = [args.target] if args.target is not None else [X.alphabet[-1]]
    targets = []
    for sym in symbols:
        match = [s for s in X.alphabet if str(s) == str(sym)]
        if not match:
            raise UsageError(f"symbol {sym!r} not in the alphabet", "--target")
        targets.append(Pattern.from_dict({origin: match[0]}, X.dimension))
    res = thermo_limit_scan(X, model.potential, vols, rules=args.rules.split(","), targets=targets,
                            seed=args.seed, sweeps=args.sweeps, tol=args.tol)
    return res


def cmd_phase_probe(args):
    from .thermo import phase_probe

    rows = phase_probe(_model_name(args), _floats(args.betas), _ints(args.sizes), _ints(args.seeds) or [args.seed],
                       sweeps=args.sweeps, burn_in=args.burn_in, jobs=args.jobs)
    out = {"rows": rows}
    keys = ["beta", "size", "plus", "minus", "gap", "stderr", "z"]
    out["_rows"] = [keys] + [[r[k] for k in keys] for r in rows]
    return out


def cmd_free_product(args):
    from .enumeration import count_patterns
    from .lattice import SiteSet
    from .spectral import free_product

    X = _model(args).space
    fp = free_product(X)
    Z = fp.space
    box = SiteSet.cube(Z.dimension, 1)
    layer = SiteSet.cube(X.dimension, 1)
    n_layer = count_patterns(X, layer)
    n_box = count_patterns(Z, box)
    return {"base": X.to_json(), "product": Z.to_json(), "check_window": box.to_json(),
            "layer_count": n_layer, "product_count": n_box, "layerwise": n_box == n_layer ** 3}


def _axis(text: str, dim: int) -> str:
    if text in ("vertical", "horizontal"):
        return text
    vec = _ints(text)
    if len(vec) != dim or sum(abs(v) for v in vec) != 1:
        raise UsageError("axis must be a unit vector in the product lattice", "--axis")
    return "vertical" if vec[-1] != 0 else "horizontal"


def cmd_spectrum(args):
    from .spectral import (
        base_layer_measures, classify_empirical, correlation_series, driver_observable,
        field_axis_sampler, free_product, mixture_limit, parse_driver, periodogram_peaks, tail_mean,
    )

    nu = parse_driver(args.driver)
    if args.base == "driver":
        sampler = driver_observable(nu)
        obs = {"kind": "driver"}
        limit = None
    else:
        args.model = args.base
        X = _model(args).space
        if X.dimension != 1:
            raise UsageError("spectrum samples layers exactly for one-dimensional bases", "--base")
        fp = free_product(X)
        layers = base_layer_measures(X, args.h)
        f = np.zeros(X.size)
        f[-1] = 1.0
        axis = _axis(args.axis, fp.dimension)
        sampler = field_axis_sampler(fp, layers, nu, axis, f)
        obs = {"kind": "indicator", "symbol": X.alphabet[-1], "axis": axis, "h": args.h}
        limit = mixture_limit(layers, nu, f) if axis == "horizontal" else None
    series = correlation_series(sampler, args.lags, args.replicas, args.seed, length=args.length,
                                positions=args.positions, observable=obs)
    cls = classify_empirical(series, nu)
    out = {"driver": nu.describe(), "classification": cls.to_json(), "series": series.to_json()}
    if limit is not None:
        m, se = tail_mean(series)
        out["mixture_limit"] = {"predicted": limit, "tail_mean": m, "stderr": se}
    rows = [["lag", "C", "stderr"]] + [list(r) for r in series.to_rows()]
    if args.periodogram:
        pg = periodogram_peaks(series)
        out["periodogram"] = pg.to_json()
        rows += [[], ["frequency", "power"]] + [list(r) for r in pg.to_rows()]
    out["_rows"] = rows
    return out


COMMANDS = {
    "list-models": cmd_list_models,
    "enumerate": cmd_enumerate,
    "frontier": cmd_frontier,
    "check-irreducible": cmd_check_irreducible,
    "check-mho": cmd_check_mho,
    "check-maltese": cmd_check_maltese,
    "parry": cmd_parry,
    "gibbs-markov": cmd_gibbs_markov,
    "conformal-check-1d": cmd_conformal_check_1d,
    "decomposition": cmd_decomposition,
    "entropy-scan": cmd_entropy_scan,
    "gibbs": cmd_gibbs,
    "thermo-scan": cmd_thermo_scan,
    "phase-probe": cmd_phase_probe,
    "spectrum": cmd_spectrum,
    "free-product": cmd_free_product,
}


# --- parser ---------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p, model_default: str | None = "golden_mean"):
    p.add_argument("--model", default=model_default, help="built-in name (see list-models) or JSON model file")
    p.add_argument("--M", type=int)
    p.add_argument("--A0", type=int)
    p.add_argument("--A1", type=int)
    p.add_argument("--B", type=int)
    p.add_argument("--n", type=int, help="alphabet size of the full shift")
    p.add_argument("--d", type=int, help="dimension")
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tmslab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("list-models")
    _common(p)

    for name in ("enumerate", "frontier"):
        p = sub.add_parser(name)
        _common(p)
        p.add_argument("--radius", type=int, default=1)
        p.add_argument("--l1", type=int)
        if name == "enumerate":
            p.add_argument("--margin", type=int, default=0)
            p.add_argument("--cap", type=int, default=10**6)
            p.add_argument("--count-only", action="store_true")

    p = sub.add_parser("check-irreducible")
    _common(p)
    p.add_argument("--mode", choices=["strongly_irreducible", "transitive"], default="strongly_irreducible")
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--max-window", type=int, default=2)
    p.add_argument("--margin", type=int, default=1)

    p = sub.add_parser("check-maltese")
    _common(p)

    p = sub.add_parser("check-mho")
    _common(p, "iceberg")
    p.add_argument("--window", type=int, default=2, help="box [-w, w]^d")
    p.add_argument("--l1", type=int, help="use the L1 ball of this radius instead")
    p.add_argument("--samples", type=int, default=500)

    for name in ("parry", "gibbs-markov", "conformal-check-1d", "decomposition"):
        p = sub.add_parser(name)
        _common(p)
        p.add_argument("--matrix", help="rows separated by ';', e.g. '1,1;1,0'")
        if name in ("gibbs-markov", "conformal-check-1d"):
            p.add_argument("--phi", default="0,0.7")
        if name == "conformal-check-1d":
            p.add_argument("--maxlen", type=int, default=8)
        if name == "parry":
            p.add_argument("--maxlen", type=int, default=0, help="also run the uniform-specification check")

    p = sub.add_parser("entropy-scan")
    _common(p)
    p.add_argument("--nmax", type=int, default=6)
    p.add_argument("--margin", type=int, default=0)
    p.add_argument("--cap", type=int, default=10**7)

    p = sub.add_parser("gibbs")
    _common(p, "three_spin_ising")
    p.add_argument("--size", type=int, default=12)
    p.add_argument("--collar", default="plus")
    p.add_argument("--sweeps", type=int, default=20000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--burn-in", type=int)

    p = sub.add_parser("thermo-scan")
    _common(p)
    p.add_argument("--sizes", default="5,7,9,11,13")
    p.add_argument("--rules", default="zero")
    p.add_argument("--target", help="symbol at the origin (default: last symbol)")
    p.add_argument("--sweeps", type=int, default=20000)
    p.add_argument("--tol", type=float, default=1e-3)

    p = sub.add_parser("phase-probe")
    _common(p, "three_spin_ising")
    p.add_argument("--betas", default="0,1.2")
    p.add_argument("--sizes", default="12")
    p.add_argument("--seeds", default="", help="comma-separated chain seeds (default: --seed)")
    p.add_argument("--sweeps", type=int, default=20000)
    p.add_argument("--burn-in", type=int, default=2000)

    p = sub.add_parser("spectrum")
    _common(p)
    p.add_argument("--base", default="golden_mean", help="1D base model, or 'driver' for the driver sequence itself")
    p.add_argument("--driver", default="bernoulli:0.5")
    p.add_argument("--axis", default="vertical", help="vertical, horizontal or a unit vector such as 0,1")
    p.add_argument("--lags", type=int, default=256)
    p.add_argument("--replicas", type=int, default=64)
    p.add_argument("--length", type=int)
    p.add_argument("--positions", type=int)
    p.add_argument("--h", type=float, default=1.5, help="strength of the layer potentials")
    p.add_argument("--periodogram", action="store_true")

    p = sub.add_parser("free-product")
    _common(p)

    p = sub.add_parser("run")
    p.add_argument("--config", required=True)
    return parser


# --- config files ------------------------------------------------------------------------


def config_schema() -> dict:
    return json.loads(resources.files("tmslab").joinpath("schemas/config.schema.json").read_text())


def config_to_argv(cfg: dict) -> list[str]:
    try:
        jsonschema.validate(cfg, config_schema())
    except jsonschema.ValidationError as exc:
        path = "$" + "".join(f"[{p!r}]" if isinstance(p, str) else f"[{p}]" for p in exc.absolute_path)
        raise UsageError(exc.message, path) from None
    argv = [cfg["command"]]
    if "model" in cfg:
        argv += ["--model", str(cfg["model"])]
    for key in ("seed", "out", "format", "jobs"):
        if key in cfg:
            argv += [f"--{key}", str(cfg[key])]
    for k, v in cfg.get("params", {}).items():
        flag = "--" + k.replace("_", "-")
        if isinstance(v, bool):
            if v:
                argv.append(flag)
        elif isinstance(v, list):
            argv += [flag, ",".join(map(str, v))]
        else:
            argv += [flag, str(v)]
    return argv


ECHO_SKIP = ("command", "model", "seed", "out", "format", "jobs")


def echo_config(args) -> dict:
    """The run in config-file form; ``run --config`` on it reproduces the result.

    Output location, format and worker count do not change results and are left out.
    """
    cfg = {"command": args.command}
    if getattr(args, "model", None) is not None:
        cfg["model"] = args.model
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    cfg["params"] = {k: v for k, v in sorted(vars(args).items()) if k not in ECHO_SKIP and v is not None}
    return cfg


def _render(command: str, config: dict, result: dict, fmt: str) -> str:
    rows = result.pop("_rows", None)
    if fmt == "csv":
        buf = io.StringIO()
        buf.write("# " + json.dumps({"command": command, "config": config}, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        if rows is None:
            rows = [["key", "value"]] + [[k, json.dumps(_jsonable(v), sort_keys=True)] for k, v in result.items()]
        for r in rows:
            w.writerow(r)
        return buf.getvalue()
    doc = {"command": command, "config": config, "result": result}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def execute(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        try:
            cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise UsageError(f"config file {args.config} not found") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid JSON: {exc}", "$") from None
        return execute(config_to_argv(cfg))
    if args.command in STOCHASTIC and args.seed is None:
        raise UsageError(f"--seed is required for {args.command}")
    config = echo_config(args)
    status = 0
    try:
        result = COMMANDS[args.command](args)
    except VerdictFailure as vf:
        result = vf.args[0]
        status = 1
    text = _render(args.command, config, result, args.format)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return status


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return execute(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
