"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Times pattern enumeration (backtracking) and heat-bath sweeps on the same
inputs under both backends and checks that the outputs agree.
"""

import argparse
import time

import numpy as np

from tmslab import SiteSet, backend
from tmslab.enumeration import enumerate_array
from tmslab.models import builtin
from tmslab.sampling import build_chain
from tmslab.thermo import collar_pattern


def enumerate_case():
    X = builtin("iceberg").space
    F = SiteSet.box((0, 0), (3, 3))
    return lambda: enumerate_array(X, F, margin=1)


def heat_bath_case(sweeps):
    m = builtin("three_spin_ising", beta=0.8)
    V = SiteSet.box((0, 0), (11, 11))
    collar = collar_pattern(m.space, V, "plus")

    def run():
        chain = build_chain(m.space, m.potential, V, collar)
        return chain.run(np.random.default_rng(0), sweeps, thin=10)

    return run


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sweeps", type=int, default=200, help="heat-bath sweeps for the Python run")
    args = ap.parse_args()
    if not backend.compiled_available():
        raise SystemExit("compiled kernels are not built; install without TMSLAB_PURE=1")
    cases = [("enumerate iceberg 4x4, margin 1", enumerate_case()),
             (f"heat bath three_spin 12x12, {args.sweeps} sweeps", heat_bath_case(args.sweeps))]
    print(f"{'kernel':45s} {'compiled s':>11s} {'python s':>10s} {'speed-up':>9s}  outputs")
    for label, fn in cases:
        res = {}
        for which in ("compiled", "python"):
            backend.use_backend(which)
            res[which] = best_of(fn, args.repeat)
        backend.use_backend("compiled")
        (tc, oc), (tp, op) = res["compiled"], res["python"]
        same = "equal" if np.array_equal(oc, op) else "DIFFER"
        print(f"{label:45s} {tc:11.4f} {tp:10.4f} {tp / tc:8.1f}x  {same}")


if __name__ == "__main__":
    main()
