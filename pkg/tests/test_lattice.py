import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmslab import (
    EnumerationCapExceeded,
    Pattern,
    SiteSet,
    check_irreducibility,
    count_patterns,
    enumerate_patterns,
    frontier,
    is_locally_admissible,
    shift_pattern,
)
from tmslab import backend
from tmslab.enumeration import compile_problem, enumerate_array
from tmslab.models import builtin, checkerboard, full, golden_mean, iceberg


def test_frontier_square():
    interior, boundary = frontier(SiteSet.cube(2, 2))
    assert len(interior) == 9 and len(boundary) == 16
    assert interior.isdisjoint(boundary)


def test_frontier_single_site():
    interior, boundary = frontier(SiteSet.of([(0,)]))
    assert len(interior) == 0 and list(boundary) == [(0,)]


def test_frontier_l1_ball():
    F = SiteSet.l1_ball(2, 6)
    assert len(F) == 85
    interior, boundary = frontier(F)
    # brute-force the definition
    members = set(F)
    expect = {s for s in F if all((s[0] + a, s[1] + b) in members for a in (-1, 0, 1) for b in (-1, 0, 1))}
    assert set(interior) == expect
    assert len(interior) + len(boundary) == 85


def test_frontier_empty():
    with pytest.raises(ValueError, match="empty site set"):
        frontier(SiteSet(2, ()))


def test_local_admissibility_examples():
    X = iceberg(1)
    assert not is_locally_admissible(X, Pattern.from_dict({(0, 0): -1, (1, 0): 1}))
    assert is_locally_admissible(X, Pattern.from_dict({(0, 0): -1, (1, 0): 0}))
    G = golden_mean()
    assert is_locally_admissible(G, Pattern.word([0, 1, 0, 1]))
    assert not is_locally_admissible(G, Pattern.word([0, 1, 1]))
    with pytest.raises(ValueError):
        is_locally_admissible(G, Pattern.word([0, 2]))


def test_full_shift_anything_goes():
    X = full(3, 2)
    rng = np.random.default_rng(0)
    F = SiteSet.cube(2, 1)
    for _ in range(20):
        assert is_locally_admissible(X, Pattern(F, tuple(rng.integers(0, 3, len(F)).tolist())))


def test_enumeration_counts():
    assert count_patterns(full(2, 2), SiteSet.cube(2, 1)) == 2**9
    words = enumerate_patterns(golden_mean(), SiteSet.interval(0, 3))
    assert [p.values for p in words] == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 0, 1)]
    pairs = enumerate_patterns(iceberg(1), SiteSet.of([(0, 0), (1, 0)]))
    assert len(pairs) == 7
    assert {p.values for p in pairs} == set(itertools.product((-1, 0, 1), repeat=2)) - {(-1, 1), (1, -1)}


@pytest.mark.parametrize("n", range(1, 12))
def test_golden_mean_fibonacci(n):
    fib = [1, 2]
    while len(fib) <= n:
        fib.append(fib[-1] + fib[-2])
    F = SiteSet.interval(0, n)
    assert count_patterns(golden_mean(), F) == fib[n]
    assert count_patterns(golden_mean(), F, method="backtrack") == fib[n]


def test_transfer_matches_backtracking_2d():
    X = golden_mean(2)
    for shape in [(2, 2), (3, 4), (4, 4)]:
        F = SiteSet.box((0, 0), (shape[0] - 1, shape[1] - 1))
        assert count_patterns(X, F, method="transfer") == count_patterns(X, F, method="backtrack")
    assert count_patterns(X, SiteSet.box((0, 0), (1, 1))) == 7


def test_margin_and_fixed():
    X = iceberg(1)
    F = SiteSet.cube(2, 1)
    fixed = Pattern.from_dict({(0, 0): 1})
    rows = enumerate_patterns(X, F, fixed=fixed)
    assert rows and all(p[(0, 0)] == 1 for p in rows)
    assert all(not (p[(1, 0)] == -1) for p in rows)
    # iceberg satisfies the safe-symbol condition, so margin adds no restriction
    assert count_patterns(X, F, margin=1) == count_patterns(X, F)
    with pytest.raises(ValueError):
        enumerate_patterns(X, F, fixed=Pattern.from_dict({(5, 5): 0}))


def test_enumeration_cap():
    with pytest.raises(EnumerationCapExceeded) as exc:
        enumerate_patterns(full(2, 2), SiteSet.cube(2, 2), cap=1000)
    assert "enumeration cap exceeded" in str(exc.value)
    assert exc.value.partial_count >= 1000


def test_irreducibility_verdicts():
    v = check_irreducibility(full(2, 2), r=1, max_window=2)
    assert v.verified
    v = check_irreducibility(golden_mean(), r=2, max_window=6)
    assert v.verified and v.tested["max_window"] == 6
    v = check_irreducibility(checkerboard(), r=1)
    assert not v.verified and v.counterexample is not None
    v = check_irreducibility(checkerboard(), r=3)
    assert not v.verified
    with pytest.raises(ValueError):
        check_irreducibility(full(), r=0)


def test_irreducibility_golden_mean_fails_at_gap_one():
    # distance 1 means adjacent sites, and 1,1 is forbidden
    v = check_irreducibility(golden_mean(), r=1, max_window=1)
    assert not v.verified
    assert [p.values for p in v.counterexample] == [(1,), (1,)]


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(0, 2), min_size=1, max_size=6),
    st.tuples(st.integers(-4, 4), st.integers(-4, 4)),
    st.tuples(st.integers(-4, 4), st.integers(-4, 4)),
)
def test_shift_composition(vals, k, j):
    sites = [(i, i % 2) for i in range(len(vals))]
    p = Pattern(SiteSet.of(sites), tuple(vals))
    assert shift_pattern(p, (0, 0)) == p
    assert shift_pattern(shift_pattern(p, k), tuple(-c for c in k)) == p
    assert shift_pattern(shift_pattern(p, k), j) == shift_pattern(p, (k[0] + j[0], k[1] + j[1]))


def test_shift_reads_values_at_n_plus_k():
    p = Pattern.from_dict({(0,): "s"})
    q = shift_pattern(p, (1,))
    assert q.as_dict() == {(-1,): "s"}


@pytest.mark.skipif(not backend.compiled_available(), reason="compiled kernels not built")
@pytest.mark.parametrize("name", ["golden_mean", "iceberg", "beach", "three_spin_ising"])
def test_backends_enumerate_identically(name):
    X = builtin(name).space
    F = SiteSet.cube(X.dimension, 1)
    out = {}
    for which in ("compiled", "python"):
        backend.use_backend(which)
        try:
            out[which] = enumerate_array(X, F, margin=1)
        finally:
            backend.use_backend("compiled")
    assert np.array_equal(out["compiled"], out["python"])


@pytest.mark.skipif(not backend.compiled_available(), reason="compiled kernels not built")
def test_backends_heat_bath_identical_streams():
    from tmslab.sampling import build_chain
    from tmslab.thermo import collar_pattern

    m = builtin("three_spin_ising", beta=0.8)
    V = SiteSet.cube(2, 2)
    runs = {}
    for which in ("compiled", "python"):
        backend.use_backend(which)
        try:
            chain = build_chain(m.space, m.potential, V, collar_pattern(m.space, V, "plus"))
            runs[which] = chain.run(np.random.default_rng(3), 200, thin=2)
        finally:
            backend.use_backend("compiled")
    assert np.array_equal(runs["compiled"], runs["python"])


def test_compiled_problem_exists():
    X = golden_mean()
    prob = compile_problem(X, [(0,), (1,)], [], {(0,): 1})
    assert prob.exists()
    rows, count = prob.run()
    assert count == 1 and rows.tolist() == [[1, 0]]


def test_pure_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    code = "from tmslab import backend; print(backend.name())"
    env = {**os.environ, "TMSLAB_PURE": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
