import itertools
import math

import numpy as np
import pytest

from tmslab import Pattern, SiteSet, count_patterns, is_locally_admissible
from tmslab.models import builtin, full, golden_mean, iceberg, observable_values
from tmslab.onedim import parry_measure
from tmslab.potentials import site_potential, three_spin, zero_potential
from tmslab.sampling import FrozenSiteError
from tmslab.thermo import (
    ExactTableTooLarge,
    batch_means,
    box_entropy_scan,
    centered_box,
    collar_pattern,
    conformality_check_fv,
    empirical_pressure,
    finite_volume_measure,
    glauber_sample,
    phase_probe,
    thermo_limit_scan,
    window_tv,
)


def brute_force_table(X, G, V, collar):
    """Independent oracle: loop over all words, check admissibility, sum windows by hand."""
    cd = collar.as_dict() if collar is not None else {}
    region = set(V.sites) | set(cd)
    out = {}
    for vals in itertools.product(X.alphabet, repeat=len(V)):
        conf = dict(zip(V.sites, vals))
        conf.update(cd)
        if not is_locally_admissible(X, Pattern.from_dict(conf)):
            continue
        e = 0.0
        anchors = {tuple(a - b for a, b in zip(s, o)) for s in region for o in G.footprint}
        for j in anchors:
            w = [tuple(a + b for a, b in zip(j, o)) for o in G.footprint]
            if all(t in region for t in w):
                e += G([conf[t] for t in w])
        out[vals] = math.exp(e)
    Z = sum(out.values())
    return {k: v / Z for k, v in out.items()}


def table_of(mu):
    return {mu.X.decode(r): p for r, p in zip(mu.rows, mu.probs)}


def test_zero_potential_is_uniform():
    mu = finite_volume_measure(golden_mean(2), None, SiteSet.cube(2, 1), "zero")
    assert np.allclose(mu.probs, 1.0 / len(mu.rows), atol=1e-15)


def test_full_shift_product_form():
    w = {0: 0.2, 1: -0.7, 2: 1.0}
    X = full(3, 2)
    mu = finite_volume_measure(X, site_potential(w, 2), SiteSet.box((0, 0), (1, 2)), None)
    Z = sum(math.exp(v) for v in w.values())
    for vals, p in table_of(mu).items():
        assert p == pytest.approx(math.prod(math.exp(w[s]) / Z for s in vals), rel=1e-12)


@pytest.mark.parametrize("rule", ["zero", "plus", "minus"])
def test_iceberg_matches_brute_force(rule):
    m = builtin("iceberg", beta=0.6)
    V = SiteSet.cube(2, 1)
    mu = finite_volume_measure(m.space, m.potential, V, rule)
    assert abs(mu.probs.sum() - 1) < 1e-12
    oracle = brute_force_table(m.space, m.potential, V, collar_pattern(m.space, V, rule))
    got = table_of(mu)
    assert set(got) == set(oracle)
    assert max(abs(got[k] - oracle[k]) for k in oracle) < 1e-13


def test_three_spin_matches_brute_force():
    X = builtin("three_spin_ising").space
    G = three_spin(0.5)
    V = SiteSet.box((0, 0), (2, 2))
    mu = finite_volume_measure(X, G, V, "plus")
    oracle = brute_force_table(X, G, V, collar_pattern(X, V, "plus"))
    got = table_of(mu)
    assert max(abs(got[k] - oracle[k]) for k in oracle) < 1e-13


def test_exact_cap_points_to_sampler():
    with pytest.raises(ExactTableTooLarge, match="glauber_sample"):
        finite_volume_measure(full(2, 2), None, SiteSet.cube(2, 3), None, cap=1000)


def test_inconsistent_collar():
    X = builtin("checkerboard").space
    V = SiteSet.of([(0, 0)])
    ring = V.dilate(1).difference(V)
    vals = tuple(1 if s == (1, 0) else 0 for s in ring.sites)
    with pytest.raises(FrozenSiteError):
        finite_volume_measure(X, None, V, Pattern(ring, vals))


@pytest.mark.parametrize(
    "name,beta,shape,rule",
    [
        ("full", 0.0, (3, 3), None),
        ("golden_mean", 0.7, (4, 4), "zero"),
        ("iceberg", 0.8, (3, 3), "zero"),
        ("three_spin_ising", 0.5, (4, 4), "plus"),
    ],
)
def test_conformality_exact(name, beta, shape, rule):
    m = builtin(name, beta=beta)
    X = m.space if name != "full" else full(2, 2)
    G = m.potential if name != "full" else site_potential({0: 0.0, 1: 0.4}, 2)
    V = SiteSet.box((0, 0), (shape[0] - 1, shape[1] - 1))
    rep = conformality_check_fv(finite_volume_measure(X, G, V, rule))
    assert rep.swaps > 0
    assert rep.max_deviation <= 1e-12


def test_conformality_detects_wrong_potential():
    m = builtin("three_spin_ising", beta=0.5)
    V = SiteSet.box((0, 0), (3, 3))
    mu = finite_volume_measure(m.space, m.potential, V, "plus")
    mu.G = three_spin(0.4)  # check against the wrong cocycle
    assert conformality_check_fv(mu).max_deviation > 1e-3


def test_glauber_determinism_and_diagnostics():
    m = builtin("iceberg", beta=0.5)
    V = SiteSet.cube(2, 1)
    a = glauber_sample(m.space, m.potential, V, "zero", seed=4, sweeps=500)
    b = glauber_sample(m.space, m.potential, V, "zero", seed=4, sweeps=500)
    c = glauber_sample(m.space, m.potential, V, "zero", seed=5, sweeps=500)
    assert np.array_equal(a.records, b.records)
    assert not np.array_equal(a.records, c.records)
    assert 0 < a.diagnostics["acceptance"] <= 1
    assert a.diagnostics["autocorrelation_time"] >= 1


def test_glauber_uniform_full_shift():
    X = full(3, 2)
    V = SiteSet.cube(2, 1)
    run = glauber_sample(X, None, V, None, seed=1, sweeps=6000, thin=2)
    freq = np.bincount(run.records.ravel(), minlength=3) / run.records.size
    # single-site heat bath on a product target gives independent sweeps
    sigma = math.sqrt((1 / 3) * (2 / 3) / run.records.size)
    assert np.all(np.abs(freq - 1 / 3) < 3 * sigma * 1.5)


def test_glauber_close_to_exact_small():
    m = builtin("iceberg", beta=0.8)
    V = SiteSet.cube(2, 1)
    mu = finite_volume_measure(m.space, m.potential, V, "zero")
    run = glauber_sample(m.space, m.potential, V, "zero", seed=2, sweeps=20000)
    assert window_tv(mu, run.records) < 0.03


def test_glauber_refuses_unsafe_model():
    from tmslab.models import checkerboard

    X = checkerboard()
    with pytest.raises(ValueError, match="allow_unsafe"):
        glauber_sample(X, None, SiteSet.cube(2, 1), None, seed=0, sweeps=10)
    run = glauber_sample(X, None, SiteSet.cube(2, 1), None, seed=0, sweeps=10, allow_unsafe=True)
    assert run.diagnostics["warning"]


def test_entropy_scan_examples():
    scan = box_entropy_scan(full(3), 5)
    assert np.allclose(scan.values, math.log(3), atol=1e-15)
    g = box_entropy_scan(golden_mean(), 12)
    assert abs(g.values[-1] - parry_measure(np.array([[1, 1], [1, 0]])).entropy) < 0.05
    c = box_entropy_scan(builtin("checkerboard").space, 4, margin=2)
    assert c.values == sorted(c.values, reverse=True) and c.values[-1] < 0.01
    t = box_entropy_scan(full(2, 2), 5, margin=1, cap=10**4)
    assert t.truncated and len(t.rows) < 5


@pytest.mark.parametrize("name", ["full", "golden_mean", "checkerboard", "iceberg", "beach", "three_spin_ising"])
def test_subadditivity_of_box_counts(name):
    # a box of side 2m splits into 2^d boxes of side m; restriction is injective
    X = builtin(name).space
    d = X.dimension
    top = 6 if d == 1 else 3
    for m in range(1, top + 1):
        small = count_patterns(X, SiteSet.box((0,) * d, (m - 1,) * d))
        big = count_patterns(X, SiteSet.box((0,) * d, (2 * m - 1,) * d))
        assert math.log(big) <= 2**d * math.log(small) + 1e-12


def test_empirical_pressure_bernoulli():
    x = np.random.default_rng(0).integers(0, 2, 200000)
    est = empirical_pressure([x], b=2)
    assert 0.95 * math.log(2) <= est.h <= math.log(2) + 1e-12
    assert not est.undersampled
    assert est.pressure == est.h


def test_empirical_pressure_parry():
    mu = parry_measure(np.array([[1, 1], [1, 0]]))
    x = mu.sample(300000, np.random.default_rng(1))
    est = empirical_pressure([x], b=3)
    assert abs(est.h - mu.entropy) < 0.03
    assert est.stderr > 0


def test_empirical_pressure_flags_undersampling():
    x = np.random.default_rng(2).integers(0, 4, 60)
    assert empirical_pressure([x], b=4, batches=2).undersampled


def test_empirical_pressure_site_potential():
    x = np.random.default_rng(3).integers(0, 2, 100000)
    G = site_potential({0: 0.0, 1: 1.0}, 1)
    est = empirical_pressure([x], G, (0, 1), b=2)
    assert est.pressure - est.h == pytest.approx(x.mean(), abs=1e-3)


def test_limit_scan_full_shift_exact():
    X = full(2, 1)
    G = site_potential({0: 0.0, 1: 0.3}, 1)
    vols = [centered_box(1, n) for n in (3, 4, 5)]
    out = thermo_limit_scan(X, G, vols, rules=("zero",), targets=[Pattern.word([1])])
    row = out["rules"][0]
    assert all(d < 1e-15 for d in row["diffs"]) and row["stabilized"]


def test_limit_scan_golden_mean_converges():
    # centred boxes grow on one side at a time, so differences shrink two steps at a time
    vols = [centered_box(1, n) for n in range(4, 17)]
    out = thermo_limit_scan(golden_mean(), None, vols, rules=("zero", "plus"), targets=[Pattern.word([1])])
    for row in out["rules"]:
        d = row["diffs"]
        assert d[-1] < 1e-3
        assert all(b < a for a, b in zip(d, d[2:]))
    zero = out["rules"][0]["probs"][-1][0]
    assert zero == pytest.approx(parry_measure(np.array([[1, 1], [1, 0]])).p[1], abs=1e-3)
    assert not out["boundary_dependent"]


def test_limit_scan_rejects_non_increasing():
    with pytest.raises(ValueError):
        thermo_limit_scan(golden_mean(), None, [centered_box(1, 5), centered_box(1, 4)])


def test_batch_means_of_iid():
    y = np.random.default_rng(0).normal(size=20000)
    m, se = batch_means(y)
    assert abs(m) < 4 * se and se == pytest.approx(1 / math.sqrt(20000), rel=0.5)


def test_phase_probe_beta_zero_small():
    rows = phase_probe("three_spin_ising", [0.0], [6], seeds=[0, 1], sweeps=3000, burn_in=300)
    assert abs(rows[0]["z"]) < 3


def test_phase_probe_iceberg_gap():
    rows = phase_probe("iceberg", [3.0], [8], seeds=[0, 1], sweeps=3000, burn_in=300)
    assert rows[0]["gap"] > 0 and rows[0]["z"] > 3


def test_observables():
    m = builtin("iceberg")
    assert observable_values(m).tolist() == [-1, 0, 1]
