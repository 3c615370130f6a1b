import math

import numpy as np
import pytest

from tmslab import Pattern, SiteSet, is_locally_admissible
from tmslab.models import full, golden_mean
from tmslab.relations import CylinderSwap, shifted_holonomy_defect
from tmslab.spectral import (
    CorrelationSeries,
    DriverMeasure,
    ProductFieldMeasure,
    base_layer_measures,
    chacon_correlation_oracle,
    chacon_word,
    classify_empirical,
    correlation_series,
    driver_observable,
    driver_sample,
    field_axis_sampler,
    fold,
    free_product,
    markov_layer_sampler,
    mixture_limit,
    parse_driver,
    periodogram_peaks,
    product_field_sample,
    tail_mean,
)

GOLDEN_ALPHA = (math.sqrt(5) - 1) / 2


def test_free_product_of_full_shift_is_full():
    Z = free_product(full(2)).space
    assert Z.dimension == 2 and all(m.all() for m in Z.constraint.allowed)


def test_free_product_golden_mean_layers():
    Z = free_product(golden_mean()).space
    vertical = Pattern.from_dict({(0, 0): 1, (0, 1): 1})
    horizontal = Pattern.from_dict({(0, 0): 1, (1, 0): 1})
    assert is_locally_admissible(Z, vertical)
    assert not is_locally_admissible(Z, horizontal)


def test_free_product_layerwise_admissibility():
    fp = free_product(golden_mean())
    Z = fp.space
    rng = np.random.default_rng(0)
    F = SiteSet.box((0, 0), (3, 2))
    for _ in range(200):
        p = Pattern(F, tuple(rng.integers(0, 2, len(F)).tolist()))
        layerwise = all(is_locally_admissible(fp.base, fp.layer(p, n)) for n in fp.layers(p))
        assert is_locally_admissible(Z, p) == layerwise


def test_layer_and_stack_roundtrip():
    fp = free_product(golden_mean())
    p = Pattern.from_dict({(0, 0): 1, (1, 0): 0, (0, 3): 1})
    assert fp.stack({n: fp.layer(p, n) for n in fp.layers(p)}) == p


def test_parse_driver():
    assert parse_driver("point_mass:-").sign == -1
    assert parse_driver("periodic:+-").word == (1, -1)
    assert parse_driver("sturmian:0.3").alpha == 0.3
    assert parse_driver("bernoulli:0.2").q == 0.2
    assert parse_driver("chacon").label == "weakly_mixing_not_strongly_mixing"
    with pytest.raises(ValueError):
        parse_driver("sturmian:1.5")
    with pytest.raises(ValueError):
        parse_driver("unknown")


def test_driver_examples():
    assert (driver_sample(parse_driver("point_mass:+"), 50, 0) == 1).all()
    starts = set()
    for s in range(20):
        x = driver_sample(parse_driver("periodic:+-"), 10, s)
        assert (x[1:] == -x[:-1]).all()
        starts.add(int(x[0]))
    assert starts == {-1, 1}
    L = 100000
    x = driver_sample(parse_driver(f"sturmian:{GOLDEN_ALPHA}"), L, 3)
    assert abs((x == -1).mean() - GOLDEN_ALPHA) < 2 / math.sqrt(L)
    with pytest.raises(ValueError):
        driver_sample(parse_driver("chacon"), 0, 0)


def test_chacon_word_is_fixed_point():
    w = chacon_word(200)
    # applying 0 -> 0010, 1 -> 1 to the prefix reproduces the word
    image = np.concatenate([np.array([0, 0, 1, 0]) if c == 0 else np.array([1]) for c in w[:40]])
    assert np.array_equal(image, w[: len(image)])
    assert w[:9].tolist() == [0, 0, 1, 0, 0, 0, 1, 0, 1]


@pytest.mark.parametrize("text", ["bernoulli:0.3", f"sturmian:{GOLDEN_ALPHA}", "chacon", "periodic:++-"])
def test_driver_stationarity(text):
    nu = parse_driver(text)
    rng = np.random.default_rng(1)
    n = 4000
    X = np.array([driver_sample(nu, 8, rng) for _ in range(n)])
    freqs = (X == 1).mean(axis=0)
    assert np.all(np.abs(freqs - nu.plus_frequency) < 3 / math.sqrt(n))


def test_product_field_degenerate_reduces_to_driver():
    fp = free_product(full(2))
    point = {1: lambda rng, W: np.ones(len(W), int), -1: lambda rng, W: np.zeros(len(W), int)}
    eta = driver_sample(parse_driver("bernoulli:0.5"), 30, 4)
    W = SiteSet.box((0, 0), (0, 29))
    p = product_field_sample(fp, point, eta, W, 0)
    assert [p[(0, n)] for n in range(30)] == [1 if e > 0 else 0 for e in eta]
    with pytest.raises(ValueError, match="exceed the driver path"):
        product_field_sample(fp, point, eta, SiteSet.box((0, 0), (0, 30)), 0)


def test_product_field_eta_independent_when_layers_equal():
    fp = free_product(golden_mean())
    mu = base_layer_measures(golden_mean())[1]
    same = {1: markov_layer_sampler(mu), -1: markov_layer_sampler(mu)}
    W = SiteSet.box((0, 0), (5, 3))
    means = []
    for drv in ("point_mass:+", "point_mass:-", "periodic:+-"):
        eta = driver_sample(parse_driver(drv), 4, 0)
        rng = np.random.default_rng(9)
        vals = [np.mean(product_field_sample(fp, same, eta, W, rng).values) for _ in range(400)]
        means.append(np.mean(vals))
    assert max(means) - min(means) < 0.05
    assert abs(means[0] - mu.p[1]) < 0.03


def test_product_field_deterministic():
    fp = free_product(golden_mean())
    lm = base_layer_measures(golden_mean())
    samplers = {s: markov_layer_sampler(m) for s, m in lm.items()}
    eta = driver_sample(parse_driver("bernoulli:0.5"), 5, 2)
    W = SiteSet.box((0, 0), (6, 4))
    a = product_field_sample(fp, samplers, eta, W, 11)
    assert a == product_field_sample(fp, samplers, eta, W, 11)
    assert is_locally_admissible(fp.space, a)


def test_layer_independence_point_mass():
    fp = free_product(golden_mean())
    lm = base_layer_measures(golden_mean())
    s = correlation_series(field_axis_sampler(fp, lm, parse_driver("point_mass:+"), "vertical", [0.0, 1.0]),
                           K=8, replicas=64, seed=0, length=256)
    assert np.all(np.abs(s.C[1:]) < 3 * s.stderr[1:])


def test_iid_series_within_noise():
    s = correlation_series(driver_observable(parse_driver("bernoulli:0.5")), K=16, replicas=64, seed=5, length=512)
    assert np.all(np.abs(s.C[1:]) < 3 * s.stderr[1:])
    assert s.C[0] == pytest.approx(1.0, abs=0.02)
    assert np.all(s.C[0] >= np.abs(s.C) - 3 * s.stderr)


def test_periodic_field_alternates():
    fp = free_product(golden_mean())
    lm = base_layer_measures(golden_mean())
    s = correlation_series(field_axis_sampler(fp, lm, parse_driver("periodic:+-"), "vertical", [0.0, 1.0]),
                           K=8, replicas=64, seed=1, length=256)
    signs = np.sign(s.C[1:])
    assert np.all(signs == np.array([(-1) ** k for k in range(1, 9)]))
    assert np.all(np.abs(s.C[1:]) > 3 * s.stderr[1:])


def test_horizontal_limit_positive_and_matched():
    fp = free_product(golden_mean())
    lm = base_layer_measures(golden_mean())
    f = np.array([0.0, 1.0])
    nu = parse_driver("bernoulli:0.5")
    target = mixture_limit(lm, nu, f)
    assert target > 0
    assert mixture_limit(lm, parse_driver("point_mass:+"), f) == pytest.approx(0.0, abs=1e-15)
    s = correlation_series(field_axis_sampler(fp, lm, nu, "horizontal", f), K=32, replicas=256, seed=2, length=256)
    m, se = tail_mean(s)
    assert abs(m - target) < 3 * max(se, 1e-12) + 0.01


def test_periodogram_constant_and_alternating():
    K = 64
    lags = np.arange(K + 1)
    const = CorrelationSeries(lags, np.ones(K + 1), np.full(K + 1, 1e-3))
    assert periodogram_peaks(const).peaks[0]["frequency"] == 0.0
    alt = CorrelationSeries(lags, (-1.0) ** lags, np.full(K + 1, 1e-3))
    top = periodogram_peaks(alt).peaks[0]
    assert top["frequency"] == 0.5 and top["fraction"] >= 0.9
    with pytest.raises(ValueError):
        periodogram_peaks(CorrelationSeries(np.arange(10), np.ones(10), np.ones(10)))


def test_periodogram_pure_rotation():
    K = 256
    lags = np.arange(K + 1)
    alpha = GOLDEN_ALPHA
    series = CorrelationSeries(lags, np.cos(2 * np.pi * alpha * lags), np.full(K + 1, 1e-4))
    top = periodogram_peaks(series).peaks[0]
    assert abs(top["frequency"] - fold(alpha)) <= 1 / K


def test_fold():
    assert fold(0.618) == pytest.approx(0.382)
    assert fold(0.25) == 0.25 and fold(1.25) == 0.25


def test_classify_sturmian_driver():
    nu = parse_driver(f"sturmian:{GOLDEN_ALPHA}")
    s = correlation_series(driver_observable(nu), K=128, replicas=16, seed=3, length=512)
    rep = classify_empirical(s, nu)
    assert rep.verdict == "eigenvalue_detected"
    assert abs(rep.frequency - fold(GOLDEN_ALPHA)) <= 1 / 128
    assert rep.to_json()["driver"]["label"] == "totally_ergodic_not_weakly_mixing"
    assert "literature" in rep.to_json()["mild_mixing"]


def test_chacon_oracle_matches_direct_computation():
    w = 1.0 - 2.0 * chacon_word(3**8)[: 3**8]
    C = chacon_correlation_oracle(5, 3**8)
    m = w.mean()
    assert C[3] == pytest.approx(np.mean(w[:-3] * w[3:]) - m * m, abs=1e-15)


def test_star_property_on_product_field():
    fp = free_product(golden_mean())
    lm = base_layer_measures(golden_mean())
    eta = [1, -1, 1, 1, -1, -1, 1, 1, -1, 1, 1, 1, -1, 1, -1]
    mu = ProductFieldMeasure(fp, lm, eta)
    box = SiteSet.box((0, 4), (2, 6))
    src = Pattern(box, (0,) * 9)
    tgt = src.overlay(Pattern.from_dict({(1, 5): 1}))
    sw = CylinderSwap(src, tgt)
    f = Pattern.from_dict({(1, 5): 1, (1, 4): 0})
    defects = [shifted_holonomy_defect(mu, sw, f, (0, n)) for n in range(0, 5)]
    assert defects[0] == pytest.approx(mu.prob(src), rel=1e-12)
    assert all(d == 0.0 for d in defects[3:])
