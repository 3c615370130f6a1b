import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmslab import Pattern
from tmslab.models import golden_mean
from tmslab.onedim import (
    NotIrreducible,
    NotPrimitive,
    TransitionMatrix,
    admissible_words,
    conformality_check_1d,
    block_target,
    cylinder_prob,
    entropy_pressure,
    gibbs_markov,
    markov_from_kernel,
    parry_measure,
    periodic_decomposition,
    uniform_specification_check,
)

PHI = (1 + math.sqrt(5)) / 2
GOLDEN = np.array([[1, 1], [1, 0]])
THREE = np.array([[1, 1, 0], [0, 1, 1], [1, 1, 1]])


def test_periodic_decomposition_examples():
    assert periodic_decomposition(TransitionMatrix(GOLDEN))[0] == 1
    N, classes = periodic_decomposition(TransitionMatrix(np.array([[0, 1], [1, 0]])))
    assert N == 2 and classes == [[0], [1]]
    cyc = np.roll(np.eye(3, dtype=int), 1, axis=1)
    assert periodic_decomposition(TransitionMatrix(cyc))[0] == 3


def test_periodic_classes_cycle():
    # period 2 with classes {0,1} and {2,3}
    A = np.array([[0, 0, 1, 1], [0, 0, 1, 0], [1, 1, 0, 0], [0, 1, 0, 0]])
    N, classes = periodic_decomposition(TransitionMatrix(A))
    assert N == 2 and sorted(map(sorted, classes)) == [[0, 1], [2, 3]]
    A2 = np.linalg.matrix_power(A, 2)
    sub = A2[np.ix_(classes[0], classes[0])]
    assert TransitionMatrix((sub > 0).astype(int)).primitive


def test_reducible_reports_classes():
    with pytest.raises(NotIrreducible) as exc:
        periodic_decomposition(TransitionMatrix(np.array([[1, 1], [0, 1]])))
    assert sorted(map(sorted, exc.value.classes)) == [[0], [1]]


def test_parry_examples():
    mu = parry_measure(np.ones((2, 2), int))
    assert np.allclose(mu.p, 0.5) and np.allclose(mu.P, 0.5)
    assert mu.entropy == pytest.approx(math.log(2), abs=1e-14)
    g = parry_measure(GOLDEN)
    assert abs(g.lam - PHI) < 1e-12
    assert g.entropy == pytest.approx(0.481212, abs=1e-6)
    with pytest.raises(NotPrimitive, match="periodic_decomposition"):
        parry_measure(np.array([[0, 1], [1, 0]]))


def test_parry_equals_zero_potential():
    a, b = parry_measure(THREE), gibbs_markov(THREE, [0.0, 0.0, 0.0])
    assert a.lam == b.lam and np.array_equal(a.P, b.P) and np.array_equal(a.p, b.p)


@pytest.mark.parametrize("A", [GOLDEN, THREE, np.ones((3, 3), int)])
def test_stationary_and_stochastic(A):
    for phi in (None, [0.3, -0.2, 1.1][: len(A)]):
        mu = gibbs_markov(A, phi)
        assert np.abs(mu.p @ mu.P - mu.p).max() < 1e-13
        assert np.abs(mu.P.sum(axis=1) - 1).max() < 1e-13
        assert np.all((mu.P > 0) <= (np.asarray(A) > 0))


def test_gibbs_markov_examples():
    c = gibbs_markov(GOLDEN, [2.0, 2.0])
    g = parry_measure(GOLDEN)
    assert np.allclose(c.P, g.P, atol=1e-14) and np.allclose(c.p, g.p, atol=1e-14)
    q = 0.3
    b = gibbs_markov(np.ones((2, 2), int), [math.log(q), math.log(1 - q)])
    assert np.allclose(b.p, [q, 1 - q], atol=1e-14)
    assert np.allclose(b.P, [[q, 1 - q], [q, 1 - q]], atol=1e-14)


def test_cylinder_prob():
    g = parry_measure(GOLDEN)
    assert g.prob(Pattern.empty(1)) == 1.0
    assert cylinder_prob(g, [0, 0]) + cylinder_prob(g, [0, 1]) == pytest.approx(cylinder_prob(g, [0]), abs=1e-15)
    assert cylinder_prob(g, [1, 1]) == 0.0
    f = parry_measure(np.ones((2, 2), int))
    for w in itertools.product((0, 1), repeat=5):
        assert cylinder_prob(f, list(w)) == pytest.approx(2.0**-5, abs=1e-16)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=7))
def test_cylinder_additivity(word):
    mu = gibbs_markov(THREE, [0.2, -0.4, 0.9])
    base = cylinder_prob(mu, word)
    ext = sum(cylinder_prob(mu, word + [s]) for s in range(3))
    assert ext == pytest.approx(base, abs=1e-15)


def test_gapped_cylinder_matches_marginalisation():
    mu = parry_measure(GOLDEN)
    gapped = mu.prob(Pattern.from_dict({(0,): 1, (3,): 1}))
    full = sum(cylinder_prob(mu, [1, a, b, 1]) for a in (0, 1) for b in (0, 1))
    assert gapped == pytest.approx(full, abs=1e-15)


def test_admissible_words_count():
    # Fibonacci
    assert len(admissible_words(GOLDEN, 10)) == 144
    assert admissible_words(GOLDEN, 2).tolist() == [[0, 0], [0, 1], [1, 0]]


def test_uniform_specification():
    assert uniform_specification_check(parry_measure(GOLDEN), 10) <= 1e-12
    assert uniform_specification_check(parry_measure(np.ones((2, 2), int)), 10) == 0.0
    assert uniform_specification_check(parry_measure(THREE), 10) <= 1e-12
    assert uniform_specification_check(gibbs_markov(GOLDEN, [0.0, 0.7]), 6) > 1e-3


@pytest.mark.parametrize("phi", [[0.0, 0.7], [0.0, -1.0], [0.0, 0.5]])
def test_conformality_golden(phi):
    assert conformality_check_1d(gibbs_markov(GOLDEN, phi), 8) <= 1e-10


def test_conformality_full_shift():
    assert conformality_check_1d(gibbs_markov(np.ones((3, 3), int), [0.4, -2.0, 1.3]), 8) <= 1e-12


def test_conformality_zero_is_uniform_specification():
    mu = parry_measure(THREE)
    assert conformality_check_1d(mu, 6) <= 1e-12


def test_entropy_pressure_examples():
    h, p = entropy_pressure(parry_measure(np.ones((2, 2), int)))
    assert h == pytest.approx(math.log(2), abs=1e-14) and p == pytest.approx(math.log(2), abs=1e-14)
    h, _ = entropy_pressure(parry_measure(GOLDEN))
    assert h == pytest.approx(math.log(PHI), abs=1e-12)
    phi = [0.1, -0.3, 0.8]
    mu = gibbs_markov(THREE, phi)
    assert entropy_pressure(mu, phi)[1] == pytest.approx(math.log(mu.lam), abs=1e-10)


def test_variational_dominance():
    rng = np.random.default_rng(0)
    phi = [0.1, -0.3, 0.8]
    top = math.log(gibbs_markov(THREE, phi).lam)
    for _ in range(50):
        P = THREE * rng.random((3, 3))
        P = P / P.sum(axis=1, keepdims=True)
        assert entropy_pressure(markov_from_kernel(THREE, P), phi)[1] <= top + 1e-10


def test_kernel_outside_support_rejected():
    with pytest.raises(ValueError):
        markov_from_kernel(GOLDEN, np.full((2, 2), 0.5))


def test_sample_frequencies():
    mu = parry_measure(GOLDEN)
    x = mu.sample(200000, np.random.default_rng(1))
    assert not np.any((x[:-1] == 1) & (x[1:] == 1))
    assert abs(x.mean() - mu.p[1]) < 0.01


def test_block_target_period_two():
    A = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]])
    G = np.array([[1, 0], [0, 1], [0, 0]])
    tgt = block_target(A, G, [0.4, -0.9], L=4)
    assert tgt.period == 2
    assert tgt.conformality_deviation <= 1e-10
    assert tgt.kernel_deviation <= 1e-10


def test_transition_matrix_of_space():
    T = TransitionMatrix.of(golden_mean())
    assert T.A.tolist() == GOLDEN.tolist() and T.primitive
