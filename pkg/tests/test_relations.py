import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmslab import Pattern, SiteSet
from tmslab.enumeration import enumerate_array
from tmslab.models import full, golden_mean, iceberg
from tmslab.onedim import parry_measure, TransitionMatrix
from tmslab.potentials import LocalPotential, site_potential, three_spin
from tmslab.relations import (
    CollarIncomplete,
    CylinderSwap,
    HolonomyDomainError,
    NoEmbeddingFound,
    SiteFunction,
    apply_swap,
    cocycle_value,
    embed_tail_pair,
    exchangeable_equivalent,
    exchangeable_verdicts,
    markov_cocycle_value,
    shifted_holonomy_defect,
)
from tmslab import is_locally_admissible


def W(*vals, start=0):
    return Pattern.word(list(vals), start)


def test_cocycle_examples():
    G = SiteFunction.sharp(full(2))
    a = W(0, 0)
    assert cocycle_value(G, a, a) == (0, 0)
    assert cocycle_value(G, a, W(1, 1)) == (-2, 2)
    with pytest.raises(ValueError):
        cocycle_value(G, a, W(0, 0, 0))


words = st.lists(st.integers(0, 2), min_size=4, max_size=4)


@settings(max_examples=200, deadline=None)
@given(words, words, words, st.lists(st.integers(-5, 5), min_size=3, max_size=3))
def test_cocycle_additive_and_antisymmetric(x, y, z, g):
    G = SiteFunction.integer({0: g[0], 1: g[1], 2: g[2]})
    a, b, c = W(*x), W(*y), W(*z)
    ab, bc, ac = cocycle_value(G, a, b), cocycle_value(G, b, c), cocycle_value(G, a, c)
    assert ac[0] == ab[0] + bc[0]
    assert cocycle_value(G, b, a)[0] == -ab[0]


def test_three_spin_single_flip():
    G = three_spin(1.0)
    F = SiteSet.cube(2, 1)
    plus = Pattern(F, (1,) * 9)
    flip = plus.overlay(Pattern.from_dict({(0, 0): -1}))
    collar = Pattern(SiteSet.cube(2, 2).difference(F), (1,) * 16)
    assert markov_cocycle_value(G, plus, plus, collar) == 0.0
    assert markov_cocycle_value(G, plus, flip, collar) == pytest.approx(-6.0, abs=0)


def test_collar_incomplete_lists_sites():
    # windows x_{j-e1} x_{j+e1} through the centre read two steps away
    G = LocalPotential(2, 1, ((-1, 0), (1, 0)), lambda s: s[0] * s[1], "skip")
    F = SiteSet.cube(2, 1)
    a = Pattern(F, (1,) * 9)
    b = a.overlay(Pattern.from_dict({(0, 0): -1}))
    with pytest.raises(CollarIncomplete) as exc:
        markov_cocycle_value(G, a, b, None)
    assert "(-2, 0)" in str(exc.value) and "(2, 0)" in str(exc.value)
    collar = Pattern.from_dict({(-2, 0): 1, (2, 0): 1})
    assert markov_cocycle_value(G, a, b, collar) == -4.0


def test_site_potential_agrees_with_cocycle():
    rng = np.random.default_rng(1)
    vals = {0: 0.3, 1: -1.1, 2: 2.5}
    Gs = SiteFunction.real(vals)
    Gp = site_potential(vals, 2)
    F = SiteSet.cube(2, 1)
    for _ in range(100):
        a = rng.integers(0, 3, 9)
        b = a.copy()
        b[4] = rng.integers(0, 3)
        pa, pb = Pattern(F, tuple(a.tolist())), Pattern(F, tuple(b.tolist()))
        assert markov_cocycle_value(Gp, pa, pb) == pytest.approx(cocycle_value(Gs, pa, pb), abs=1e-12)


def test_exchangeable_examples():
    a = W(0, 1, 0, 1, 1, 0)
    b = W(0, 1, 1, 0, 1, 0)
    assert exchangeable_equivalent(a, b)
    assert not exchangeable_equivalent(a, W(0, 1, 1, 1, 1, 0))
    # permutation touching the boundary is excluded
    assert not exchangeable_equivalent(W(1, 0, 0), W(0, 0, 1))


def test_exchangeable_random_pairs_agree():
    rng = np.random.default_rng(2)
    for X in (golden_mean(), iceberg(1)):
        F = SiteSet.cube(X.dimension, 3 if X.dimension == 1 else 1)
        rows = enumerate_array(X, F)
        disagreements = 0
        for _ in range(2000):
            i, j = rng.integers(0, len(rows), 2)
            a = Pattern(F, X.decode(rows[i]))
            b = Pattern(F, X.decode(rows[j]))
            k, p = exchangeable_verdicts(a, b)
            disagreements += k != p
        assert disagreements == 0


def test_exchangeable_implies_zero_cocycle():
    rng = np.random.default_rng(3)
    X = iceberg(1)
    F = SiteSet.cube(2, 1)
    rows = enumerate_array(X, F)
    Gs = [SiteFunction.integer({s: int(v) for s, v in zip(X.alphabet, rng.integers(-9, 9, 3))}) for _ in range(5)]
    hits = 0
    for _ in range(3000):
        i, j = rng.integers(0, len(rows), 2)
        a, b = Pattern(F, X.decode(rows[i])), Pattern(F, X.decode(rows[j]))
        if exchangeable_equivalent(a, b):
            hits += 1
            assert all(cocycle_value(G, a, b) == (0,) for G in Gs)
    assert hits > 0


def test_apply_swap():
    sw = CylinderSwap(W(0, 1, 0, start=1), W(0, 0, 0, start=1))
    x = W(0, 0, 1, 0, 0)
    y = apply_swap(sw, x)
    assert y.values == (0, 0, 0, 0, 0)
    assert is_locally_admissible(golden_mean(), y)
    assert apply_swap(sw.reverse(), y) == x
    ident = CylinderSwap(W(0, 1, 0), W(0, 1, 0))
    assert ident.is_identity and apply_swap(ident, W(0, 1, 0)) == W(0, 1, 0)
    with pytest.raises(HolonomyDomainError, match="holonomy domain"):
        apply_swap(sw, W(0, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        CylinderSwap(W(0, 1), W(1, 1))  # boundary differs


def test_swap_json_roundtrip():
    sw = CylinderSwap(W(0, 1, 0), W(0, 0, 0))
    assert CylinderSwap.from_json(sw.to_json()) == sw


def test_embed_full_shift():
    X = full(2)
    a = W(1, 0, 1)
    sw = CylinderSwap(W(0, 1, 0), W(0, 0, 0))
    emb = embed_tail_pair(a, sw, X, min_gap=0)
    assert emb.shift == (1,) or emb.shift == (-1,) or max(map(abs, emb.shift)) <= 3
    assert emb.b.restrict(a.support) == a
    assert emb.c.restrict(sw.support.translate(emb.shift)).values == sw.target.values


def test_embed_golden_mean_and_cocycle_preserved():
    X = golden_mean()
    a = W(1)
    sw = CylinderSwap(W(0, 1, 0), W(0, 0, 0))
    emb = embed_tail_pair(a, sw, X)
    assert min(abs(c) for c in emb.shift) >= 2
    assert emb.b.restrict(a.support) == a
    assert is_locally_admissible(X, emb.b) and is_locally_admissible(X, emb.c)
    G = SiteFunction.sharp(X)
    assert cocycle_value(G, emb.b, emb.c) == cocycle_value(G, sw.source, sw.target)


def test_embed_budget():
    X = golden_mean()
    sw = CylinderSwap(W(1, 1, 1), W(1, 1, 1))
    with pytest.raises(NoEmbeddingFound, match="no embedding found within budget"):
        embed_tail_pair(W(0), sw, X, max_shift=3)


def test_holonomy_defect_parry():
    mu = parry_measure(TransitionMatrix.of(golden_mean()))
    sw = CylinderSwap(W(0, 1, 0), W(0, 0, 0))
    f = W(1, start=1)
    d0 = shifted_holonomy_defect(mu, sw, f, (0,))
    # f changes exactly on the source cylinder 010
    assert d0 == pytest.approx(mu.prob(W(0, 1, 0)), rel=1e-12)
    vals = [shifted_holonomy_defect(mu, sw, f, (n,)) for n in range(0, 11)]
    assert all(v == 0.0 for v in vals[3:])
    assert all(x >= y for x, y in zip(vals, vals[1:]))
