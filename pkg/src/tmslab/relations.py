"""Tail and exchangeable relations, cylinder swaps and cocycles on patterns."""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

from .enumeration import compile_problem
from .lattice import Pattern, ShiftSpace, SiteSet, frontier, is_locally_admissible, shift_pattern
from .potentials import LocalPotential

_INT64_MAX = 2**63 - 1


class HolonomyDomainError(ValueError):
    pass


class CollarIncomplete(ValueError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"collar does not determine sites {self.missing}")


class NoEmbeddingFound(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SiteFunction:
    """G: S -> Z^k (``kind="integer_vector"``) or S -> R (``kind="real"``)."""

    kind: str
    values: Mapping
    rank: int = 1

    def __post_init__(self):
        if self.kind == "integer_vector":
            vals = {s: tuple(int(c) for c in v) for s, v in self.values.items()}
            ranks = {len(v) for v in vals.values()}
            if len(ranks) > 1:
                raise ValueError("integer site function values must share one rank")
            object.__setattr__(self, "rank", ranks.pop() if ranks else self.rank)
        elif self.kind == "real":
            vals = {s: float(v) for s, v in self.values.items()}
        else:
            raise ValueError(f"unknown site function kind {self.kind!r}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def sharp(cls, X: ShiftSpace) -> "SiteFunction":
        """The counting function s -> e_s in Z^S."""
        n = X.size
        return cls("integer_vector", {s: tuple(int(i == j) for j in range(n)) for i, s in enumerate(X.alphabet)})

    @classmethod
    def integer(cls, values: Mapping) -> "SiteFunction":
        vals = {s: (v,) if isinstance(v, (int, np.integer)) else v for s, v in values.items()}
        return cls("integer_vector", vals)

    @classmethod
    def real(cls, values: Mapping) -> "SiteFunction":
        return cls("real", values)

    def __call__(self, symbol):
        try:
            return self.values[symbol]
        except KeyError:
            raise ValueError(f"site function undefined at {symbol!r}") from None

    def matrix(self, X: ShiftSpace) -> np.ndarray:
        """Integer matrix with column s equal to G(s); the homomorphism Z^S -> Z^k."""
        if self.kind != "integer_vector":
            raise ValueError("only integer site functions define lattice homomorphisms")
        return np.array([self(s) for s in X.alphabet], dtype=object).T.reshape(self.rank, X.size)

    def zero(self):
        return (0,) * self.rank if self.kind == "integer_vector" else 0.0


def cocycle_value(G: SiteFunction, a: Pattern, b: Pattern):
    """Sum over the common support of G(b_j) - G(a_j)."""
    if a.support != b.support:
        raise ValueError("patterns must share their support")
    if G.kind == "real":
        return float(sum(G(y) - G(x) for x, y in zip(a.values, b.values) if x != y))
    acc = [0] * G.rank
    for x, y in zip(a.values, b.values):
        if x == y:
            continue
        gx, gy = G(x), G(y)
        for i in range(G.rank):
            acc[i] += gy[i] - gx[i]
    for v in acc:
        if abs(v) > _INT64_MAX:
            raise OverflowError("integer cocycle value exceeds 64-bit range")
    return tuple(acc)


def markov_cocycle_value(G: LocalPotential, a: Pattern, b: Pattern, collar: Pattern | None = None) -> float:
    """Change of sum_j G(x restricted to j + footprint) when a is replaced by b.

    Only windows reading a changed site contribute; sites they read outside the
    support come from ``collar``.
    """
    if a.support != b.support:
        raise ValueError("patterns must share their support")
    F = a.support
    _, boundary = frontier(F) if len(F) else (None, SiteSet(F.dimension, ()))
    for s in boundary:
        if a[s] != b[s]:
            raise ValueError(f"patterns differ on the boundary site {s}")
    changed = [s for s, x, y in zip(F.sites, a.values, b.values) if x != y]
    if not changed:
        return 0.0
    fp = G.footprint
    anchors = sorted({tuple(c - o for c, o in zip(s, off)) for s in changed for off in fp})
    av, bv = a.as_dict(), b.as_dict()
    outside = collar.as_dict() if collar is not None else {}
    missing = set()
    total = 0.0
    for j in anchors:
        sites = [tuple(c + o for c, o in zip(j, off)) for off in fp]
        wa, wb = [], []
        for s in sites:
            if s in av:
                wa.append(av[s])
                wb.append(bv[s])
            elif s in outside:
                wa.append(outside[s])
                wb.append(outside[s])
            else:
                missing.add(s)
        if not missing:
            total += G(wb) - G(wa)
    if missing:
        raise CollarIncomplete(missing)
    return total


def boundary_agrees(a: Pattern, b: Pattern) -> bool:
    if a.support != b.support:
        return False
    _, bd = frontier(a.support)
    return all(a[s] == b[s] for s in bd)


def _count_vector(a: Pattern, b: Pattern) -> dict:
    diff = Counter(b.values)
    diff.subtract(Counter(a.values))
    return {s: v for s, v in diff.items() if v}


def _permutation_witness(a: Pattern, b: Pattern) -> list[int] | None:
    """Indices sigma with b.values[j] == a.values[sigma[j]], or None."""
    slots = defaultdict(list)
    for i, v in enumerate(a.values):
        slots[v].append(i)
    sigma = []
    for v in b.values:
        if not slots[v]:
            return None
        sigma.append(slots[v].pop())
    if sorted(sigma) != list(range(len(a.values))):
        return None
    if any(a.values[sigma[j]] != b.values[j] for j in range(len(sigma))):
        return None
    return sigma


def exchangeable_verdicts(a: Pattern, b: Pattern) -> tuple[bool, bool]:
    """(kernel verdict, permutation verdict) for membership in the exchangeable relation.

    The kernel verdict asks that the boundaries match and the counting cocycle
    vanish; the permutation verdict builds an explicit rearrangement of a into b.
    """
    if a.support != b.support:
        raise ValueError("patterns must share their support")
    bd = boundary_agrees(a, b)
    kernel = bd and not _count_vector(a, b)
    perm = bd and _permutation_witness(a, b) is not None
    return kernel, perm


def exchangeable_equivalent(a: Pattern, b: Pattern) -> bool:
    kernel, perm = exchangeable_verdicts(a, b)
    if kernel != perm:
        raise RuntimeError(f"exchangeability characterizations disagree on {a} / {b}")
    return kernel


@dataclass(frozen=True)
class CylinderSwap:
    """The holonomy [source]_F -> [target]_F fixing everything off F."""

    source: Pattern
    target: Pattern

    def __post_init__(self):
        if self.source.support != self.target.support:
            raise ValueError("source and target must share their support")
        if not boundary_agrees(self.source, self.target):
            raise ValueError("source and target must agree on the boundary of the support")

    @property
    def support(self) -> SiteSet:
        return self.source.support

    @property
    def is_identity(self) -> bool:
        return self.source == self.target

    def validate(self, X: ShiftSpace) -> None:
        if not (is_locally_admissible(X, self.source) and is_locally_admissible(X, self.target)):
            raise ValueError("swap patterns must be locally admissible")

    def reverse(self) -> "CylinderSwap":
        return CylinderSwap(self.target, self.source)

    def shifted(self, k: Sequence[int]) -> "CylinderSwap":
        return CylinderSwap(shift_pattern(self.source, k), shift_pattern(self.target, k))

    def to_json(self) -> dict:
        return {
            "support": self.support.to_json(),
            "source": list(self.source.values),
            "target": list(self.target.values),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "CylinderSwap":
        sup = obj["support"]
        src = Pattern.from_json({"support": sup, "values": obj["source"]})
        tgt = Pattern.from_json({"support": sup, "values": obj["target"]})
        return cls(src, tgt)


def apply_swap(sw: CylinderSwap, x: Pattern) -> Pattern:
    F = sw.support
    if not F.issubset(x.support):
        raise HolonomyDomainError("holonomy domain: support not covered")
    if x.restrict(F) != sw.source:
        raise HolonomyDomainError("holonomy domain: pattern is not in the source cylinder")
    return x.overlay(sw.target)


@dataclass
class TailEmbedding:
    volume: SiteSet
    b: Pattern
    c: Pattern
    shift: tuple


def _translations(d: int, max_norm: int):
    for r in range(1, max_norm + 1):
        for k in itertools.product(range(-r, r + 1), repeat=d):
            if max(abs(c) for c in k) == r:
                yield k


def embed_tail_pair(
    a: Pattern,
    sw: CylinderSwap,
    X: ShiftSpace,
    max_shift: int = 12,
    margin: int = 1,
    min_gap: int = 2,
) -> TailEmbedding:
    """Place the swap beside ``a`` so that both sides extend jointly.

    Searches translations k by increasing sup norm for B + k at sup-distance at
    least ``min_gap`` from the support of ``a`` and a margin-extendable joint
    pattern. Returns the volume F u (B + k) with b (carrying u) and c (carrying v).
    """
    F, B = a.support, sw.support
    fixed_a = dict(zip(F.sites, X.encode(a.values)))
    for k in _translations(X.dimension, max_shift):
        Bk = B.translate(k)
        if F.distance(Bk) < min_gap:
            continue
        u = shift_pattern(sw.source, tuple(-c for c in k))
        v = shift_pattern(sw.target, tuple(-c for c in k))
        fixed = dict(fixed_a)
        fixed.update(zip(Bk.sites, X.encode(u.values)))
        vol = F.union(Bk)
        lo, hi = vol.bounds()
        hull = SiteSet.box(lo, hi).dilate(margin)
        prob = compile_problem(X, vol.sites, hull.difference(vol).sites, fixed)
        if prob.domains.any(axis=1).all() and prob.exists():
            b = a.overlay(u)
            c = a.overlay(v)
            return TailEmbedding(vol, b, c, k)
    raise NoEmbeddingFound("no embedding found within budget")


class CylinderMeasure(Protocol):
    alphabet: tuple

    def prob(self, pattern: Pattern) -> float: ...


def shifted_holonomy_defect(mu: CylinderMeasure, sw: CylinderSwap, f: Pattern, n: Sequence[int]) -> float:
    """L1(mu) distance between f o T_n o pi o T_{-n} and f on the swap's domain.

    ``f`` is the indicator of the cylinder it names. Computed exactly by summing
    cylinder probabilities over the joint window.
    """
    sw_n = sw.shifted(n)
    Fn, W = sw_n.support, f.support
    if Fn.isdisjoint(W):
        return 0.0
    free = W.difference(Fn)
    src = sw_n.source.as_dict()
    tgt = sw_n.target.as_dict()
    fvals = f.as_dict()
    total = 0.0
    for combo in itertools.product(mu.alphabet, repeat=len(free)):
        base = dict(zip(free.sites, combo))
        before = {**base, **src}
        after = {**base, **tgt}
        f_before = all(before[s] == v for s, v in fvals.items())
        f_after = all(after[s] == v for s, v in fvals.items())
        if f_before != f_after:
            total += mu.prob(Pattern.from_dict(before, W.dimension))
    return total
