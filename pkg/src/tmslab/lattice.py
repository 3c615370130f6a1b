"""Lattice geometry, shift spaces and finite patterns on Z^d."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

Site = tuple[int, ...]


def _as_site(site, dimension: int | None = None) -> Site:
    if isinstance(site, (int, np.integer)):
        site = (int(site),)
    out = tuple(int(c) for c in site)
    if dimension is not None and len(out) != dimension:
        raise ValueError(f"site {out} does not have dimension {dimension}")
    return out


def unit_vector(d: int, axis: int) -> Site:
    return tuple(1 if i == axis else 0 for i in range(d))


def neighborhood_offsets(d: int) -> list[Site]:
    """Offsets of the punctured sup-norm unit ball, lexicographic."""
    return [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]


@dataclass(frozen=True)
class SiteSet:
    """A finite set of sites in Z^d, kept sorted lexicographically."""

    dimension: int
    sites: tuple[Site, ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        ordered = tuple(sorted(self.sites))
        for s in ordered:
            if len(s) != self.dimension:
                raise ValueError(f"site {s} does not have dimension {self.dimension}")
        for a, b in zip(ordered, ordered[1:]):
            if a == b:
                raise ValueError(f"duplicate site {a}")
        object.__setattr__(self, "sites", ordered)

    @classmethod
    def of(cls, sites: Iterable, dimension: int | None = None) -> "SiteSet":
        sites = [_as_site(s) for s in sites]
        if dimension is None:
            if not sites:
                raise ValueError("dimension required for an empty site set")
            dimension = len(sites[0])
        return cls(dimension, tuple(sorted(set(sites))))

    @classmethod
    def box(cls, lo: Sequence[int], hi: Sequence[int]) -> "SiteSet":
        """The box prod_i [lo_i, hi_i], bounds inclusive."""
        lo, hi = _as_site(lo), _as_site(hi)
        ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
        return cls(len(lo), tuple(itertools.product(*ranges)))

    @classmethod
    def cube(cls, d: int, r: int, center: Sequence[int] | None = None) -> "SiteSet":
        """Sup-norm ball B(center, r) = center + [-r, r]^d."""
        c = (0,) * d if center is None else _as_site(center, d)
        return cls.box([x - r for x in c], [x + r for x in c])

    @classmethod
    def interval(cls, start: int, length: int) -> "SiteSet":
        return cls(1, tuple((i,) for i in range(start, start + length)))

    @classmethod
    def l1_ball(cls, d: int, r: int, center: Sequence[int] | None = None) -> "SiteSet":
        c = (0,) * d if center is None else _as_site(center, d)
        pts = [
            tuple(x + o for x, o in zip(c, off))
            for off in itertools.product(range(-r, r + 1), repeat=d)
            if sum(abs(o) for o in off) <= r
        ]
        return cls(d, tuple(pts))

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, site) -> bool:
        return _as_site(site) in self._members

    @cached_property
    def _members(self) -> frozenset:
        return frozenset(self.sites)

    @cached_property
    def _index(self) -> dict[Site, int]:
        return {s: i for i, s in enumerate(self.sites)}

    def index(self, site) -> int:
        return self._index[_as_site(site)]

    def translate(self, k: Sequence[int]) -> "SiteSet":
        k = _as_site(k, self.dimension)
        return SiteSet(self.dimension, tuple(tuple(a + b for a, b in zip(s, k)) for s in self.sites))

    def dilate(self, m: int) -> "SiteSet":
        """Sup-norm dilation F + B(0, m)."""
        if m <= 0:
            return self
        offs = list(itertools.product(range(-m, m + 1), repeat=self.dimension))
        pts = {tuple(a + b for a, b in zip(s, o)) for s in self.sites for o in offs}
        return SiteSet(self.dimension, tuple(pts))

    def union(self, other: "SiteSet") -> "SiteSet":
        return SiteSet(self.dimension, tuple(self._members | other._members))

    def difference(self, other: "SiteSet") -> "SiteSet":
        return SiteSet(self.dimension, tuple(s for s in self.sites if s not in other._members))

    def intersection(self, other: "SiteSet") -> "SiteSet":
        return SiteSet(self.dimension, tuple(s for s in self.sites if s in other._members))

    def isdisjoint(self, other: "SiteSet") -> bool:
        return self._members.isdisjoint(other._members)

    def issubset(self, other: "SiteSet") -> bool:
        return self._members <= other._members

    def bounds(self) -> tuple[Site, Site]:
        if not self.sites:
            raise ValueError("empty site set")
        arr = np.array(self.sites)
        return tuple(int(v) for v in arr.min(0)), tuple(int(v) for v in arr.max(0))

    def distance(self, other: "SiteSet") -> int:
        """Sup-norm distance between two nonempty site sets."""
        a = np.array(self.sites)
        b = np.array(other.sites)
        return int(np.abs(a[:, None, :] - b[None, :, :]).max(-1).min())

    def to_json(self) -> list:
        return [list(s) for s in self.sites]


def frontier(F: SiteSet) -> tuple[SiteSet, SiteSet]:
    """Split F into its interior {x : B(x,1) subset of F} and boundary F minus interior."""
    if len(F) == 0:
        raise ValueError("empty site set")
    offs = list(itertools.product((-1, 0, 1), repeat=F.dimension))
    members = F._members
    interior = tuple(
        s for s in F.sites if all(tuple(a + b for a, b in zip(s, o)) in members for o in offs)
    )
    inner = SiteSet(F.dimension, interior)
    return inner, F.difference(inner)


@dataclass(frozen=True)
class Pattern:
    """Symbols assigned to a finite site set; values align with ``support.sites``."""

    support: SiteSet
    values: tuple

    def __post_init__(self):
        if len(self.values) != len(self.support):
            raise ValueError("values must be defined exactly on the support")
        object.__setattr__(self, "values", tuple(self.values))

    @classmethod
    def from_dict(cls, mapping: Mapping, dimension: int | None = None) -> "Pattern":
        items = sorted((_as_site(k), v) for k, v in mapping.items())
        if dimension is None:
            if not items:
                raise ValueError("dimension required for an empty pattern")
            dimension = len(items[0][0])
        return cls(SiteSet(dimension, tuple(k for k, _ in items)), tuple(v for _, v in items))

    @classmethod
    def word(cls, symbols: Sequence, start: int = 0) -> "Pattern":
        return cls(SiteSet.interval(start, len(symbols)), tuple(symbols))

    @classmethod
    def empty(cls, dimension: int) -> "Pattern":
        return cls(SiteSet(dimension, ()), ())

    @property
    def dimension(self) -> int:
        return self.support.dimension

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, site):
        return self.values[self.support.index(site)]

    def items(self):
        return zip(self.support.sites, self.values)

    def as_dict(self) -> dict:
        return dict(self.items())

    def restrict(self, sites: SiteSet) -> "Pattern":
        return Pattern(sites, tuple(self[s] for s in sites.sites))

    def overlay(self, other: "Pattern") -> "Pattern":
        """Join two patterns; values of ``other`` win on overlaps."""
        d = self.as_dict()
        d.update(other.as_dict())
        return Pattern.from_dict(d, self.dimension)

    def to_json(self) -> dict:
        return {"support": self.support.to_json(), "values": list(self.values)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Pattern":
        sup = [_as_site(s) for s in obj["support"]]
        vals = [tuple(v) if isinstance(v, list) else v for v in obj["values"]]
        if len(sup) != len(vals):
            raise ValueError("support and values differ in length")
        return cls.from_dict(dict(zip(sup, vals)), len(sup[0]) if sup else None)


def shift_pattern(p: Pattern, k: Sequence[int]) -> Pattern:
    """Read ``p`` through the shift T_k: the result at n equals p at n + k."""
    k = _as_site(k, p.dimension)
    sites = tuple(tuple(a - b for a, b in zip(s, k)) for s in p.support.sites)
    return Pattern(SiteSet(p.dimension, sites), p.values)


# --- constraints -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AxisPairs:
    """allowed[i][s, t] is true iff (x_n, x_{n+e_i}) = (s, t) may occur."""

    allowed: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=bool) for m in self.allowed)
        for m in mats:
            m.setflags(write=False)
        object.__setattr__(self, "allowed", mats)


@dataclass(frozen=True, eq=False)
class NeighborhoodTable:
    """Admissible (center, punctured-neighborhood) tuples, as symbol indices."""

    entries: frozenset

    def __post_init__(self):
        object.__setattr__(self, "entries", frozenset(tuple(int(v) for v in e) for e in self.entries))


class InadmissibleSymbol(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ShiftSpace:
    """A nearest-neighbour topological Markov shift in dimension ``dimension``."""

    dimension: int
    alphabet: tuple
    constraint: AxisPairs | NeighborhoodTable
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        n = len(self.alphabet)
        if n == 0:
            raise ValueError("empty alphabet")
        if len(set(self.alphabet)) != n:
            raise ValueError("alphabet has repeated symbols")
        c = self.constraint
        if isinstance(c, AxisPairs):
            if len(c.allowed) != self.dimension:
                raise ValueError("need one allowed-pair matrix per axis")
            for m in c.allowed:
                if m.shape != (n, n):
                    raise ValueError(f"allowed matrix shape {m.shape} != ({n}, {n})")
            dead = _dead_symbols(c.allowed)
            if dead:
                raise ValueError(f"dead symbols {[self.alphabet[i] for i in dead]}; prune first")
        elif isinstance(c, NeighborhoodTable):
            if self.dimension > 2 or n > 8:
                raise ValueError("neighborhood tables are supported for d <= 2 and |S| <= 8")
            width = 1 + len(neighborhood_offsets(self.dimension))
            for e in c.entries:
                if len(e) != width or not all(0 <= v < n for v in e):
                    raise ValueError(f"malformed neighborhood entry {e}")
            centers = {e[0] for e in c.entries}
            if len(centers) != n:
                raise ValueError("every symbol must occur as a center")
        else:
            raise TypeError("unknown constraint type")

    @cached_property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.alphabet)}

    @property
    def size(self) -> int:
        return len(self.alphabet)

    @property
    def is_axis_pairs(self) -> bool:
        return isinstance(self.constraint, AxisPairs)

    def encode(self, values: Iterable) -> list[int]:
        idx = self.index
        out = []
        for v in values:
            try:
                out.append(idx[v])
            except (KeyError, TypeError):
                raise InadmissibleSymbol(f"symbol {v!r} not in alphabet") from None
        return out

    def decode(self, indices: Iterable[int]) -> tuple:
        return tuple(self.alphabet[int(i)] for i in indices)

    def to_json(self) -> dict:
        c = self.constraint
        if isinstance(c, AxisPairs):
            con = {"type": "axis_pairs", "allowed": [m.astype(int).tolist() for m in c.allowed]}
        else:
            con = {"type": "table", "entries": [list(e) for e in sorted(c.entries)]}
        return {
            "name": self.name,
            "dimension": self.dimension,
            "alphabet": list(self.alphabet),
            "constraint": con,
        }


def _dead_symbols(allowed: Sequence[np.ndarray]) -> list[int]:
    n = allowed[0].shape[0]
    dead = set()
    for m in allowed:
        dead |= set(np.flatnonzero(~m.any(axis=1)).tolist())
        dead |= set(np.flatnonzero(~m.any(axis=0)).tolist())
    return sorted(i for i in dead if i < n)


def axis_pairs_space(
    dimension: int, alphabet: Sequence, allowed: Sequence, name: str = "", params: dict | None = None
) -> ShiftSpace:
    """Build an axis-pairs shift space, iteratively pruning dead symbols."""
    alphabet = list(alphabet)
    mats = [np.asarray(m, dtype=bool) for m in allowed]
    if len(mats) == 1 and dimension > 1:
        mats = mats * dimension
    while True:
        dead = _dead_symbols(mats)
        if not dead:
            break
        keep = [i for i in range(len(alphabet)) if i not in dead]
        if not keep:
            raise ValueError("constraint admits no configurations")
        alphabet = [alphabet[i] for i in keep]
        mats = [m[np.ix_(keep, keep)] for m in mats]
    return ShiftSpace(dimension, tuple(alphabet), AxisPairs(tuple(mats)), name, dict(params or {}))


def is_locally_admissible(X: ShiftSpace, p: Pattern) -> bool:
    """Check every constraint whose sites all lie in the support of ``p``."""
    if p.dimension != X.dimension:
        raise ValueError("pattern dimension does not match the shift space")
    vals = dict(zip(p.support.sites, X.encode(p.values)))
    d = X.dimension
    c = X.constraint
    if isinstance(c, AxisPairs):
        for axis in range(d):
            m = c.allowed[axis]
            for s, v in vals.items():
                t = s[:axis] + (s[axis] + 1,) + s[axis + 1 :]
                w = vals.get(t)
                if w is not None and not m[v, w]:
                    return False
        return True
    offs = neighborhood_offsets(d)
    for s, v in vals.items():
        nb = []
        for o in offs:
            w = vals.get(tuple(a + b for a, b in zip(s, o)))
            if w is None:
                break
            nb.append(w)
        else:
            if (v, *nb) not in c.entries:
                return False
    return True
