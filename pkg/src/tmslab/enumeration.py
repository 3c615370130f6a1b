"""Admissible-pattern enumeration, counting and irreducibility checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import backend
from .lattice import (
    AxisPairs,
    Pattern,
    ShiftSpace,
    Site,
    SiteSet,
    neighborhood_offsets,
    unit_vector,
)

DEFAULT_CAP = 10**7


class EnumerationCapExceeded(RuntimeError):
    def __init__(self, partial_count: int, cap: int):
        super().__init__(f"enumeration cap exceeded ({partial_count} patterns found, cap {cap})")
        self.partial_count = partial_count
        self.cap = cap


@dataclass
class CompiledProblem:
    """Constraint data in the flat layout the kernels consume."""

    order: list[Site]
    n_out: int
    nsym: int
    domains: np.ndarray
    nbr_ptr: np.ndarray
    nbr_idx: np.ndarray
    nbr_mat: np.ndarray
    mats: np.ndarray
    tables: dict = field(default_factory=dict)
    pairs: list = field(default_factory=list)

    def level(self, site: Site) -> int:
        return self._pos[site]

    def __post_init__(self):
        self._pos = {s: i for i, s in enumerate(self.order)}

    def run(self, domains=None, cap=DEFAULT_CAP, count_only=False, max_results=0):
        dom = self.domains if domains is None else domains
        rows, count, exceeded = backend.dfs(
            dom, self.nbr_ptr, self.nbr_idx, self.nbr_mat, self.mats, self.n_out,
            cap, count_only, max_results, tables=self.tables,
        )
        if exceeded:
            raise EnumerationCapExceeded(count, cap)
        return rows, count

    def exists(self, domains=None) -> bool:
        _, count = self.run(domains, cap=1, count_only=True, max_results=1)
        return count > 0


def axis_mats(X: ShiftSpace) -> np.ndarray:
    """Stack [A_0, A_0^T, A_1, A_1^T, ...] as uint8."""
    mats = []
    for m in X.constraint.allowed:
        mats.append(m)
        mats.append(m.T)
    return np.ascontiguousarray(np.array(mats, dtype=np.uint8))


def compile_problem(
    X: ShiftSpace,
    out_sites: Sequence[Site],
    ext_sites: Sequence[Site] = (),
    fixed: dict | None = None,
    propagate: bool = True,
) -> CompiledProblem:
    """Lay out a search over ``out_sites`` (emitted) then ``ext_sites`` (witnessed).

    ``fixed`` maps sites to symbol indices.
    """
    order = list(out_sites) + list(ext_sites)
    pos = {s: i for i, s in enumerate(order)}
    if len(pos) != len(order):
        raise ValueError("output and extension sites overlap")
    n, nsym, d = len(order), X.size, X.dimension
    domains = np.ones((n, nsym), dtype=np.uint8)
    for s, v in (fixed or {}).items():
        i = pos[s]
        domains[i, :] = 0
        domains[i, v] = 1

    attach: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    pairs = []
    tables: dict = {}
    if isinstance(X.constraint, AxisPairs):
        mats = axis_mats(X)
        for s in order:
            i = pos[s]
            for axis in range(d):
                t = s[:axis] + (s[axis] + 1,) + s[axis + 1 :]
                j = pos.get(t)
                if j is None:
                    continue
                pairs.append((i, j, axis))
                if j > i:
                    attach[j].append((i, 2 * axis + 1))
                else:
                    attach[i].append((j, 2 * axis))
    else:
        mats = np.zeros((1, nsym, nsym), dtype=np.uint8)
        entries = X.constraint.entries
        offs = neighborhood_offsets(d)
        for s in order:
            lv = [pos[s]]
            for o in offs:
                j = pos.get(tuple(a + b for a, b in zip(s, o)))
                if j is None:
                    break
                lv.append(j)
            else:
                tables.setdefault(max(lv), []).append((tuple(lv), entries))

    ptr = np.zeros(n + 1, dtype=np.int32)
    idx, mid = [], []
    for i in range(n):
        for j, m in attach[i]:
            idx.append(j)
            mid.append(m)
        ptr[i + 1] = len(idx)
    prob = CompiledProblem(
        order, len(out_sites), nsym, domains, ptr,
        np.array(idx, dtype=np.int32), np.array(mid, dtype=np.int32), mats, tables, pairs,
    )
    if propagate and pairs:
        arc_consistency(prob, prob.domains)
    return prob


def arc_consistency(prob: CompiledProblem, domains: np.ndarray) -> bool:
    """Prune ``domains`` in place to arc consistency; False if some domain empties."""
    if not prob.pairs:
        return bool(domains.any(axis=1).all())
    mats = prob.mats.astype(bool)
    adj: dict[int, list[tuple[int, np.ndarray]]] = {}
    for i, j, axis in prob.pairs:
        adj.setdefault(i, []).append((j, mats[2 * axis]))
        adj.setdefault(j, []).append((i, mats[2 * axis + 1]))
    dom = domains.astype(bool)
    queue = list(range(len(prob.order)))
    inq = set(queue)
    while queue:
        j = queue.pop()
        inq.discard(j)
        for i, m in adj.get(j, ()):
            # i keeps v iff some w in dom[j] with m[v, w]
            support = (m[:, dom[j]]).any(axis=1)
            new = dom[i] & support
            if not np.array_equal(new, dom[i]):
                dom[i] = new
                if not new.any():
                    domains[:] = dom
                    return False
                if i not in inq:
                    queue.append(i)
                    inq.add(i)
    domains[:] = dom
    return True


def _split_fixed(X: ShiftSpace, F: SiteSet, fixed: Pattern | None) -> dict:
    if fixed is None:
        return {}
    if not fixed.support.issubset(F):
        raise ValueError("fixed pattern must be supported inside F")
    return dict(zip(fixed.support.sites, X.encode(fixed.values)))


def enumerate_array(
    X: ShiftSpace,
    F: SiteSet,
    fixed: Pattern | None = None,
    margin: int = 0,
    cap: int = DEFAULT_CAP,
    max_results: int = 0,
) -> np.ndarray:
    """Symbol-index rows (lexicographic) of the margin-extendable patterns on F."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    fx = _split_fixed(X, F, fixed)
    ext = F.dilate(margin).difference(F).sites if margin else ()
    prob = compile_problem(X, F.sites, ext, fx)
    if not prob.domains.any(axis=1).all():
        return np.zeros((0, len(F)), dtype=np.int16)
    rows, _ = prob.run(cap=cap, max_results=max_results)
    return rows


def enumerate_patterns(
    X: ShiftSpace,
    F: SiteSet,
    fixed: Pattern | None = None,
    margin: int = 0,
    cap: int = DEFAULT_CAP,
) -> list[Pattern]:
    """All patterns on F agreeing with ``fixed`` that extend to F dilated by ``margin``.

    Raises EnumerationCapExceeded when more than ``cap`` patterns exist.
    """
    rows = enumerate_array(X, F, fixed, margin, cap)
    return [Pattern(F, X.decode(r)) for r in rows]


def count_patterns(
    X: ShiftSpace,
    F: SiteSet,
    fixed: Pattern | None = None,
    margin: int = 0,
    cap: int = DEFAULT_CAP,
    method: str = "auto",
) -> int:
    """Number of patterns ``enumerate_patterns`` would return.

    ``method="transfer"`` (boxes, margin 0, axis pairs, d <= 2) multiplies row
    transfer matrices instead of backtracking; "auto" uses it when it applies.
    """
    if method in ("auto", "transfer") and fixed is None and margin == 0:
        n = _transfer_count(X, F)
        if n is not None:
            return n
        if method == "transfer":
            raise ValueError("transfer counting needs a box, margin 0 and axis-pair constraints")
    fx = _split_fixed(X, F, fixed)
    ext = F.dilate(margin).difference(F).sites if margin else ()
    prob = compile_problem(X, F.sites, ext, fx)
    if not prob.domains.any(axis=1).all():
        return 0
    _, count = prob.run(cap=cap, count_only=True)
    return count


def _is_box(F: SiteSet) -> bool:
    if len(F) == 0:
        return False
    lo, hi = F.bounds()
    return len(F) == math.prod(b - a + 1 for a, b in zip(lo, hi))


_MAX_ROW_STATES = 4000


def _transfer_count(X: ShiftSpace, F: SiteSet) -> int | None:
    if not isinstance(X.constraint, AxisPairs) or X.dimension > 2 or not _is_box(F):
        return None
    lo, hi = F.bounds()
    allowed = X.constraint.allowed
    safe = len(F) * math.log2(max(X.size, 2)) < 62
    dtype = np.int64 if safe else object
    if X.dimension == 1:
        A = allowed[0].astype(dtype)
        v = np.ones(X.size, dtype=dtype)
        for _ in range(hi[0] - lo[0]):
            v = A.dot(v)
        return int(v.sum())
    height, width = hi[0] - lo[0] + 1, hi[1] - lo[1] + 1
    rows = [(s,) for s in range(X.size)]
    for _ in range(width - 1):
        rows = [r + (t,) for r in rows for t in range(X.size) if allowed[1][r[-1], t]]
        if len(rows) > _MAX_ROW_STATES:
            return None
    R = np.array(rows, dtype=np.int64)
    T = np.ones((len(rows), len(rows)), dtype=bool)
    for c in range(width):
        T &= allowed[0][R[:, c][:, None], R[:, c][None, :]]
    T = T.astype(dtype)
    v = np.ones(len(rows), dtype=dtype)
    for _ in range(height - 1):
        v = T.dot(v)
    return int(v.sum())


# --- irreducibility --------------------------------------------------------


@dataclass
class IrreducibilityVerdict:
    mode: str
    r: int | None
    verified: bool
    tested: dict
    counterexample: tuple[Pattern, Pattern] | None = None

    @property
    def kind(self) -> str:
        return "verified_up_to" if self.verified else "counterexample"

    def to_json(self) -> dict:
        out = {"verdict": self.kind, "mode": self.mode, "r": self.r, "tested": self.tested}
        if self.counterexample is not None:
            out["counterexample"] = [p.to_json() for p in self.counterexample]
        return out


def _placements(d: int, s: int, r: int) -> list[Site]:
    """Offsets putting a side-s box at sup-distance exactly r from [0, s-1]^d."""
    step = s - 1 + r
    out = [unit_vector(d, a) for a in range(d)]
    out = [tuple(step * c for c in v) for v in out]
    if d > 1:
        out.append((step,) * d)
    return out


def check_irreducibility(
    X: ShiftSpace,
    mode: str = "strongly_irreducible",
    r: int = 1,
    max_window: int = 2,
    margin: int = 1,
    max_pairs: int = 20000,
    max_shift: int = 6,
) -> IrreducibilityVerdict:
    """Falsification search for transitivity or strong irreducibility.

    ``strongly_irreducible``: every pair of margin-extendable patterns on boxes of
    side <= ``max_window`` placed at sup-distance >= r must extend jointly.
    ``transitive``: for each such pair some placement up to ``max_shift`` must work.
    A pass only certifies the tested ranges.
    """
    if mode not in ("strongly_irreducible", "transitive"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "strongly_irreducible" and r < 1:
        raise ValueError("r must be at least 1")
    d = X.dimension
    pairs_tested = 0
    for s in range(1, max_window + 1):
        F = SiteSet.box((0,) * d, (s - 1,) * d)
        A = enumerate_array(X, F, margin=margin)
        if mode == "strongly_irreducible":
            offsets = _placements(d, s, r)
        else:
            offsets = []
            for dist in range(1, max_shift + 1):
                offsets.extend(_placements(d, s, dist))
        jobs = []
        for k in offsets:
            G = F.translate(k)
            hull = _hull(F.union(G)).dilate(margin)
            rest = hull.difference(F).difference(G).sites
            prob = compile_problem(X, list(F.sites) + list(G.sites), rest, propagate=False)
            jobs.append((k, G, prob))
        for a in A:
            for b in A:
                if pairs_tested >= max_pairs:
                    return IrreducibilityVerdict(mode, r, True, {"max_window": s, "pairs": pairs_tested, "margin": margin, "truncated": True})
                pairs_tested += 1
                ok_any = False
                for k, G, prob in jobs:
                    dom = prob.domains.copy()
                    for i, v in enumerate(list(a) + list(b)):
                        dom[i, :] = 0
                        dom[i, v] = 1
                    ok = prob.exists(dom)
                    if mode == "strongly_irreducible" and not ok:
                        return IrreducibilityVerdict(
                            mode, r, False,
                            {"max_window": s, "pairs": pairs_tested, "margin": margin, "offset": list(k)},
                            (Pattern(F, X.decode(a)), Pattern(G, X.decode(b))),
                        )
                    if ok:
                        ok_any = True
                        if mode == "transitive":
                            break
                if mode == "transitive" and not ok_any:
                    return IrreducibilityVerdict(
                        mode, None, False,
                        {"max_window": s, "pairs": pairs_tested, "margin": margin, "max_shift": max_shift},
                        (Pattern(F, X.decode(a)), Pattern(F, X.decode(b))),
                    )
    tested = {"max_window": max_window, "pairs": pairs_tested, "margin": margin, "truncated": False}
    return IrreducibilityVerdict(mode, r if mode == "strongly_irreducible" else None, True, tested)


def _hull(F: SiteSet) -> SiteSet:
    lo, hi = F.bounds()
    return SiteSet.box(lo, hi)
