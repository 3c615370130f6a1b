"""Integer lattices in Hermite normal form and strong-aperiodicity checks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .enumeration import EnumerationCapExceeded, compile_problem, enumerate_array
from .lattice import AxisPairs, Pattern, ShiftSpace, SiteSet, frontier
from .relations import SiteFunction

EXHAUSTIVE_CAP = 10**5


def hermite_normal_form(rows: Iterable[Sequence[int]], k: int) -> tuple[tuple[int, ...], ...]:
    """Row-style HNF of the lattice spanned by ``rows`` (exact integers).

    Pivot columns strictly increase, pivots are positive and the entries above
    each pivot lie in [0, pivot).
    """
    A = [[int(x) for x in r] for r in rows]
    for r in A:
        if len(r) != k:
            raise ValueError(f"vector of length {len(r)} in rank-{k} lattice")
    A = [r for r in A if any(r)]
    top = 0
    pivots = []
    for col in range(k):
        if top >= len(A):
            break
        while True:
            nz = [i for i in range(top, len(A)) if A[i][col] != 0]
            if not nz:
                break
            p = min(nz, key=lambda i: abs(A[i][col]))
            A[top], A[p] = A[p], A[top]
            piv = A[top]
            done = True
            for i in range(top + 1, len(A)):
                if A[i][col]:
                    q = A[i][col] // piv[col]
                    A[i] = [x - q * y for x, y in zip(A[i], piv)]
                    if A[i][col]:
                        done = False
            if done:
                break
        if top < len(A) and A[top][col] != 0:
            if A[top][col] < 0:
                A[top] = [-x for x in A[top]]
            piv = A[top]
            for i in range(top):
                q = A[i][col] // piv[col]
                if q:
                    A[i] = [x - q * y for x, y in zip(A[i], piv)]
            pivots.append(col)
            top += 1
            A = A[:top] + [r for r in A[top:] if any(r)]
    return tuple(tuple(r) for r in A[:top])


@dataclass(frozen=True)
class IntegerLattice:
    """A subgroup of Z^k stored by its canonical HNF basis."""

    ambient: int
    basis: tuple[tuple[int, ...], ...] = ()

    @property
    def rank(self) -> int:
        return len(self.basis)

    def __contains__(self, v) -> bool:
        return lattice_member(self, v)

    def join(self, other: "IntegerLattice") -> "IntegerLattice":
        return span_lattice(list(self.basis) + list(other.basis), self.ambient)

    def issubset(self, other: "IntegerLattice") -> bool:
        return all(lattice_member(other, b) for b in self.basis)

    def scaled(self, m: int) -> "IntegerLattice":
        return span_lattice([[m * x for x in b] for b in self.basis], self.ambient)

    def to_json(self) -> dict:
        return {"ambient": self.ambient, "rank": self.rank, "basis": [list(b) for b in self.basis]}


def span_lattice(vectors: Iterable[Sequence[int]], rank: int | None = None) -> IntegerLattice:
    vecs = [tuple(int(x) for x in v) for v in vectors]
    if rank is None:
        if not vecs:
            raise ValueError("ambient rank needed for an empty generating set")
        rank = len(vecs[0])
    for v in vecs:
        if len(v) != rank:
            raise ValueError(f"rank mismatch: vector {v} in Z^{rank}")
    return IntegerLattice(rank, hermite_normal_form(vecs, rank))


def lattice_member(L: IntegerLattice, v: Sequence[int]) -> bool:
    v = [int(x) for x in v]
    if len(v) != L.ambient:
        raise ValueError("rank mismatch")
    row = 0
    for col in range(L.ambient):
        if row < len(L.basis) and L.basis[row][col] != 0 and all(x == 0 for x in L.basis[row][:col]):
            b = L.basis[row]
            if v[col] % b[col]:
                return False
            q = v[col] // b[col]
            if q:
                v = [x - q * y for x, y in zip(v, b)]
            row += 1
        elif v[col] != 0:
            return False
    return True


def sum_zero_lattice(n: int) -> IntegerLattice:
    return span_lattice([[int(j == i) - int(j == 0) for j in range(n)] for i in range(1, n)], n)


def _counts(rows: np.ndarray, nsym: int) -> np.ndarray:
    out = np.zeros((rows.shape[0], nsym), dtype=np.int64)
    for s in range(nsym):
        out[:, s] = (rows == s).sum(axis=1)
    return out


def _site_matrix(X: ShiftSpace, G: SiteFunction) -> np.ndarray:
    if G.kind != "integer_vector":
        raise ValueError("lattice estimates need an integer-valued site function")
    return np.array([list(G(s)) for s in X.alphabet], dtype=np.int64)  # |S| x k


def _unique_rows(v: np.ndarray) -> np.ndarray:
    v = v[np.any(v != 0, axis=1)]
    return np.unique(v, axis=0) if len(v) else v


# --- configuration sources --------------------------------------------------


def configurations(
    X: ShiftSpace, F: SiteSet, samples: int, seed: int, margin: int = 1, exhaustive_cap: int = EXHAUSTIVE_CAP
) -> tuple[np.ndarray, bool]:
    """Symbol-index rows on F: every pattern when at most ``exhaustive_cap`` exist,
    otherwise ``samples`` heat-bath draws. Returns (rows, exhaustive)."""
    try:
        return enumerate_array(X, F, margin=margin, cap=exhaustive_cap), True
    except EnumerationCapExceeded:
        pass
    from .sampling import sample_configurations

    return sample_configurations(X, F, samples, seed, margin=margin), False


def _region_completions(X: ShiftSpace, F: SiteSet, a: np.ndarray, region: SiteSet, cap: int) -> np.ndarray:
    """All rows over F equal to ``a`` off ``region`` and locally admissible on F."""
    reach = 1 if isinstance(X.constraint, AxisPairs) else 2
    ring = region.dilate(reach).intersection(F).difference(region)
    fixed = {s: int(a[F.index(s)]) for s in ring.sites}
    prob = compile_problem(X, region.sites, ring.sites, fixed)
    if not prob.domains.any(axis=1).all():
        return np.zeros((0, len(F)), dtype=np.int16)
    rows, _ = prob.run(cap=cap)
    out = np.repeat(a[None, :].astype(np.int16), len(rows), axis=0)
    cols = [F.index(s) for s in region.sites]
    out[:, cols] = rows
    return out


def local_modifications(
    X: ShiftSpace, F: SiteSet, a: np.ndarray, radii: Sequence[int] = (0, 1, 2, 3), cap: int = 10**6
) -> Iterator[np.ndarray]:
    """Batches of patterns b in X_F with b = a on the boundary of F.

    Batches change a only inside L1-balls B_1(j, rho) within the interior, for
    rho in ``radii`` and j in lexicographic order, then the whole interior. The
    union over all batches is every such b.
    """
    interior, _ = frontier(F)
    for rho in radii:
        for j in interior.sites:
            region = SiteSet.l1_ball(F.dimension, rho, j).intersection(interior)
            if len(region) == len(interior):
                break
            yield _region_completions(X, F, a, region, cap)
    yield _region_completions(X, F, a, interior, cap)


# --- H_{X,G} ---------------------------------------------------------------


@dataclass
class HEstimate:
    lattice: IntegerLattice
    stabilized: bool
    windows: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"lattice": self.lattice.to_json(), "stabilized": self.stabilized, "windows": self.windows}


def estimate_H(
    X: ShiftSpace,
    G: SiteFunction,
    windows: Sequence[int] = (1, 2),
    samples: int = 40,
    seed: int = 0,
    margin: int = 1,
    exhaustive_cap: int = EXHAUSTIVE_CAP,
) -> HEstimate:
    """Lattice generated by cocycle values of boundary-matching pairs on growing boxes.

    Window n is the box [-n, n]^d. Exhaustive when the box has at most
    ``exhaustive_cap`` patterns, otherwise pairs (a, b) for sampled a and every
    boundary-matching b. The result is cumulative, hence monotone in the window.
    """
    if list(windows) != sorted(set(windows)):
        raise ValueError("windows must increase")
    M = _site_matrix(X, G)
    k = M.shape[1]
    L = IntegerLattice(k)
    history = []
    found_any = False
    prev = None
    stabilized = False
    for n in windows:
        F = SiteSet.cube(X.dimension, n)
        interior, boundary = frontier(F)
        gens = []
        if len(interior):
            rows, exhaustive = configurations(X, F, samples, seed + n, margin, exhaustive_cap)
            if exhaustive:
                bcols = [F.index(s) for s in boundary.sites]
                vals = _counts(rows, X.size) @ M
                groups: dict = {}
                for i, key in enumerate(map(bytes, rows[:, bcols])):
                    groups.setdefault(key, []).append(i)
                for idx in groups.values():
                    if len(idx) > 1:
                        gens.append(vals[idx[1:]] - vals[idx[0]])
            else:
                for a in rows:
                    bs = _region_completions(X, F, a, interior, cap=10**6)
                    gens.append(_counts(bs, X.size) @ M - _counts(a[None, :], X.size) @ M)
        if gens:
            g = _unique_rows(np.concatenate(gens, axis=0))
            if len(g):
                found_any = True
                L = L.join(span_lattice(g.tolist(), k))
        history.append({"n": n, "rank": L.rank, "basis": [list(b) for b in L.basis]})
        if prev is not None and prev == L:
            stabilized = True
        prev = L
    if not found_any and all(len(frontier(SiteSet.cube(X.dimension, n))[0]) == 0 for n in windows):
        raise RuntimeError("no boundary-matching pair found within the budget")
    return HEstimate(L, stabilized, history)


def pushforward_H(pi, H_sharp: IntegerLattice) -> IntegerLattice:
    """Image of ``H_sharp`` under the integer matrix ``pi`` (shape k x |S|)."""
    P = np.asarray(pi, dtype=object)
    if P.ndim != 2 or P.shape[1] != H_sharp.ambient:
        raise ValueError(f"matrix shape {P.shape} does not act on Z^{H_sharp.ambient}")
    images = [[int(sum(int(P[i, j]) * b[j] for j in range(P.shape[1]))) for i in range(P.shape[0])] for b in H_sharp.basis]
    return span_lattice(images, P.shape[0])


# --- condition mho --------------------------------------------------------


@dataclass
class MhoReport:
    window: SiteSet
    tested: int
    exhaustive: bool
    ranks: list
    verdict: str
    H: IntegerLattice
    counterexample: Pattern | None = None

    def to_json(self) -> dict:
        out = {
            "verdict": self.verdict,
            "window": self.window.to_json(),
            "window_size": len(self.window),
            "tested": self.tested,
            "exhaustive": self.exhaustive,
            "ranks": self.ranks,
            "H": self.H.to_json(),
        }
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.to_json()
        return out


def local_lattice(
    X: ShiftSpace, F: SiteSet, a: np.ndarray, G: SiteFunction | None = None, target: IntegerLattice | None = None,
    cap: int = 10**6,
) -> tuple[IntegerLattice, bool]:
    """Lattice generated by Psi_G(a, b) over boundary-matching b in X_F.

    Stops early once ``target`` is reached. Returns (lattice, complete) where
    complete means every b was visited or the target was reached.
    """
    G = G or SiteFunction.sharp(X)
    M = _site_matrix(X, G)
    base = _counts(a[None, :], X.size) @ M
    L = IntegerLattice(M.shape[1])
    try:
        for batch in local_modifications(X, F, a, cap=cap):
            g = _unique_rows(_counts(batch, X.size) @ M - base)
            if len(g):
                L = L.join(span_lattice(g.tolist(), M.shape[1]))
                if target is not None and L == target:
                    return L, True
    except EnumerationCapExceeded:
        return L, False
    return L, True


def check_mho(
    X: ShiftSpace,
    F: SiteSet,
    H_ref: IntegerLattice,
    samples: int = 500,
    seed: int = 0,
    margin: int = 1,
    exhaustive_cap: int = EXHAUSTIVE_CAP,
) -> MhoReport:
    """Check that every tested a in X_F generates H_ref through boundary-matching swaps."""
    interior, _ = frontier(F)
    if len(interior) == 0:
        raise ValueError("condition vacuous: boundary pins everything")
    rows, exhaustive = configurations(X, F, samples, seed, margin, exhaustive_cap)
    ranks = []
    verdict = "holds_on_sample" if not exhaustive else "holds_exhaustively"
    for a in rows:
        L, complete = local_lattice(X, F, a, target=H_ref)
        ranks.append(L.rank)
        if L != H_ref:
            pat = Pattern(F, X.decode(a))
            v = "counterexample" if complete else "inconclusive"
            return MhoReport(F, len(ranks), exhaustive, ranks, v, H_ref, pat)
    return MhoReport(F, len(ranks), exhaustive, ranks, verdict, H_ref)


def mho_holds(report: MhoReport) -> bool:
    return report.verdict in ("holds_on_sample", "holds_exhaustively")


# --- condition maltese ------------------------------------------------------


@dataclass
class MalteseVerdict:
    satisfied: bool
    safe: tuple = ()

    def to_json(self) -> dict:
        return {"verdict": "satisfied" if self.satisfied else "not_found", "Z": list(self.safe)}


def _maltese_axis(allowed, Z: Sequence[int], n: int) -> bool:
    for m in allowed:
        for z in Z:
            # (i): z may replace any symbol next to anything
            if not (m[z, :].all() and m[:, z].all()):
                return False
    # (ii): with Z-neighbours every centre symbol fits
    for m in allowed:
        for z in Z:
            for s in range(n):
                if not (m[z, s] and m[s, z]):
                    return False
    return True


def _maltese_table(entries, Z: Sequence[int], n: int) -> bool:
    Zs = set(Z)
    for e in entries:
        for p in range(len(e)):
            for z in Z:
                if e[:p] + (z,) + e[p + 1 :] not in entries:
                    return False
    zero_nbhds = {e[1:] for e in entries if all(v in Zs for v in e[1:])}
    for nb in zero_nbhds:
        for s in range(n):
            if (s, *nb) not in entries:
                return False
    return True


def check_maltese(X: ShiftSpace) -> MalteseVerdict:
    """Largest safe symbol set Z (ties broken lexicographically), if any."""
    n = X.size
    for size in range(n, 0, -1):
        for Z in itertools.combinations(range(n), size):
            if isinstance(X.constraint, AxisPairs):
                ok = _maltese_axis(X.constraint.allowed, Z, n)
            else:
                ok = _maltese_table(X.constraint.entries, Z, n)
            if ok:
                return MalteseVerdict(True, tuple(X.alphabet[i] for i in Z))
    return MalteseVerdict(False)


# --- strong aperiodicity ---------------------------------------------------


@dataclass
class AperiodicityWitness:
    found: bool
    window: SiteSet | None = None
    pairs: list = field(default_factory=list)
    tested: int = 0

    def to_json(self) -> dict:
        out = {"verdict": "witness" if self.found else "not_found", "tested": self.tested}
        if self.window is not None:
            out["window"] = self.window.to_json()
            out["pairs"] = [[a.to_json(), b.to_json()] for a, b in self.pairs]
        return out


def strong_aperiodicity_witness(
    X: ShiftSpace,
    G: SiteFunction,
    K: IntegerLattice,
    H: IntegerLattice | None = None,
    windows: Sequence[int] = (1, 2, 3),
    samples: int = 100,
    seed: int = 0,
    margin: int = 1,
) -> AperiodicityWitness:
    """Find a box F and, for every tested a in X_F, some b with Psi_G(b, a) outside K."""
    if H is None:
        H = estimate_H(X, G, seed=seed, margin=margin).lattice
    if K.ambient != H.ambient or not K.issubset(H) or K == H:
        raise ValueError("no proper subgroup given")
    M = _site_matrix(X, G)
    tested = 0
    for n in windows:
        F = SiteSet.cube(X.dimension, n)
        if len(frontier(F)[0]) == 0:
            continue
        rows, _ = configurations(X, F, samples, seed + n, margin)
        pairs = []
        for a in rows:
            tested += 1
            base = _counts(a[None, :], X.size) @ M
            hit = None
            for batch in local_modifications(X, F, a):
                vals = base - _counts(batch, X.size) @ M  # Psi_G(b, a)
                for i, v in enumerate(vals):
                    if not lattice_member(K, v.tolist()):
                        hit = batch[i]
                        break
                if hit is not None:
                    break
            if hit is None:
                break
            pairs.append((Pattern(F, X.decode(a)), Pattern(F, X.decode(hit))))
        else:
            return AperiodicityWitness(True, F, pairs, tested)
    return AperiodicityWitness(False, tested=tested)
