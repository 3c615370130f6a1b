"""One-dimensional transfer matrices, Parry and Gibbs-Markov measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .lattice import Pattern, ShiftSpace

RESIDUAL_TOL = 1e-13
MAX_BLOCK_SYMBOLS = 10**4


class NotIrreducible(ValueError):
    def __init__(self, classes):
        self.classes = classes
        super().__init__(f"transition matrix is reducible; communicating classes {classes}")


class NotPrimitive(ValueError):
    pass


def _bool_power(A: np.ndarray, k: int) -> np.ndarray:
    result = np.eye(len(A), dtype=bool)
    base = A.astype(bool)
    while k:
        if k & 1:
            result = (result.astype(np.int64) @ base.astype(np.int64)) > 0
        base = (base.astype(np.int64) @ base.astype(np.int64)) > 0
        k >>= 1
    return result


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """0/1 matrix with A[s, t] = 1 iff the word st is allowed."""

    A: np.ndarray
    alphabet: tuple = ()

    def __post_init__(self):
        A = np.asarray(self.A).astype(np.uint8)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("transition matrix must be square")
        object.__setattr__(self, "A", A)
        if not self.alphabet:
            object.__setattr__(self, "alphabet", tuple(range(len(A))))
        elif len(self.alphabet) != len(A):
            raise ValueError("alphabet size does not match the matrix")

    @classmethod
    def of(cls, X: ShiftSpace) -> "TransitionMatrix":
        if X.dimension != 1 or not X.is_axis_pairs:
            raise ValueError("need a one-dimensional axis-pairs shift space")
        return cls(X.constraint.allowed[0], tuple(X.alphabet))

    @property
    def n(self) -> int:
        return len(self.A)

    @cached_property
    def irreducible(self) -> bool:
        # (I + A)^(n-1) > 0
        return bool(_bool_power(np.eye(self.n, dtype=bool) | self.A.astype(bool), max(self.n - 1, 1)).all())

    @cached_property
    def primitive(self) -> bool:
        # Wielandt: primitive iff A^((n-1)^2 + 1) > 0
        return bool(_bool_power(self.A, (self.n - 1) ** 2 + 1).all())

    def communicating_classes(self) -> list[list]:
        k, labels = connected_components(self.A, directed=True, connection="strong")
        return [[self.alphabet[i] for i in range(self.n) if labels[i] == c] for c in range(k)]


def periodic_decomposition(T: TransitionMatrix) -> tuple[int, list[list]]:
    """Period N and the cyclically ordered classes X_0, ..., X_{N-1}."""
    if not T.irreducible:
        raise NotIrreducible(T.communicating_classes())
    level = [-1] * T.n
    level[0] = 0
    queue = [0]
    for u in queue:
        for v in np.flatnonzero(T.A[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(int(v))
    N = 0
    for u in range(T.n):
        for v in np.flatnonzero(T.A[u]):
            N = math.gcd(N, level[u] + 1 - level[v])
    N = abs(N) or 1
    classes = [[T.alphabet[i] for i in range(T.n) if level[i] % N == k] for k in range(N)]
    return N, classes


def _perron(M: np.ndarray, max_iter: int = 10**6) -> tuple[float, np.ndarray]:
    """Perron root and positive eigenvector by power iteration from the uniform vector.

    Stops once the relative residual is below RESIDUAL_TOL, then keeps
    iterating while the residual still shrinks, down to rounding level.
    """
    v = np.full(len(M), 1.0 / len(M))
    best = np.inf
    converged = False
    for _ in range(max_iter):
        w = M @ v
        lam = w.sum() / v.sum()
        w /= w.sum()
        res = np.abs(M @ w - lam * w).max() / (lam * np.abs(w).max())
        if converged and res >= best:
            break
        v = w
        best = min(best, res)
        if res <= RESIDUAL_TOL:
            converged = True
    else:
        if not converged:
            raise RuntimeError("power iteration did not converge")
    return float((M @ v).sum() / v.sum()), v


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    alphabet: tuple
    p: np.ndarray
    P: np.ndarray
    A: np.ndarray
    lam: float
    v: np.ndarray
    u: np.ndarray
    phi: np.ndarray | None = None

    @property
    def entropy(self) -> float:
        return entropy_pressure(self)[0]

    @cached_property
    def _index(self) -> dict:
        return {s: i for i, s in enumerate(self.alphabet)}

    @cached_property
    def _logP(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.P)

    def log_prob_indices(self, rows: np.ndarray) -> np.ndarray:
        """log mu of contiguous words given as symbol-index rows."""
        rows = np.asarray(rows)
        with np.errstate(divide="ignore"):
            out = np.log(self.p[rows[:, 0]])
        for i in range(1, rows.shape[1]):
            out = out + self._logP[rows[:, i - 1], rows[:, i]]
        return out

    def prob(self, pattern: Pattern) -> float:
        """Cylinder probability; the support may have gaps."""
        if len(pattern) == 0:
            return 1.0
        if pattern.dimension != 1:
            raise ValueError("one-dimensional patterns only")
        idx = []
        for v in pattern.values:
            if v not in self._index:
                return 0.0
            idx.append(self._index[v])
        pos = [s[0] for s in pattern.support.sites]
        out = float(self.p[idx[0]])
        for i in range(1, len(idx)):
            gap = pos[i] - pos[i - 1]
            step = self.P if gap == 1 else np.linalg.matrix_power(self.P, gap)
            out *= float(step[idx[i - 1], idx[i]])
        return out

    def sample(self, length: int, rng: np.random.Generator) -> np.ndarray:
        """Stationary path of symbol indices."""
        cum = np.cumsum(self.P, axis=1)
        cum[:, -1] = 1.0
        u = rng.random(length)
        out = np.empty(length, dtype=np.int16)
        s = int(np.searchsorted(np.cumsum(self.p), u[0], side="right"))
        s = min(s, len(self.p) - 1)
        out[0] = s
        cl = cum.tolist()
        for i in range(1, length):
            row = cl[s]
            x = u[i]
            s = 0
            while x >= row[s]:
                s += 1
            out[i] = s
        return out

    def to_json(self) -> dict:
        return {
            "alphabet": list(self.alphabet),
            "lambda": self.lam,
            "entropy": self.entropy,
            "stationary": self.p.tolist(),
            "kernel": self.P.tolist(),
            "potential": None if self.phi is None else self.phi.tolist(),
        }


def _as_matrix(A) -> TransitionMatrix:
    if isinstance(A, TransitionMatrix):
        return A
    if isinstance(A, ShiftSpace):
        return TransitionMatrix.of(A)
    return TransitionMatrix(np.asarray(A))


def gibbs_markov(A, phi: Sequence[float] | None = None) -> MarkovMeasure:
    """Markov measure of the twisted matrix M[s, t] = A[s, t] exp(phi(t))."""
    T = _as_matrix(A)
    if not T.primitive:
        raise NotPrimitive("transition matrix is not primitive; use periodic_decomposition")
    ph = np.zeros(T.n) if phi is None else np.asarray(phi, dtype=float)
    if ph.shape != (T.n,):
        raise ValueError(f"potential needs {T.n} values")
    M = T.A.astype(float) * np.exp(ph)[None, :]
    lam, v = _perron(M)
    _, u = _perron(M.T)
    P = M * v[None, :] / (lam * v[:, None])
    p = u * v / (u @ v)
    return MarkovMeasure(T.alphabet, p, P, T.A, lam, v, u, None if phi is None else ph)


def parry_measure(A) -> MarkovMeasure:
    """Measure of maximal entropy; the phi = 0 case of gibbs_markov."""
    return gibbs_markov(A, None)


def cylinder_prob(mu: MarkovMeasure, word) -> float:
    if not isinstance(word, Pattern):
        word = Pattern.word(list(word)) if len(word) else Pattern.empty(1)
    return mu.prob(word)


def admissible_words(A: np.ndarray, length: int) -> np.ndarray:
    """All admissible words of the given length as index rows (lexicographic)."""
    n = len(A)
    rows = np.arange(n, dtype=np.int16)[:, None]
    if length <= 0:
        return np.zeros((1, 0), dtype=np.int16)
    for _ in range(length - 1):
        last = rows[:, -1]
        parts = [np.column_stack([rows[A[last, t] == 1], np.full(int((A[last, t] == 1).sum()), t, np.int16)]) for t in range(n)]
        rows = np.concatenate(parts, axis=0)
        rows = rows[np.lexsort(rows.T[::-1])]
    return rows


def _grouped_spread(rows: np.ndarray, values: np.ndarray) -> float:
    if rows.shape[1] == 0:
        return 0.0
    keys = rows[:, 0].astype(np.int64) * 100000 + rows[:, -1]
    order = np.lexsort((values, keys))
    k, v = keys[order], values[order]
    starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
    ends = np.r_[starts[1:], len(k)] - 1
    return float((v[ends] - v[starts]).max()) if len(starts) else 0.0


def uniform_specification_check(mu: MarkovMeasure, L: int) -> float:
    """Max |mu[a]/mu[b] - 1| over same-endpoint admissible words of equal length <= L."""
    worst = 0.0
    for n in range(1, L + 1):
        rows = admissible_words(mu.A, n)
        probs = np.exp(mu.log_prob_indices(rows))
        keys = rows[:, 0].astype(np.int64) * 100000 + rows[:, -1]
        for key in np.unique(keys):
            g = probs[keys == key]
            worst = max(worst, float(g.max() / g.min() - 1.0))
    return worst


def conformality_check_1d(mu: MarkovMeasure, L: int, phi: Sequence[float] | None = None) -> float:
    """Max |log(mu[b]/mu[a]) - sum_j (phi(b_j) - phi(a_j))| over same-endpoint pairs."""
    ph = np.asarray(phi if phi is not None else (mu.phi if mu.phi is not None else np.zeros(len(mu.p))), float)
    worst = 0.0
    for n in range(1, L + 1):
        rows = admissible_words(mu.A, n)
        r = mu.log_prob_indices(rows) - ph[rows].sum(axis=1)
        worst = max(worst, _grouped_spread(rows, r))
    return worst


def entropy_pressure(mu: MarkovMeasure, phi: Sequence[float] | None = None) -> tuple[float, float]:
    P = mu.P
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    h = float(-(mu.p * terms.sum(axis=1)).sum())
    ph = np.zeros(len(mu.p)) if phi is None else np.asarray(phi, float)
    return h, h + float(mu.p @ ph)


def markov_from_kernel(A, P: np.ndarray) -> MarkovMeasure:
    """Stationary Markov measure of an arbitrary stochastic kernel supported on A."""
    T = _as_matrix(A)
    P = np.asarray(P, float)
    if np.any((P > 0) & (T.A == 0)):
        raise ValueError("kernel charges a forbidden transition")
    w, V = np.linalg.eig(P.T)
    p = np.real(V[:, np.argmin(np.abs(w - 1))])
    p = p / p.sum()
    return MarkovMeasure(T.alphabet, p, P, T.A, float("nan"), np.ones(T.n), p)


# --- block recoding ----------------------------------------------------------


@dataclass
class BlockTarget:
    """T^N Gibbs-Markov measure on the N-blocks of one periodic class."""

    period: int
    blocks: np.ndarray
    measure: MarkovMeasure
    block_G: np.ndarray
    H: np.ndarray
    conformality_deviation: float = float("nan")
    kernel_deviation: float = float("nan")
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "period": self.period,
            "blocks": len(self.blocks),
            "lambda": self.measure.lam,
            "conformality_deviation": self.conformality_deviation,
            "kernel_deviation": self.kernel_deviation,
        }


def block_matrix(T: TransitionMatrix, N: int, start: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Admissible N-blocks whose first symbol lies in ``start``, and their adjacency."""
    rows = admissible_words(T.A, N)
    rows = rows[np.isin(rows[:, 0], list(start))]
    if len(rows) > MAX_BLOCK_SYMBOLS:
        raise ValueError(f"{len(rows)} blocks exceed the cap of {MAX_BLOCK_SYMBOLS}")
    B = T.A[rows[:, -1][:, None], rows[:, 0][None, :]]
    return rows, B


def block_target(A, G: np.ndarray, H: Sequence[float], L: int = 4, N: int | None = None) -> BlockTarget:
    """Gibbs-Markov measure for T^N on class X_0 with potential H . G_N on N-blocks.

    ``G`` is an integer |S| x k matrix (row s is G(s)); ``H`` a real vector of
    length k standing for a homomorphism Z^k -> R. Checks conformality for
    e^{H . Psi_G} on same-endpoint block words, and that pairs with equal
    Psi_G have equal mass.
    """
    T = _as_matrix(A)
    period, classes = periodic_decomposition(T)
    N = N or period
    if N % period:
        raise ValueError("block length must be a multiple of the period")
    start = [T.alphabet.index(s) for s in classes[0]]
    G = np.asarray(G, dtype=np.int64)
    H = np.asarray(H, dtype=float)
    blocks, B = block_matrix(T, N, start)
    bG = G[blocks].sum(axis=1)  # G_N on each block, shape (#blocks, k)
    phi = bG @ H
    mu = gibbs_markov(TransitionMatrix(B), phi)
    dev = conformality_check_1d(mu, L)
    kdev = 0.0
    for n in range(1, L + 1):
        rows = admissible_words(mu.A, n)
        lp = mu.log_prob_indices(rows)
        psi = bG[rows].sum(axis=1)
        keys = [(int(r[0]), int(r[-1]), *map(int, g)) for r, g in zip(rows, psi)]
        groups: dict = {}
        for key, val in zip(keys, lp):
            groups.setdefault(key, []).append(val)
        for vals in groups.values():
            kdev = max(kdev, max(vals) - min(vals))
    return BlockTarget(N, blocks, mu, bG, H, dev, kdev, {"classes": classes})
