"""Free Z-products, driver measures and correlation spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .lattice import AxisPairs, Pattern, ShiftSpace, SiteSet, axis_pairs_space
from .onedim import MarkovMeasure, gibbs_markov

LABELS = {
    "point_mass": "strongly_mixing",
    "bernoulli": "strongly_mixing",
    "periodic": "not_totally_ergodic",
    "sturmian": "totally_ergodic_not_weakly_mixing",
    "chacon": "weakly_mixing_not_strongly_mixing",
}

MILD_MIXING_NOTE = "mild mixing is not decidable from finite correlation data; the label is taken from the literature"


# --- free products -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FreeProduct:
    """Independent copies of a Z^d shift stacked along a new last axis."""

    base: ShiftSpace

    @property
    def dimension(self) -> int:
        return self.base.dimension + 1

    @property
    def space(self) -> ShiftSpace:
        if not isinstance(self.base.constraint, AxisPairs):
            raise ValueError("free products are built for axis-pair bases")
        n = self.base.size
        mats = list(self.base.constraint.allowed) + [np.ones((n, n), bool)]
        return axis_pairs_space(self.dimension, self.base.alphabet, mats, f"free_product({self.base.name})")

    def layer(self, pattern: Pattern, n: int) -> Pattern:
        """Slice at last coordinate n, as a base pattern."""
        vals = {s[:-1]: v for s, v in pattern.items() if s[-1] == n}
        if not vals:
            return Pattern.empty(self.base.dimension)
        return Pattern.from_dict(vals, self.base.dimension)

    def layers(self, pattern: Pattern) -> list[int]:
        return sorted({s[-1] for s in pattern.support.sites})

    def stack(self, slices: Mapping[int, Pattern]) -> Pattern:
        vals = {}
        for n, p in slices.items():
            for s, v in p.items():
                vals[(*s, n)] = v
        return Pattern.from_dict(vals, self.dimension)


def free_product(X: ShiftSpace) -> FreeProduct:
    return FreeProduct(X)


# --- drivers -------------------------------------------------------------------------


@dataclass(frozen=True)
class DriverMeasure:
    """A shift-invariant measure on {-1, +1}^Z selecting the layer measures."""

    kind: str
    sign: int = 1
    word: tuple = ()
    alpha: float = 0.0
    q: float = 0.5

    def __post_init__(self):
        if self.kind not in LABELS:
            raise ValueError(f"unknown driver kind {self.kind!r}")
        if self.kind == "periodic" and not self.word:
            raise ValueError("periodic driver needs a word")
        if self.kind == "sturmian" and not 0 < self.alpha < 1:
            raise ValueError("rotation number must lie in (0, 1)")
        if self.kind == "bernoulli" and not 0 <= self.q <= 1:
            raise ValueError("q must lie in [0, 1]")

    @property
    def label(self) -> str:
        return LABELS[self.kind]

    @property
    def literature(self) -> bool:
        return True

    @property
    def plus_frequency(self) -> float:
        """nu(eta_0 = +1)."""
        if self.kind == "point_mass":
            return 1.0 if self.sign > 0 else 0.0
        if self.kind == "periodic":
            return sum(1 for w in self.word if w > 0) / len(self.word)
        if self.kind == "sturmian":
            return 1.0 - self.alpha
        if self.kind == "chacon":
            return 2.0 / 3.0
        return self.q

    def describe(self) -> dict:
        out = {"kind": self.kind, "label": self.label, "label_source": "literature"}
        if self.kind == "point_mass":
            out["sign"] = self.sign
        elif self.kind == "periodic":
            out["word"] = "".join("+" if w > 0 else "-" for w in self.word)
        elif self.kind == "sturmian":
            out["alpha"] = self.alpha
        elif self.kind == "bernoulli":
            out["q"] = self.q
        return out


def parse_driver(text: str) -> DriverMeasure:
    """``point_mass:+``, ``periodic:+-``, ``sturmian:0.618``, ``chacon`` or ``bernoulli:0.5``."""
    kind, _, arg = text.partition(":")
    if kind == "point_mass":
        return DriverMeasure(kind, sign=-1 if arg.strip() == "-" else 1)
    if kind == "periodic":
        word = tuple(1 if c == "+" else -1 for c in (arg or "+-") if c in "+-")
        return DriverMeasure(kind, word=word)
    if kind == "sturmian":
        return DriverMeasure(kind, alpha=float(arg) if arg else (math.sqrt(5) - 1) / 2)
    if kind == "bernoulli":
        return DriverMeasure(kind, q=float(arg) if arg else 0.5)
    return DriverMeasure(kind)


@lru_cache(maxsize=4)
def chacon_word(min_length: int) -> np.ndarray:
    """Prefix of the fixed point of 0 -> 0010, 1 -> 1, as 0/1 bytes."""
    w = np.zeros(1, dtype=np.int8)
    one = np.ones(1, dtype=np.int8)
    while len(w) < min_length:
        w = np.concatenate([w, w, one, w])
    return w


CHACON_LENGTH = 3**13


def driver_sample(nu: DriverMeasure, L: int, seed: int | np.random.Generator) -> np.ndarray:
    """A +-1 sequence of length L drawn from nu."""
    if L < 1:
        raise ValueError("length must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if nu.kind == "point_mass":
        return np.full(L, nu.sign, dtype=np.int8)
    if nu.kind == "periodic":
        w = np.array(nu.word, dtype=np.int8)
        start = int(rng.integers(len(w)))
        return np.resize(np.roll(w, -start), L)
    if nu.kind == "sturmian":
        theta = rng.random()
        x = np.mod(np.arange(L) * nu.alpha + theta, 1.0)
        return np.where(x < nu.alpha, -1, 1).astype(np.int8)
    if nu.kind == "chacon":
        w = chacon_word(max(CHACON_LENGTH, 4 * L))
        start = int(rng.integers(len(w) - L + 1))
        return (1 - 2 * w[start : start + L]).astype(np.int8)
    return np.where(rng.random(L) < nu.q, 1, -1).astype(np.int8)


def chacon_correlation_oracle(K: int, length: int = 3**13) -> np.ndarray:
    """C(k), k = 0..K, of the +-coded Chacon word, computed along one long prefix."""
    x = 1.0 - 2.0 * chacon_word(length)[:length]
    m = x.mean()
    return np.array([np.mean(x[: length - k] * x[k:]) - m * m for k in range(K + 1)])


# --- product fields --------------------------------------------------------------------


LayerSampler = Callable[[np.random.Generator, SiteSet], np.ndarray]


def markov_layer_sampler(mu: MarkovMeasure) -> LayerSampler:
    """Exact sampler of a 1D Markov measure on an interval window (symbol indices)."""

    def draw(rng: np.random.Generator, window: SiteSet) -> np.ndarray:
        lo, hi = window.bounds()
        path = mu.sample(hi[0] - lo[0] + 1, rng)
        return path[[s[0] - lo[0] for s in window.sites]]

    return draw


def product_field_sample(
    fp: FreeProduct,
    layer_samplers: Mapping[int, LayerSampler],
    eta: Sequence[int],
    window: SiteSet,
    seed: int | np.random.Generator,
) -> Pattern:
    """Layers drawn independently, layer n from the sampler of sign eta[n]."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo, hi = window.bounds()
    if lo[-1] < 0 or hi[-1] >= len(eta):
        raise ValueError(f"window layers {lo[-1]}..{hi[-1]} exceed the driver path of length {len(eta)}")
    vals = {}
    for n in range(lo[-1], hi[-1] + 1):
        sites = [s[:-1] for s in window.sites if s[-1] == n]
        if not sites:
            continue
        base_win = SiteSet.of(sites, fp.base.dimension)
        draw = layer_samplers[int(np.sign(eta[n]))]
        idx = draw(rng, base_win)
        for s, i in zip(base_win.sites, idx):
            vals[(*s, n)] = fp.base.alphabet[int(i)]
    return Pattern.from_dict(vals, fp.dimension)


@dataclass
class ProductFieldMeasure:
    """Cylinder evaluator for prod_n P_{eta_n} over layers with 1D Markov layer measures."""

    fp: FreeProduct
    layers: Mapping[int, MarkovMeasure]
    eta: Sequence[int]

    @property
    def alphabet(self) -> tuple:
        return tuple(self.fp.base.alphabet)

    def prob(self, pattern: Pattern) -> float:
        out = 1.0
        for n in self.fp.layers(pattern):
            if not 0 <= n < len(self.eta):
                raise ValueError("layer outside the driver path")
            out *= self.layers[int(np.sign(self.eta[n]))].prob(self.fp.layer(pattern, n))
        return out


def base_layer_measures(base: ShiftSpace, h: float = 1.5) -> dict[int, MarkovMeasure]:
    """P_+ and P_- on a 1D base: Gibbs-Markov measures favouring (+) or disfavouring (-) the top symbol."""
    phi = np.zeros(base.size)
    phi[-1] = h
    return {1: gibbs_markov(base, phi), -1: gibbs_markov(base, -phi)}


# --- correlations ---------------------------------------------------------------------


@dataclass
class CorrelationSeries:
    lags: np.ndarray
    C: np.ndarray
    stderr: np.ndarray
    observable: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return int(self.lags[-1])

    def to_rows(self) -> list[tuple]:
        return [(int(k), float(c), float(e)) for k, c, e in zip(self.lags, self.C, self.stderr)]

    def to_json(self) -> dict:
        return {
            "observable": self.observable,
            "lags": self.lags.tolist(),
            "C": self.C.tolist(),
            "stderr": self.stderr.tolist(),
        }


Sampler = Callable[[np.random.Generator, int], np.ndarray]


def correlation_series(
    sampler: Sampler,
    K: int,
    replicas: int,
    seed: int,
    length: int | None = None,
    batches: int = 32,
    observable: dict | None = None,
    positions: int | None = None,
) -> CorrelationSeries:
    """Estimates of E[f f o T_k] - E[f]^2 for k = 0..K with batch-means errors.

    ``sampler(rng, n)`` returns the observable along the axis at n consecutive
    positions. Each replica averages products over its first ``positions``
    positions (all n - K by default; 1 gives the plain origin estimator).
    Batches of replicas give the error bar. Products are centred by the global
    mean, so replica-to-replica variation of the mean (a mixture over drivers)
    stays in C.
    """
    if positions is not None:
        n = K + positions
    else:
        n = length or 4 * K
    if n <= K:
        raise ValueError("window must be longer than the largest lag")
    batches = max(2, min(batches, replicas))
    rng = np.random.default_rng(seed)
    prods = np.zeros((replicas, K + 1))
    means = np.zeros(replicas)
    for r in range(replicas):
        y = np.asarray(sampler(rng, n), dtype=float)
        m = n - K
        means[r] = y[:m].mean()
        prods[r] = [np.dot(y[:m], y[k : k + m]) / m for k in range(K + 1)]
    mu = means.mean()
    per = prods - mu * mu
    groups = np.array_split(np.arange(replicas), batches)
    bm = np.array([per[g].mean(axis=0) for g in groups])
    C = bm.mean(axis=0)
    se = bm.std(axis=0, ddof=1) / math.sqrt(len(groups))
    return CorrelationSeries(np.arange(K + 1), C, se, observable or {})


def driver_observable(nu: DriverMeasure) -> Sampler:
    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        return driver_sample(nu, n, rng).astype(float)

    return draw


def field_axis_sampler(
    fp: FreeProduct,
    layer_measures: Mapping[int, MarkovMeasure],
    nu: DriverMeasure,
    axis: str,
    f: np.ndarray,
) -> Sampler:
    """Observable f(x_site) read along the ``vertical`` (layer) or ``horizontal`` axis.

    ``f`` holds one value per base symbol. Vertical positions are the origin
    of successive layers; horizontal positions run along the first base axis
    inside layer 0.
    """
    if fp.base.dimension != 1:
        raise ValueError("exact layer sampling is implemented for one-dimensional bases")
    f = np.asarray(f, dtype=float)
    samplers = {s: markov_layer_sampler(m) for s, m in layer_measures.items()}

    def vertical(rng: np.random.Generator, n: int) -> np.ndarray:
        eta = driver_sample(nu, n, rng)
        origin = SiteSet(1, ((0,),))
        return np.array([f[samplers[int(e)](rng, origin)[0]] for e in eta])

    def horizontal(rng: np.random.Generator, n: int) -> np.ndarray:
        eta0 = int(driver_sample(nu, 1, rng)[0])
        return f[samplers[eta0](rng, SiteSet.interval(0, n))]

    if axis == "vertical":
        return vertical
    if axis == "horizontal":
        return horizontal
    raise ValueError("axis must be vertical or horizontal")


def mixture_limit(layer_measures: Mapping[int, MarkovMeasure], nu: DriverMeasure, f: np.ndarray) -> float:
    """Horizontal-lag limit of the covariance: int P_eta(f) P_eta(f) dnu - P_nu(f)^2."""
    f = np.asarray(f, float)
    q = nu.plus_frequency
    mp = float(layer_measures[1].p @ f)
    mm = float(layer_measures[-1].p @ f)
    return q * mp * mp + (1 - q) * mm * mm - (q * mp + (1 - q) * mm) ** 2


def tail_mean(series: CorrelationSeries, start: int | None = None) -> tuple[float, float]:
    """Mean of C(k) over k >= start (default K/2) and its standard error."""
    start = series.K // 2 if start is None else start
    sel = series.lags >= start
    return float(series.C[sel].mean()), float(series.stderr[sel].mean())


# --- spectra -----------------------------------------------------------------------------


@dataclass
class Periodogram:
    freqs: np.ndarray
    power: np.ndarray
    peaks: list
    floor: float

    def to_rows(self) -> list[tuple]:
        return [(float(f), float(p)) for f, p in zip(self.freqs, self.power)]

    def to_json(self) -> dict:
        return {"peaks": self.peaks, "noise_floor": self.floor}


def periodogram_peaks(series: CorrelationSeries, top: int = 5, halfwidth: int = 2) -> Periodogram:
    """Lag-windowed spectral estimate of C on frequencies j / (2K) in [0, 1/2].

    C is tapered by the Bartlett window (1 - k/K), symmetrised circularly over
    2K points and transformed; negative values (noise) are clipped. A peak's
    power fraction is the mass within ``halfwidth`` bins of it.
    """
    K = series.K
    if K + 1 < 32:
        raise ValueError("series length must be at least 32")
    w = 1.0 - series.lags / K
    c = series.C * w
    s = np.zeros(2 * K)
    s[: K + 1] = c
    s[K + 1 :] = c[1:K][::-1]
    spec = np.clip(np.real(np.fft.fft(s))[: K + 1], 0.0, None)
    freqs = np.arange(K + 1) / (2 * K)
    # noise of the transform: independent lag errors, each used twice
    e = series.stderr * w
    floor = 3.0 * math.sqrt(e[0] ** 2 + 4.0 * float((e[1:] ** 2).sum()))
    total = spec.sum()
    peaks = []
    taken = np.zeros(K + 1, bool)
    for j in np.argsort(-spec, kind="stable"):
        if len(peaks) >= top or spec[j] <= 0:
            break
        if taken[j]:
            continue
        lo, hi = max(0, j - halfwidth), min(K, j + halfwidth)
        frac = float(spec[lo : hi + 1].sum() / total) if total > 0 else 0.0
        peaks.append({"frequency": float(freqs[j]), "power": float(spec[j]), "fraction": frac})
        taken[lo : hi + 1] = True
    return Periodogram(freqs, spec, peaks, floor)


def fold(freq: float) -> float:
    x = freq % 1.0
    return min(x, 1.0 - x)


@dataclass
class Classification:
    verdict: str
    frequency: float | None
    stats: dict
    driver: dict | None = None

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "stats": self.stats, "mild_mixing": MILD_MIXING_NOTE}
        if self.frequency is not None:
            out["frequency"] = self.frequency
        if self.driver is not None:
            out["driver"] = self.driver
        return out


def classify_empirical(series: CorrelationSeries, driver: DriverMeasure | None = None, k0: int = 1) -> Classification:
    """eigenvalue_detected, plain_decay, cesaro_decay or inconclusive, at a 3-sigma noise floor."""
    pg = periodogram_peaks(series)
    lag = series.lags >= max(k0, 1)
    absC = np.abs(series.C[lag])
    se = series.stderr[lag]
    mean_se = float(se.mean())
    cesaro = float(absC.mean())
    stats = {
        "cesaro_mean_abs": cesaro,
        "max_abs": float(absC.max()),
        "mean_stderr": mean_se,
        "exceed_3sigma": int((absC >= 3 * se).sum()),
        "top_peak": pg.peaks[0] if pg.peaks else None,
        "noise_floor": pg.floor,
    }
    drv = driver.describe() if driver is not None else None
    if pg.peaks:
        top = pg.peaks[0]
        if top["fraction"] >= 0.5 and top["power"] > pg.floor and top["frequency"] > 0:
            return Classification("eigenvalue_detected", top["frequency"], stats, drv)
    if np.all(absC < 3 * se):
        return Classification("plain_decay", None, stats, drv)
    if cesaro < 3 * mean_se and absC.max() >= 3 * mean_se:
        return Classification("cesaro_decay", None, stats, drv)
    return Classification("inconclusive", None, stats, drv)
