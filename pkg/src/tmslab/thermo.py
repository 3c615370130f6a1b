"""Finite-volume Gibbs measures, Glauber sampling, entropy and phase probes."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .aperiodicity import check_maltese
from .enumeration import EnumerationCapExceeded, compile_problem, count_patterns
from .lattice import Pattern, ShiftSpace, SiteSet, frontier
from .models import Model, beach_symbol, builtin, observable_values
from .potentials import LocalPotential, zero_potential
from .sampling import FrozenSiteError, build_chain

EXACT_CAP = 10**6


class ExactTableTooLarge(EnumerationCapExceeded):
    def __str__(self):
        return f"{super().__str__()}; use glauber_sample for this volume"

__all__ = [
    "FrozenSiteError",
    "FiniteVolumeGibbs",
    "finite_volume_measure",
    "conformality_check_fv",
    "glauber_sample",
    "box_entropy_scan",
    "empirical_pressure",
    "thermo_limit_scan",
    "phase_probe",
]


# --- boundary conditions -----------------------------------------------------


def collar_sites(volume: SiteSet) -> SiteSet:
    return volume.dilate(1).difference(volume)


def rule_symbol(X: ShiftSpace, rule: str):
    """Symbol used to fill a collar under ``rule``: plus, minus, zero or constant:<s>."""
    alph = X.alphabet
    if rule.startswith("constant:"):
        raw = rule.split(":", 1)[1]
        for s in alph:
            if str(s) == raw:
                return s
        raise ValueError(f"symbol {raw!r} not in the alphabet")
    if X.name == "beach":
        a0 = X.params["A0"]
        picks = {"plus": beach_symbol(a0, 0), "minus": beach_symbol(a0, 1), "zero": beach_symbol(0, 0)}
        if X.params["A1"] == 0:
            picks["plus"], picks["minus"] = beach_symbol(0, 0), beach_symbol(0, min(1, X.params["B"] - 1))
        return picks[rule]
    defaults = {"plus": (1, -1), "minus": (-1, 0), "zero": (0, 0)}
    if rule not in defaults:
        raise ValueError(f"unknown boundary rule {rule!r}")
    want, fallback = defaults[rule]
    if want in alph:
        return want
    return alph[-1] if rule == "plus" else alph[fallback]


def collar_pattern(X: ShiftSpace, volume: SiteSet, rule) -> Pattern | None:
    """The boundary condition on the collar; ``free`` gives no collar."""
    if isinstance(rule, Pattern):
        return rule
    if rule in (None, "free"):
        return None
    ring = collar_sites(volume)
    s = rule_symbol(X, rule)
    return Pattern(ring, (s,) * len(ring))


# --- energies ----------------------------------------------------------------


def window_list(G: LocalPotential, sites: SiteSet) -> list[tuple]:
    """Anchors j with j + footprint inside ``sites``, as tuples of sites."""
    members = set(sites.sites)
    anchors = {tuple(a - b for a, b in zip(s, off)) for s in sites.sites for off in G.footprint}
    out = []
    for j in sorted(anchors):
        w = tuple(tuple(a + b for a, b in zip(j, off)) for off in G.footprint)
        if all(t in members for t in w):
            out.append(w)
    return out


def energies(X: ShiftSpace, G: LocalPotential, volume: SiteSet, rows: np.ndarray, collar: Pattern | None = None,
             within: SiteSet | None = None) -> np.ndarray:
    """Sum of G over windows inside volume u collar (or inside ``within``) for each row."""
    if G.is_zero:
        return np.zeros(len(rows))
    cvals = {}
    if collar is not None:
        cvals = dict(zip(collar.support.sites, X.encode(collar.values)))
    region = within if within is not None else (volume if collar is None else volume.union(collar.support))
    table = G.table(X.alphabet)
    n = X.size
    total = np.zeros(len(rows))
    for w in window_list(G, region):
        idx = np.zeros(len(rows), dtype=np.int64)
        for k, s in enumerate(w):
            if s in volume:
                idx += rows[:, volume.index(s)].astype(np.int64) * n**k
            else:
                idx += cvals[s] * n**k
        total += table[idx]
    return total


# --- exact finite-volume measures ----------------------------------------------


def row_keys(rows: np.ndarray, nsym: int) -> np.ndarray:
    """Injective 1D keys for symbol-index rows (packed integers when they fit)."""
    rows = np.ascontiguousarray(rows)
    if rows.shape[1] * math.log2(max(nsym, 2)) < 62:
        keys = np.zeros(len(rows), dtype=np.int64)
        for c in range(rows.shape[1]):
            keys = keys * nsym + rows[:, c]
        return keys
    return rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()


def group_rows(rows: np.ndarray, nsym: int) -> tuple[np.ndarray, np.ndarray]:
    """(index of one representative row per distinct row, inverse map)."""
    _, first, inv = np.unique(row_keys(rows, nsym), return_index=True, return_inverse=True)
    return first, inv.ravel()


@dataclass
class FiniteVolumeGibbs:
    X: ShiftSpace
    G: LocalPotential
    volume: SiteSet
    collar: Pattern | None
    mode: str
    rows: np.ndarray | None = None
    logp: np.ndarray | None = None
    records: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.logp)

    def _data(self) -> tuple[np.ndarray, np.ndarray]:
        if self.mode == "exact":
            return self.rows, self.probs
        return self.records, np.full(len(self.records), 1.0 / len(self.records))

    def marginal(self, F: SiteSet) -> dict:
        """Map from symbol-index tuples on F to their probability."""
        rows, w = self._data()
        cols = [self.volume.index(s) for s in F.sites]
        sub = rows[:, cols]
        first, inv = group_rows(sub, self.X.size)
        keys = sub[first]
        mass = np.bincount(inv, weights=w, minlength=len(keys))
        return {tuple(int(v) for v in k): float(m) for k, m in zip(keys, mass)}

    def cylinder_prob(self, pattern: Pattern) -> float:
        rows, w = self._data()
        cols = [self.volume.index(s) for s in pattern.support.sites]
        target = np.array(self.X.encode(pattern.values))
        return float(w[(rows[:, cols] == target).all(axis=1)].sum())

    def to_json(self) -> dict:
        out = {"mode": self.mode, "volume": self.volume.to_json(), **self.meta}
        if self.mode == "exact":
            out["support_size"] = int(len(self.rows))
        return out


def admissible_rows(X: ShiftSpace, volume: SiteSet, collar: Pattern | None, cap: int = EXACT_CAP) -> np.ndarray:
    fixed = {}
    ext = ()
    if collar is not None:
        fixed = dict(zip(collar.support.sites, X.encode(collar.values)))
        ext = collar.support.sites
    prob = compile_problem(X, volume.sites, ext, fixed)
    if not prob.domains.any(axis=1).all():
        return np.zeros((0, len(volume)), dtype=np.int16)
    rows, _ = prob.run(cap=cap)
    return rows


def finite_volume_measure(
    X: ShiftSpace, G: LocalPotential | None, volume: SiteSet, omega=None, cap: int = EXACT_CAP
) -> FiniteVolumeGibbs:
    """Exact Gibbs table on X_volume compatible with the collar ``omega``."""
    G = G or zero_potential(X.dimension)
    collar = collar_pattern(X, volume, omega)
    try:
        rows = admissible_rows(X, volume, collar, cap)
    except EnumerationCapExceeded as exc:
        raise ExactTableTooLarge(exc.partial_count, exc.cap) from None
    if len(rows) == 0:
        raise FrozenSiteError("no admissible pattern matches the boundary condition")
    e = energies(X, G, volume, rows, collar)
    logp = e - logsumexp(e)
    return FiniteVolumeGibbs(X, G, volume, collar, "exact", rows, logp, meta={"omega": _rule_name(omega)})


def _rule_name(omega) -> str:
    return "explicit" if isinstance(omega, Pattern) else str(omega or "free")


def sub_boxes(volume: SiteSet, min_side: int = 3) -> list[SiteSet]:
    lo, hi = volume.bounds()
    ranges = []
    for a, b in zip(lo, hi):
        ranges.append([(x, y) for x in range(a, b + 1) for y in range(x + min_side - 1, b + 1)])
    out = []
    for combo in itertools.product(*ranges):
        box = SiteSet.box([c[0] for c in combo], [c[1] for c in combo])
        if box.issubset(volume):
            out.append(box)
    return out


@dataclass
class ConformalityReport:
    max_deviation: float
    boxes: int
    swaps: int

    def to_json(self) -> dict:
        return {"max_deviation": self.max_deviation, "boxes": self.boxes, "swaps": self.swaps}


def conformality_check_fv(mu: FiniteVolumeGibbs, boxes: Sequence[SiteSet] | None = None) -> ConformalityReport:
    """Max |log(mu[b]/mu[a]) - Psi_G(a, b)| over all swaps supported on sub-boxes.

    Swaps on a box F change only interior sites, and every window reading an
    interior site lies inside F, so Psi_G(a, b) = E_F(b) - E_F(a). Within a
    boundary class, log mu - E_F must therefore be constant.
    """
    if mu.mode != "exact":
        raise ValueError("conformality is checked on exact tables")
    X, G, V = mu.X, mu.G, mu.volume
    boxes = list(boxes) if boxes is not None else sub_boxes(V)
    p = mu.probs
    worst = 0.0
    swaps = 0
    for F in boxes:
        interior, boundary = frontier(F)
        if len(interior) == 0:
            continue
        cols = [V.index(s) for s in F.sites]
        sub = mu.rows[:, cols]
        first, inv = group_rows(sub, X.size)
        keys = sub[first]
        mass = np.bincount(inv, weights=p, minlength=len(keys))
        r = np.log(mass) - energies(X, G, F, keys, within=F)
        bcols = [F.index(s) for s in boundary.sites]
        _, ginv = group_rows(keys[:, bcols], X.size)
        hi = np.full(ginv.max() + 1, -np.inf)
        lo = np.full(ginv.max() + 1, np.inf)
        np.maximum.at(hi, ginv, r)
        np.minimum.at(lo, ginv, r)
        sizes = np.bincount(ginv)
        swaps += int((sizes * (sizes - 1)).sum())
        worst = max(worst, float((hi - lo).max()))
    return ConformalityReport(worst, len(boxes), swaps)


# --- Glauber dynamics ----------------------------------------------------------


def autocorrelation_time(y: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's self-consistent window."""
    y = np.asarray(y, float)
    n = len(y)
    if n < 4 or np.var(y) == 0:
        return 1.0
    x = y - y.mean()
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    tau = 1.0
    for m in range(1, n):
        tau = 1.0 + 2.0 * acf[1 : m + 1].sum()
        if m >= c * tau:
            break
    return float(max(tau, 1.0))


def batch_means(y: np.ndarray, batches: int = 20) -> tuple[float, float]:
    y = np.asarray(y, float)
    if len(y) < 2 * batches:
        batches = max(2, len(y) // 2)
    if len(y) < 2:
        return float(y.mean()) if len(y) else float("nan"), float("nan")
    m = len(y) // batches
    bm = y[: m * batches].reshape(batches, m).mean(axis=1)
    return float(bm.mean()), float(bm.std(ddof=1) / math.sqrt(batches))


@dataclass
class GlauberRun:
    volume: SiteSet
    records: np.ndarray
    seed: int
    sweeps: int
    thin: int
    burn_in: int
    diagnostics: dict

    def observable(self, values: np.ndarray, site=None) -> np.ndarray:
        site = site if site is not None else origin_site(self.volume)
        return values[self.records[:, self.volume.index(site)]]

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "sweeps": self.sweeps,
            "thin": self.thin,
            "burn_in": self.burn_in,
            "samples": int(len(self.records)),
            "diagnostics": self.diagnostics,
        }


def origin_site(volume: SiteSet):
    o = (0,) * volume.dimension
    if o in volume:
        return o
    lo, hi = volume.bounds()
    return tuple((a + b) // 2 for a, b in zip(lo, hi))


def glauber_sample(
    X: ShiftSpace,
    G: LocalPotential | None,
    volume: SiteSet,
    omega=None,
    seed: int = 0,
    sweeps: int = 10000,
    thin: int = 1,
    burn_in: int | None = None,
    observable: np.ndarray | None = None,
    allow_unsafe: bool = False,
) -> GlauberRun:
    """Single-site heat-bath run; deterministic given the seed."""
    warning = None
    if not check_maltese(X).satisfied:
        if not allow_unsafe:
            raise ValueError("no safe symbol set: heat-bath connectivity not guaranteed (pass allow_unsafe)")
        warning = "no safe symbol set; the chain may not be irreducible"
    collar = collar_pattern(X, volume, omega)
    chain = build_chain(X, G, volume, collar)
    rng = np.random.default_rng(seed)
    burn = sweeps // 10 if burn_in is None else burn_in
    chain.run(rng, burn)
    before = chain.changed
    recs = chain.run(rng, sweeps, thin)
    updates = sweeps * len(volume)
    obs = observable if observable is not None else np.arange(X.size, dtype=float)
    series = obs[recs[:, volume.index(origin_site(volume))]] if len(recs) else np.zeros(0)
    diag = {
        "acceptance": (chain.changed - before) / updates if updates else 0.0,
        "autocorrelation_time": autocorrelation_time(series),
        "warning": warning,
    }
    return GlauberRun(volume, recs, seed, sweeps, thin, burn, diag)


def window_tv(mu: FiniteVolumeGibbs, records: np.ndarray) -> float:
    """Max total-variation distance over single sites and adjacent site pairs."""
    emp = FiniteVolumeGibbs(mu.X, mu.G, mu.volume, mu.collar, "sampled", records=records)
    worst = 0.0
    for F in small_windows(mu.volume):
        a, b = mu.marginal(F), emp.marginal(F)
        tv = 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))
        worst = max(worst, tv)
    return worst


def small_windows(volume: SiteSet) -> list[SiteSet]:
    out = [SiteSet(volume.dimension, (s,)) for s in volume.sites]
    for s in volume.sites:
        for axis in range(volume.dimension):
            t = s[:axis] + (s[axis] + 1,) + s[axis + 1 :]
            if t in volume:
                out.append(SiteSet(volume.dimension, (s, t)))
    return out


# --- entropy and pressure ----------------------------------------------------------


@dataclass
class EntropyScan:
    margin: int
    rows: list
    truncated: bool = False

    @property
    def values(self) -> list[float]:
        return [r["value"] for r in self.rows]

    def to_json(self) -> dict:
        return {"margin": self.margin, "truncated": self.truncated, "rows": self.rows}


def box_entropy_scan(X: ShiftSpace, n_max: int, margin: int = 0, cap: int = 10**7) -> EntropyScan:
    """log |X_B(0,n)| / |B(0,n)| for n = 1..n_max."""
    rows = []
    for n in range(1, n_max + 1):
        B = SiteSet.cube(X.dimension, n)
        try:
            c = count_patterns(X, B, margin=margin, cap=cap)
        except EnumerationCapExceeded:
            return EntropyScan(margin, rows, True)
        lc = math.log(c) if c else float("-inf")
        rows.append({"n": n, "log_count": lc, "value": lc / len(B)})
    return EntropyScan(margin, rows)


@dataclass
class PressureEstimate:
    h: float
    pressure: float
    stderr: float
    undersampled: bool

    def to_json(self) -> dict:
        return {"h": self.h, "pressure": self.pressure, "stderr": self.stderr, "undersampled": self.undersampled}


def _blocks(sample: np.ndarray, b: int) -> np.ndarray:
    """All b x ... x b sliding blocks of one sample, flattened in lexicographic site order."""
    sw = np.lib.stride_tricks.sliding_window_view(sample, (b,) * sample.ndim)
    return sw.reshape(-1, b**sample.ndim)


def _entropy(rows: np.ndarray) -> tuple[float, float]:
    _, counts = np.unique(rows, axis=0, return_counts=True)
    q = counts / counts.sum()
    return float(-(q * np.log(q)).sum()), float((counts == 1).sum() / len(counts))


def _conditional_entropy(blocks: np.ndarray) -> tuple[float, float]:
    h_full, single = _entropy(blocks)
    h_past, _ = _entropy(blocks[:, :-1]) if blocks.shape[1] > 1 else (0.0, 0.0)
    return h_full - h_past, single


def empirical_pressure(
    samples: Sequence[np.ndarray], G: LocalPotential | None = None, alphabet: Sequence | None = None,
    b: int = 2, batches: int = 10,
) -> PressureEstimate:
    """Plug-in entropy per site from b-blocks plus the empirical mean of G.

    The entropy is that of the lexicographically last site of a block given the
    rest of the block; the plug-in estimate is biased down. ``samples`` are
    symbol-index arrays (one per configuration). A single 1D sample is cut into
    ``batches`` segments for the error bar.
    """
    samples = [np.asarray(s) for s in samples]
    if len(samples) == 1 and samples[0].ndim == 1:
        samples = np.array_split(samples[0], batches)
    groups = np.array_split(np.arange(len(samples)), min(batches, len(samples)))
    blocks = [np.concatenate([_blocks(samples[i], b) for i in g]) for g in groups if len(g)]
    h, single = _conditional_entropy(np.concatenate(blocks))
    per = [_conditional_entropy(bl)[0] for bl in blocks]
    g_mean = 0.0
    g_per = [0.0] * len(blocks)
    if G is not None and not G.is_zero:
        table = G.table(alphabet)
        n = len(alphabet)

        def mean_G(arrs):
            vals = []
            for s in arrs:
                shape = s.shape
                idx = 0
                lo = [max(0, -min(o[a] for o in G.footprint)) for a in range(s.ndim)]
                hi = [shape[a] - max(0, max(o[a] for o in G.footprint)) for a in range(s.ndim)]
                for k, off in enumerate(G.footprint):
                    sl = tuple(slice(lo[a] + off[a], hi[a] + off[a]) for a in range(s.ndim))
                    idx = idx + s[sl].astype(np.int64) * n**k
                vals.append(table[idx].ravel())
            return float(np.concatenate(vals).mean())

        g_mean = mean_G(samples)
        g_per = [mean_G([samples[i] for i in g]) for g in groups if len(g)]
    est = np.array(per) + np.array(g_per)
    stderr = float(est.std(ddof=1) / math.sqrt(len(est))) if len(est) > 1 else float("nan")
    return PressureEstimate(h, h + g_mean, stderr, single > 0.5)


# --- thermodynamic limit and phase probes ----------------------------------------


def thermo_limit_scan(
    X: ShiftSpace,
    G: LocalPotential | None,
    volumes: Sequence[SiteSet],
    rules: Sequence = ("zero",),
    targets: Sequence[Pattern] = (),
    seed: int = 0,
    sweeps: int = 20000,
    tol: float = 1e-3,
    cap: int = EXACT_CAP,
) -> dict:
    """Target cylinder probabilities along growing volumes under each boundary rule."""
    for a, b in zip(volumes, volumes[1:]):
        if not a.issubset(b) or a == b:
            raise ValueError("volumes must increase")
    table = []
    for rule in rules:
        probs, errs, modes = [], [], []
        for V in volumes:
            try:
                mu = finite_volume_measure(X, G, V, rule, cap=cap)
                probs.append([mu.cylinder_prob(t) for t in targets])
                errs.append([0.0] * len(targets))
                modes.append("exact")
            except EnumerationCapExceeded:
                run = glauber_sample(X, G, V, rule, seed=seed, sweeps=sweeps, allow_unsafe=True)
                row, err = [], []
                for t in targets:
                    cols = [V.index(s) for s in t.support.sites]
                    hit = (run.records[:, cols] == np.array(X.encode(t.values))).all(axis=1).astype(float)
                    m, se = batch_means(hit)
                    row.append(m)
                    err.append(se)
                probs.append(row)
                errs.append(err)
                modes.append("sampled")
        diffs = [float(np.max(np.abs(np.subtract(b, a)))) for a, b in zip(probs, probs[1:])]
        table.append({
            "rule": _rule_name(rule),
            "sizes": [len(V) for V in volumes],
            "modes": modes,
            "probs": probs,
            "stderr": errs,
            "diffs": diffs,
            "stabilized": bool(diffs) and all(d < tol for d in diffs[-1:]),
        })
    dependent = False
    if len(table) >= 2:
        a, b = table[0], table[1]
        for pa, pb, ea, eb in zip(a["probs"][-1], b["probs"][-1], a["stderr"][-1], b["stderr"][-1]):
            sigma = math.hypot(ea, eb)
            thresh = 3 * sigma if sigma > 0 else tol
            dependent = dependent or abs(pa - pb) > thresh
    return {"rules": table, "boundary_dependent": dependent}


def centered_box(d: int, size: int) -> SiteSet:
    lo = -(size // 2)
    return SiteSet.box((lo,) * d, (lo + size - 1,) * d)


def _probe_chain(args) -> tuple[float, float, int]:
    name, beta, size, rule, seed, sweeps, burn_in, thin = args
    # independent stream per (seed, collar)
    seed = int(np.random.SeedSequence([seed, sum(map(ord, rule))]).generate_state(1)[0])
    model = builtin(name, beta=beta)
    X = model.space
    obs = observable_values(model)
    V = centered_box(X.dimension, size)
    run = glauber_sample(X, model.potential, V, rule, seed=seed, sweeps=sweeps, thin=thin, burn_in=burn_in,
                         observable=obs, allow_unsafe=True)
    y = run.observable(obs)
    return y.mean(), batch_means(y)[1], len(y)


def phase_probe(
    model: str | Model,
    betas: Sequence[float],
    sizes: Sequence[int],
    seeds: Sequence[int],
    sweeps: int = 20000,
    burn_in: int = 2000,
    thin: int = 1,
    rules: tuple[str, str] = ("plus", "minus"),
    jobs: int = 1,
) -> list[dict]:
    """Gap of the mean origin observable between two extremal collars.

    Each seed gives one chain per collar; the error bar combines batch-means
    standard errors within chains (and the spread across seeds when there are
    several).
    """
    name = model if isinstance(model, str) else _model_ref(model)
    tasks = []
    for beta in betas:
        for size in sizes:
            for rule in rules:
                for s in seeds:
                    tasks.append((name, float(beta), int(size), rule, int(s), sweeps, burn_in, thin))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_probe_chain, tasks))
    else:
        results = [_probe_chain(t) for t in tasks]
    res = dict(zip(tasks, results))
    out = []
    for beta in betas:
        for size in sizes:
            side = {}
            for rule in rules:
                vals = [res[(name, float(beta), int(size), rule, int(s), sweeps, burn_in, thin)] for s in seeds]
                means = np.array([v[0] for v in vals])
                ses = np.array([v[1] for v in vals])
                within = math.sqrt((ses**2).sum()) / len(vals)
                across = means.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
                side[rule] = (float(means.mean()), float(max(within, across)))
            (mp, sp), (mm, sm) = side[rules[0]], side[rules[1]]
            gap = mp - mm
            se = math.hypot(sp, sm)
            out.append({
                "beta": float(beta),
                "size": int(size),
                rules[0]: mp,
                rules[1]: mm,
                "gap": gap,
                "stderr": se,
                "z": gap / se if se > 0 else (math.inf if gap else 0.0),
            })
    return out


def _model_ref(model: Model) -> str:
    p = model.space.params
    if model.name == "iceberg":
        return f"iceberg({p['M']})"
    if model.name == "beach":
        return f"beach({p['A0']},{p['A1']},{p['B']})"
    return model.name
