"""Single-site heat-bath chains on a finite volume with a frozen collar."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .enumeration import axis_mats, compile_problem
from .lattice import AxisPairs, Pattern, ShiftSpace, SiteSet
from .potentials import LocalPotential, zero_potential

SWEEP_CHUNK = 2000


class FrozenSiteError(RuntimeError):
    """No symbol is allowed at a site given its neighbours; the collar is inconsistent."""


@dataclass
class Chain:
    X: ShiftSpace
    volume: SiteSet
    collar: SiteSet
    state: np.ndarray
    active: np.ndarray
    nbr_ptr: np.ndarray
    nbr_idx: np.ndarray
    nbr_mat: np.ndarray
    mats: np.ndarray
    win_ptr: np.ndarray
    win_idx: np.ndarray
    win_pow: np.ndarray
    win_sites: np.ndarray
    table: np.ndarray
    sweeps_done: int = 0
    changed: int = 0

    def run(self, rng: np.random.Generator, n_sweeps: int, thin: int = 0) -> np.ndarray:
        """Advance ``n_sweeps`` sweeps; rows of active-site symbols after every ``thin``-th sweep.

        Uniforms are drawn sweep by sweep from ``rng``, so the stream does not
        depend on the internal chunking.
        """
        n_act = len(self.active)
        chunk = SWEEP_CHUNK if thin <= 0 else max(1, SWEEP_CHUNK // thin) * thin
        recs = []
        done = 0
        while done < n_sweeps:
            m = min(chunk, n_sweeps - done)
            n_rec = m // thin if thin > 0 else 0
            out = np.zeros((max(n_rec, 1), n_act), dtype=np.int16)
            u = rng.random(m * n_act)
            ch, frozen = backend.heat_bath(
                self.state, self.active, self.nbr_ptr, self.nbr_idx, self.nbr_mat, self.mats,
                self.win_ptr, self.win_idx, self.win_pow, self.win_sites, self.table,
                self.X.size, u, m, thin, out,
            )
            if frozen >= 0:
                raise FrozenSiteError(f"frozen site {self.volume.sites[frozen]}: no symbol allowed")
            self.changed += ch
            self.sweeps_done += m
            done += m
            if n_rec:
                recs.append(out[:n_rec])
        if not recs:
            return np.zeros((0, n_act), dtype=np.int16)
        return np.concatenate(recs, axis=0)

    def current(self) -> np.ndarray:
        return self.state[self.active].astype(np.int16)


def _windows(X: ShiftSpace, G: LocalPotential, sites: SiteSet):
    pos = {s: i for i, s in enumerate(sites.sites)}
    wins = []
    for j in sites.sites:
        w = []
        for off in G.footprint:
            t = tuple(a + b for a, b in zip(j, off))
            if t not in pos:
                break
            w.append(pos[t])
        else:
            wins.append(w)
    # anchors outside the site set can still see a window fully inside it
    if any(any(c) for c in G.footprint):
        seen = {tuple(w) for w in wins}
        for s in sites.sites:
            for off in G.footprint:
                j = tuple(a - b for a, b in zip(s, off))
                w = []
                for o2 in G.footprint:
                    t = tuple(a + b for a, b in zip(j, o2))
                    if t not in pos:
                        break
                    w.append(pos[t])
                else:
                    if tuple(w) not in seen:
                        seen.add(tuple(w))
                        wins.append(w)
    return wins


def build_chain(
    X: ShiftSpace,
    G: LocalPotential | None,
    volume: SiteSet,
    collar: Pattern | None = None,
    init: np.ndarray | None = None,
) -> Chain:
    """Chain on ``volume`` with ``collar`` frozen; energy from windows inside volume u collar."""
    if not isinstance(X.constraint, AxisPairs):
        raise ValueError("heat-bath sampling needs axis-pair constraints")
    G = G or zero_potential(X.dimension)
    csites = collar.support if collar is not None else SiteSet(X.dimension, ())
    if not csites.isdisjoint(volume):
        raise ValueError("collar overlaps the volume")
    allsites = volume.union(csites)
    pos = {s: i for i, s in enumerate(allsites.sites)}
    state = np.zeros(len(allsites), dtype=np.int32)
    fixed = {}
    if collar is not None:
        for s, v in zip(collar.support.sites, X.encode(collar.values)):
            state[pos[s]] = v
            fixed[s] = v
    if init is None:
        prob = compile_problem(X, volume.sites, csites.sites, fixed)
        rows = None
        if prob.domains.any(axis=1).all():
            rows, _ = prob.run(cap=1, max_results=1)
        if rows is None or len(rows) == 0:
            raise FrozenSiteError("no admissible configuration matches the collar")
        init = rows[0]
    for s, v in zip(volume.sites, init):
        state[pos[s]] = int(v)
    active = np.array([pos[s] for s in volume.sites], dtype=np.int32)

    d = X.dimension
    ptr, idx, mid = [0], [], []
    for s in volume.sites:
        for axis in range(d):
            for sign, mat in ((1, 2 * axis), (-1, 2 * axis + 1)):
                t = s[:axis] + (s[axis] + sign,) + s[axis + 1 :]
                if t in pos:
                    idx.append(pos[t])
                    mid.append(mat)
        ptr.append(len(idx))

    wins = [] if G.is_zero else _windows(X, G, allsites)
    f = len(G.footprint)
    wsites = np.array(wins, dtype=np.int32).reshape(len(wins), f)
    member: list[list[tuple[int, int]]] = [[] for _ in range(len(allsites))]
    for wi, w in enumerate(wins):
        for k, site in enumerate(w):
            member[site].append((wi, X.size**k))
    wptr, widx, wpow = [0], [], []
    for site in active:
        for wi, pw in member[site]:
            widx.append(wi)
            wpow.append(pw)
        wptr.append(len(widx))
    table = G.table(X.alphabet) if wins else np.zeros(1)
    return Chain(
        X, volume, csites, state, active,
        np.array(ptr, np.int32), np.array(idx, np.int32), np.array(mid, np.int32), axis_mats(X),
        np.array(wptr, np.int32), np.array(widx, np.int32), np.array(wpow, np.int64),
        np.ascontiguousarray(wsites), np.ascontiguousarray(table, dtype=np.float64),
    )


def sample_configurations(
    X: ShiftSpace, F: SiteSet, n: int, seed: int, margin: int = 1, burn_in: int = 200, thin: int = 5
) -> np.ndarray:
    """``n`` symbol-index rows on F drawn from a uniform heat-bath chain on F dilated by ``margin``.

    Every row extends to the dilated box, so it is margin-extendable.
    """
    E = F.dilate(margin)
    chain = build_chain(X, None, E)
    rng = np.random.default_rng(seed)
    chain.run(rng, burn_in)
    recs = chain.run(rng, n * thin, thin)
    cols = [E.index(s) for s in F.sites]
    return np.ascontiguousarray(recs[:, cols])
