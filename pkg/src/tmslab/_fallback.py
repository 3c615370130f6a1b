"""Pure-Python versions of the hot kernels.

Every function here mirrors ``_kernels.pyx`` operation for operation, so both
backends produce identical outputs from identical inputs (same libm ``exp``,
same summation order).
"""

import math

import numpy as np

_CHUNK = 1 << 16


def dfs(domains, nbr_ptr, nbr_idx, nbr_mat, mats, n_out, cap, count_only, max_results, tables=None):
    """Backtracking search over levels 0..n-1.

    Levels below ``n_out`` are output sites; the remaining levels only need one
    consistent completion each. ``tables`` optionally maps a level to a list of
    (level tuple, allowed set) checks that become decidable at that level.

    Returns (rows, count, exceeded).
    """
    n, nsym = domains.shape
    dom = [[v for v in range(nsym) if domains[i, v]] for i in range(n)]
    ptr = nbr_ptr.tolist()
    nbr = nbr_idx.tolist()
    mid = nbr_mat.tolist()
    m = mats.astype(bool).tolist()
    checks = [[(nbr[e], m[mid[e]]) for e in range(ptr[i], ptr[i + 1])] for i in range(n)]
    tabs = [list(tables.get(i, ())) if tables else [] for i in range(n)]

    chunks = []
    cur = None
    row = 0
    count = 0
    exceeded = False
    values = [0] * n
    pos = [-1] * n

    if n == 0:
        if n_out == 0:
            count = 1
        rows = None if count_only else np.zeros((count, 0), dtype=np.int16)
        return rows, count, False

    level = 0
    while level >= 0:
        d = dom[level]
        k = pos[level] + 1
        chk = checks[level]
        tb = tabs[level]
        found = -1
        while k < len(d):
            v = d[k]
            ok = True
            for j, mat in chk:
                if not mat[v][values[j]]:
                    ok = False
                    break
            if ok and tb:
                values[level] = v
                for lv, allowed in tb:
                    if tuple(values[x] for x in lv) not in allowed:
                        ok = False
                        break
            if ok:
                found = k
                break
            k += 1
        if found < 0:
            pos[level] = -1
            level -= 1
            continue
        pos[level] = found
        values[level] = d[found]
        if level == n - 1:
            count += 1
            if count > cap:
                exceeded = True
                count -= 1
                break
            if not count_only:
                if cur is None or row == _CHUNK:
                    cur = np.empty((_CHUNK, n_out), dtype=np.int16)
                    chunks.append(cur)
                    row = 0
                cur[row, :] = values[:n_out]
                row += 1
            if max_results > 0 and count >= max_results:
                break
            if n_out == 0:
                break
            # the extension levels only need one witness; resume at the last output level
            for lv in range(n_out, n):
                pos[lv] = -1
            level = n_out - 1
        else:
            level += 1
            pos[level] = -1

    if count_only:
        return None, count, exceeded
    if not chunks:
        return np.zeros((0, n_out), dtype=np.int16), count, exceeded
    chunks[-1] = chunks[-1][:row]
    return np.concatenate(chunks, axis=0), count, exceeded


def heat_bath(
    state, active, nbr_ptr, nbr_idx, nbr_mat, mats, win_ptr, win_idx, win_pow, win_sites, table,
    nsym, uniforms, n_sweeps, thin, out,
):
    """Sequential-scan single-site heat-bath sweeps.

    ``state`` is updated in place. Records the active sites into ``out`` after
    every ``thin``-th sweep (``thin <= 0`` records nothing). Returns
    (changed updates, frozen site position or -1).
    """
    st = state.tolist()
    act = active.tolist()
    ptr = nbr_ptr.tolist()
    nbr = nbr_idx.tolist()
    mid = nbr_mat.tolist()
    m = mats.astype(bool).tolist()
    wptr = win_ptr.tolist()
    wid = win_idx.tolist()
    wpw = win_pow.tolist()
    ws = win_sites.tolist()
    tab = table.tolist()
    f = win_sites.shape[1] if win_sites.ndim == 2 else 0
    powers = [nsym**k for k in range(f)]
    u = uniforms
    n_act = len(act)
    changed = 0
    rec = 0
    allowed = [False] * nsym
    energy = [0.0] * nsym
    weight = [0.0] * nsym
    for sweep in range(n_sweeps):
        base_u = sweep * n_act
        for a in range(n_act):
            site = act[a]
            cur = st[site]
            any_ok = False
            for s in range(nsym):
                ok = True
                for e in range(ptr[a], ptr[a + 1]):
                    if not m[mid[e]][s][st[nbr[e]]]:
                        ok = False
                        break
                allowed[s] = ok
                any_ok = any_ok or ok
            if not any_ok:
                for r in range(state.shape[0]):
                    state[r] = st[r]
                return changed, a
            emax = -math.inf
            for s in range(nsym):
                if allowed[s]:
                    e_s = 0.0
                    for e in range(wptr[a], wptr[a + 1]):
                        w = ws[wid[e]]
                        idx = 0
                        for k in range(f):
                            idx += st[w[k]] * powers[k]
                        idx += (s - cur) * wpw[e]
                        e_s += tab[idx]
                    energy[s] = e_s
                    if e_s > emax:
                        emax = e_s
            total = 0.0
            for s in range(nsym):
                if allowed[s]:
                    weight[s] = math.exp(energy[s] - emax)
                    total += weight[s]
            target = u[base_u + a] * total
            acc = 0.0
            pick = -1
            for s in range(nsym):
                if allowed[s]:
                    acc += weight[s]
                    pick = s
                    if target < acc:
                        break
            if pick != cur:
                changed += 1
                st[site] = pick
        if thin > 0 and (sweep + 1) % thin == 0:
            for a in range(n_act):
                out[rec, a] = st[act[a]]
            rec += 1
    state[:] = st
    return changed, -1
