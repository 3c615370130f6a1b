# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; ``_fallback.py`` holds the reference Python twins."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY

cnp.import_array()

DEF CHUNK = 65536


def dfs(cnp.uint8_t[:, :] domains, int[:] nbr_ptr, int[:] nbr_idx, int[:] nbr_mat,
        cnp.uint8_t[:, :, :] mats, int n_out, long long cap, bint count_only,
        long long max_results, tables=None):
    if tables:
        raise ValueError("neighborhood-table checks are only supported by the Python backend")
    cdef Py_ssize_t n = domains.shape[0]
    cdef Py_ssize_t nsym = domains.shape[1]
    cdef long long count = 0
    cdef bint exceeded = False
    cdef Py_ssize_t level, k, e, j, lv, row = 0
    cdef int v, found
    cdef bint ok
    cdef cnp.ndarray[cnp.int32_t, ndim=1] values_arr = np.zeros(max(n, 1), dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] pos_arr = np.full(max(n, 1), -1, dtype=np.int32)
    cdef int[:] values = values_arr
    cdef int[:] pos = pos_arr
    cdef cnp.int16_t[:, :] cur
    chunks = []
    have_chunk = False

    if n == 0:
        if n_out == 0:
            count = 1
        return (None if count_only else np.zeros((count, 0), dtype=np.int16)), count, False

    level = 0
    while level >= 0:
        k = pos[level] + 1
        found = -1
        while k < nsym:
            if domains[level, k]:
                ok = True
                for e in range(nbr_ptr[level], nbr_ptr[level + 1]):
                    if not mats[nbr_mat[e], k, values[nbr_idx[e]]]:
                        ok = False
                        break
                if ok:
                    found = <int>k
                    break
            k += 1
        if found < 0:
            pos[level] = -1
            level -= 1
            continue
        pos[level] = found
        values[level] = found
        if level == n - 1:
            count += 1
            if count > cap:
                exceeded = True
                count -= 1
                break
            if not count_only:
                if not have_chunk or row == CHUNK:
                    arr = np.empty((CHUNK, n_out), dtype=np.int16)
                    chunks.append(arr)
                    cur = arr
                    have_chunk = True
                    row = 0
                for j in range(n_out):
                    cur[row, j] = <cnp.int16_t>values[j]
                row += 1
            if max_results > 0 and count >= max_results:
                break
            if n_out == 0:
                break
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
    last = len(chunks) - 1
    chunks[last] = chunks[last][:row]
    return np.concatenate(chunks, axis=0), count, exceeded


def heat_bath(int[:] state, int[:] active, int[:] nbr_ptr, int[:] nbr_idx, int[:] nbr_mat,
              cnp.uint8_t[:, :, :] mats, int[:] win_ptr, int[:] win_idx, long long[:] win_pow,
              int[:, :] win_sites, double[:] table, int nsym, double[:] uniforms,
              long long n_sweeps, long long thin, cnp.int16_t[:, :] out):
    cdef Py_ssize_t n_act = active.shape[0]
    cdef Py_ssize_t f = win_sites.shape[1]
    cdef Py_ssize_t a, e, kk, sweep, rec = 0
    cdef int s, cur, site, pick
    cdef long long idx, changed = 0, base_u
    cdef double emax, total, target, acc, e_s
    cdef bint ok, any_ok
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] allowed_arr = np.zeros(nsym, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] energy_arr = np.zeros(nsym, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] weight_arr = np.zeros(nsym, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] powers_arr = np.array([nsym ** k for k in range(max(f, 1))], dtype=np.int64)
    cdef cnp.uint8_t[:] allowed = allowed_arr
    cdef double[:] energy = energy_arr
    cdef double[:] weight = weight_arr
    cdef long long[:] powers = powers_arr
    cdef int wi

    for sweep in range(n_sweeps):
        base_u = sweep * n_act
        for a in range(n_act):
            site = active[a]
            cur = state[site]
            any_ok = False
            for s in range(nsym):
                ok = True
                for e in range(nbr_ptr[a], nbr_ptr[a + 1]):
                    if not mats[nbr_mat[e], s, state[nbr_idx[e]]]:
                        ok = False
                        break
                allowed[s] = ok
                if ok:
                    any_ok = True
            if not any_ok:
                return changed, a
            emax = -INFINITY
            for s in range(nsym):
                if allowed[s]:
                    e_s = 0.0
                    for e in range(win_ptr[a], win_ptr[a + 1]):
                        wi = win_idx[e]
                        idx = 0
                        for kk in range(f):
                            idx += state[win_sites[wi, kk]] * powers[kk]
                        idx += (s - cur) * win_pow[e]
                        e_s += table[idx]
                    energy[s] = e_s
                    if e_s > emax:
                        emax = e_s
            total = 0.0
            for s in range(nsym):
                if allowed[s]:
                    weight[s] = exp(energy[s] - emax)
                    total += weight[s]
            target = uniforms[base_u + a] * total
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
                state[site] = pick
        if thin > 0 and (sweep + 1) % thin == 0:
            for a in range(n_act):
                out[rec, a] = <cnp.int16_t>state[active[a]]
            rec += 1
    return changed, -1
