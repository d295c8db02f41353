# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror :mod:`netdefense._pykernels`."""

import numpy as np
from libc.stdint cimport int64_t, uint8_t, int8_t

NAME = "cython"


cdef void _label(const int64_t[::1] indptr, const int64_t[::1] indices,
                 const uint8_t* alive, int64_t n, int64_t* labels, int64_t* stack) noexcept nogil:
    # canonical label = smallest node index of the component
    cdef int64_t v, u, top, p, root
    for v in range(n):
        labels[v] = -1
    for root in range(n):
        if not alive[root] or labels[root] != -1:
            continue
        labels[root] = root
        top = 0
        stack[top] = root
        top += 1
        while top > 0:
            top -= 1
            v = stack[top]
            for p in range(indptr[v], indptr[v + 1]):
                u = indices[p]
                if alive[u] and labels[u] == -1:
                    labels[u] = root
                    stack[top] = u
                    top += 1


def components_masked(const int64_t[::1] indptr, const int64_t[::1] indices, const uint8_t[::1] mask):
    cdef int64_t n = mask.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] lab = out
    cdef int64_t[::1] stack = np.empty(max(n, 1), dtype=np.int64)
    with nogil:
        _label(indptr, indices, &mask[0], n, &lab[0], &stack[0])
    return out


def state_labels(const int64_t[::1] indptr, const int64_t[::1] indices, int64_t n):
    cdef int64_t n_states = (<int64_t>1) << n
    out = np.empty((n_states, n), dtype=np.int8)
    cdef int8_t[:, ::1] o = out
    cdef uint8_t[::1] alive = np.empty(n, dtype=np.uint8)
    cdef int64_t[::1] lab = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] stack = np.empty(n, dtype=np.int64)
    cdef int64_t x, i
    with nogil:
        for x in range(n_states):
            for i in range(n):
                alive[i] = (x >> i) & 1
            _label(indptr, indices, &alive[0], n, &lab[0], &stack[0])
            for i in range(n):
                o[x, i] = <int8_t>lab[i]
    return out


def mc_infected_counts(const int64_t[::1] indptr, const int64_t[::1] indices,
                       const uint8_t[:, ::1] susceptible, const int64_t[::1] seeds):
    cdef int64_t S = susceptible.shape[0]
    cdef int64_t n = susceptible.shape[1]
    out = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] counts = out
    cdef int64_t[::1] stamp = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] stack = np.empty(max(n, 1), dtype=np.int64)
    cdef int64_t m, s, v, u, p, top
    with nogil:
        for m in range(S):
            s = seeds[m]
            if not susceptible[m, s]:
                continue
            stamp[s] = m
            counts[s] += 1
            top = 0
            stack[top] = s
            top += 1
            while top > 0:
                top -= 1
                v = stack[top]
                for p in range(indptr[v], indptr[v + 1]):
                    u = indices[p]
                    if susceptible[m, u] and stamp[u] != m:
                        stamp[u] = m
                        counts[u] += 1
                        stack[top] = u
                        top += 1
    return out


def walk_matrix(const int64_t[::1] indptr, const int64_t[::1] indices,
                const double[::1] keep, int64_t L, bint grad):
    """Distinct-node walk sums W[i, s] and, optionally, dW[i, s, k] = dW[i, s] / dq_k."""
    cdef int64_t n = keep.shape[0]
    W_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] W = W_arr
    cdef int64_t dn = n if grad else 1
    dW_arr = np.zeros((dn, dn, dn), dtype=np.float64)
    cdef double[:, :, ::1] dW = dW_arr
    cdef int64_t[::1] cnt = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] path = np.zeros(L + 1, dtype=np.int64)
    cdef int64_t[::1] ptr = np.zeros(L + 1, dtype=np.int64)
    cdef int64_t[::1] distinct = np.zeros(L + 1, dtype=np.int64)
    # pre[a] = product of keep over distinct[:a]
    cdef double[::1] pre = np.ones(L + 2, dtype=np.float64)
    cdef int64_t i, depth, v, u, nd, a
    cdef double suf
    with nogil:
        for i in range(n):
            depth = 0
            path[0] = i
            ptr[0] = indptr[i]
            cnt[i] = 1
            distinct[0] = i
            pre[1] = keep[i]
            nd = 1
            while depth >= 0:
                v = path[depth]
                if depth == L or ptr[depth] == indptr[v + 1]:
                    # backtrack
                    cnt[v] -= 1
                    if cnt[v] == 0:
                        nd -= 1
                    depth -= 1
                    continue
                u = indices[ptr[depth]]
                ptr[depth] += 1
                depth += 1
                path[depth] = u
                ptr[depth] = indptr[u]
                if cnt[u] == 0:
                    distinct[nd] = u
                    pre[nd + 1] = pre[nd] * keep[u]
                    nd += 1
                cnt[u] += 1
                W[i, u] += pre[nd]
                if grad:
                    suf = 1.0
                    for a in range(nd - 1, -1, -1):
                        dW[i, u, distinct[a]] -= pre[a] * suf
                        suf *= keep[distinct[a]]
    return W_arr, (dW_arr if grad else None)


def dynamics_batch(const int64_t[::1] indptr, const int64_t[::1] indices,
                   const double[:, ::1] beta, const uint8_t[:, ::1] sigma0,
                   const double[:, :, ::1] uniforms, double gamma, double tau, double delta):
    cdef int64_t R = sigma0.shape[0]
    cdef int64_t n = sigma0.shape[1]
    cdef int64_t T = uniforms.shape[1]
    counts_arr = np.zeros((R, T + 1), dtype=np.int64)
    cdef int64_t[:, ::1] counts = counts_arr
    final_arr = np.zeros((R, n), dtype=np.uint8)
    cdef uint8_t[:, ::1] final = final_arr
    cdef uint8_t[::1] cur = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] nxt = np.zeros(n, dtype=np.uint8)
    cdef int64_t r, t, i, p, deg, infected_nb, c
    cdef double u, z, pressure
    with nogil:
        for r in range(R):
            c = 0
            for i in range(n):
                cur[i] = sigma0[r, i]
                c += cur[i]
            counts[r, 0] = c
            for t in range(T):
                c = 0
                for i in range(n):
                    u = uniforms[r, t, i]
                    if cur[i]:
                        nxt[i] = 1 if gamma - u > 0.0 else 0
                    else:
                        deg = indptr[i + 1] - indptr[i]
                        if deg == 0:
                            pressure = 0.0
                        else:
                            infected_nb = 0
                            for p in range(indptr[i], indptr[i + 1]):
                                infected_nb += cur[indices[p]]
                            pressure = beta[r, i] * infected_nb / deg
                        z = tau * delta + (1.0 - tau) * u
                        nxt[i] = 1 if pressure - z > 0.0 else 0
                    c += nxt[i]
                for i in range(n):
                    cur[i] = nxt[i]
                counts[r, t + 1] = c
            for i in range(n):
                final[r, i] = cur[i]
    return counts_arr, final_arr
