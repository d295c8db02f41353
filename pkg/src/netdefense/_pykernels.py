"""Pure numpy/Python versions of the compiled kernels in ``_ckernels.pyx``.

Every function returns results identical to its compiled twin for the same
inputs (same traversal orders, same floating-point operation order).
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def components_masked(indptr, indices, mask):
    n = mask.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    for root in range(n):
        if not mask[root] or labels[root] != -1:
            continue
        labels[root] = root
        stack = [root]
        while stack:
            v = stack.pop()
            for u in indices[indptr[v] : indptr[v + 1]]:
                if mask[u] and labels[u] == -1:
                    labels[u] = root
                    stack.append(u)
    return labels


def state_labels(indptr, indices, n):
    """Component labels for every susceptibility state, vectorised over states.

    Min-label propagation over edges converges to the smallest node index in
    each component, which is the canonical labelling used by the compiled kernel.
    """
    states = np.arange(1 << n, dtype=np.int64)
    alive = ((states[:, None] >> np.arange(n)) & 1).astype(bool)
    labels = np.where(alive, np.arange(n), n).astype(np.int64)
    src = np.repeat(np.arange(n), np.diff(indptr))
    dst = np.asarray(indices)
    keep = src < dst
    src, dst = src[keep], dst[keep]
    both = alive[:, src] & alive[:, dst]
    while True:
        lo = np.minimum(labels[:, src], labels[:, dst])
        lo = np.where(both, lo, n)
        new = labels.copy()
        for col, vals in ((src, lo), (dst, lo)):
            for e in range(len(col)):
                np.minimum(new[:, col[e]], vals[:, e], out=new[:, col[e]])
        if np.array_equal(new, labels):
            break
        labels = new
    labels[~alive] = -1
    return labels.astype(np.int8)


def mc_infected_counts(indptr, indices, susceptible, seeds):
    S, n = susceptible.shape
    counts = np.zeros(n, dtype=np.int64)
    for m in range(S):
        s = int(seeds[m])
        x = susceptible[m]
        if not x[s]:
            continue
        seen = {s}
        stack = [s]
        while stack:
            v = stack.pop()
            for u in indices[indptr[v] : indptr[v + 1]]:
                if x[u] and u not in seen:
                    seen.add(u)
                    stack.append(u)
        counts[list(seen)] += 1
    return counts


def walk_matrix(indptr, indices, keep, L, grad):
    n = keep.shape[0]
    W = np.zeros((n, n))
    dW = np.zeros((n, n, n)) if grad else None
    keep = [float(k) for k in keep]
    nbrs = [list(map(int, indices[indptr[v] : indptr[v + 1]])) for v in range(n)]
    cnt = [0] * n
    distinct: list[int] = []
    pre = [1.0]  # pre[a] = product of keep over distinct[:a]

    def visit(v, depth):
        for u in nbrs[v]:
            fresh = cnt[u] == 0
            if fresh:
                distinct.append(u)
                pre.append(pre[-1] * keep[u])
            cnt[u] += 1
            W[start, u] += pre[-1]
            if grad:
                suf = 1.0
                for a in range(len(distinct) - 1, -1, -1):
                    dW[start, u, distinct[a]] -= pre[a] * suf
                    suf *= keep[distinct[a]]
            if depth + 1 < L:
                visit(u, depth + 1)
            cnt[u] -= 1
            if fresh:
                distinct.pop()
                pre.pop()

    for start in range(n):
        cnt[start] = 1
        distinct.append(start)
        pre.append(keep[start])
        visit(start, 0)
        cnt[start] = 0
        distinct.pop()
        pre.pop()
    return W, dW


def dynamics_batch(indptr, indices, beta, sigma0, uniforms, gamma, tau, delta):
    R, n = sigma0.shape
    T = uniforms.shape[1]
    deg = np.diff(indptr)
    src = np.repeat(np.arange(n), deg)
    counts = np.zeros((R, T + 1), dtype=np.int64)
    cur = sigma0.astype(np.uint8).copy()
    counts[:, 0] = cur.sum(axis=1)
    safe_deg = np.where(deg == 0, 1, deg).astype(np.float64)
    for t in range(T):
        u = uniforms[:, t, :]
        nb = np.zeros((R, n), dtype=np.int64)
        np.add.at(nb, (slice(None), src), cur[:, indices].astype(np.int64))
        pressure = np.where(deg == 0, 0.0, beta * nb / safe_deg)
        z = tau * delta + (1.0 - tau) * u
        stay = gamma - u > 0.0
        catch = pressure - z > 0.0
        cur = np.where(cur == 1, stay, catch).astype(np.uint8)
        counts[:, t + 1] = cur.sum(axis=1)
    return counts, cur
