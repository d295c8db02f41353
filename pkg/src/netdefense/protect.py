"""1-point and 2-point protection tensors and their weighted reductions.

Both tensors are stored implicitly through component labels: for every
removed node j (resp. pair {i, j}) we keep the component labelling of the
graph with that node (pair) deleted. An entry is a comparison of labels, so
storage is O(n^2) for the 1-point tensor and O(n^3) for the 2-point tensor,
and every weighted reduction is a handful of ``bincount`` calls.

Conventions for the 1-point tensor (``a[j, i, k]``):

* ``a[j, i, k] = 1`` for distinct i, k, j iff i and k are connected in G
  and disconnected once j is removed;
* ``a[j, i, i] = 0`` for i != j;
* ``a[j, i, j] = a[j, j, i] = 1`` whenever i and j are connected in G,
  including ``a[j, j, j] = 1``.

The 2-point tensor entry ``b[(i, j), k, s]`` is zero whenever
``{k, s}`` meets ``{i, j}`` or ``k == s``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator

import numpy as np

from . import kernels
from .graph import Network


class TensorMismatch(ValueError):
    pass


def _vec(v, n: int, name: str = "v") -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise TensorMismatch(f"{name} has shape {v.shape}, expected ({n},)")
    return v


def _group_sums(labels: np.ndarray, v: np.ndarray, size: int) -> np.ndarray:
    """Per-node sum of ``v`` over the node's group; nodes labelled -1 get 0."""
    alive = labels >= 0
    tot = np.bincount(labels[alive], weights=v[alive], minlength=size)
    out = np.zeros(labels.shape[0])
    out[alive] = tot[labels[alive]]
    return out


@dataclass(frozen=True, eq=False)
class OnePointTensor:
    n: int
    comp: np.ndarray  # component labels of G
    cut: np.ndarray  # cut[j] = labels of G - {j}, -1 at j

    @property
    def connected(self) -> bool:
        return bool(self.comp.max() == 0)

    def __getitem__(self, key) -> int:
        j, i, k = (int(x) for x in key)
        same = self.comp[i] == self.comp[k]
        if i == j or k == j:
            return int(same)
        if i == k:
            return 0
        return int(same and self.cut[j, i] != self.cut[j, k])

    def dense(self, j: int) -> np.ndarray:
        """The n x n slice ``a[j, :, :]`` as a boolean array."""
        same = self.comp[:, None] == self.comp[None, :]
        c = self.cut[j]
        split = c[:, None] != c[None, :]
        np.fill_diagonal(split, False)
        split[j, :] = True
        split[:, j] = True
        return same & split

    def reduce_vec(self, j: int, v) -> np.ndarray:
        """``out[i] = sum_k a[j, i, k] v[k]``."""
        v = _vec(v, self.n)
        whole = _group_sums(self.comp, v, self.n)
        part = _group_sums(self.cut[j], v, self.n)
        out = whole - part
        out[j] = whole[j]
        return out

    def reduce_all(self, v) -> np.ndarray:
        """Matrix ``R[j, i] = a^j_i(v)`` for every removed node j."""
        v = _vec(v, self.n)
        return np.stack([self.reduce_vec(j, v) for j in range(self.n)])

    def reduce_scalar(self, i: int, v, w) -> float:
        """``sum_{j,k} a[i, j, k] v[j] w[k]``; symmetric in ``v`` and ``w``."""
        v = _vec(v, self.n, "v")
        w = _vec(w, self.n, "w")
        return float(v @ self.reduce_vec(i, w))

    def entries(self) -> Iterator[tuple[int, int, int]]:
        """Nonzero entries ``(j, i, k)`` with ``i <= k``."""
        for j in range(self.n):
            d = np.triu(self.dense(j))
            for i, k in zip(*np.nonzero(d)):
                yield j, int(i), int(k)

    def nnz(self) -> int:
        """Number of nonzero ordered entries."""
        return int(sum(self.dense(j).sum() for j in range(self.n)))


@dataclass(frozen=True, eq=False)
class TwoPointTensor:
    n: int
    one: OnePointTensor
    pair_cut: np.ndarray  # pair_cut[i, j] = labels of G - {i, j} for i < j

    def __getitem__(self, key) -> int:
        i, j, k, s = (int(x) for x in key)
        if i == j or k == s or k in (i, j) or s in (i, j):
            return 0
        if i > j:
            i, j = j, i
        cut = self.one.cut
        if cut[i, k] != cut[i, s] or cut[j, k] != cut[j, s]:
            return 0
        if self.one.comp[k] != self.one.comp[s]:
            return 0
        pc = self.pair_cut[i, j]
        return int(pc[k] != pc[s])

    def _labels(self, i: int, j: int) -> np.ndarray:
        return self.pair_cut[min(i, j), max(i, j)]

    def b_sum(self, i: int, j: int, v, w) -> float:
        """``sum_{k,s} b[(i,j), k, s] v[k] w[s]``."""
        if i == j:
            return 0.0
        v = _vec(v, self.n, "v")
        w = _vec(w, self.n, "w")
        n = self.n
        alive = np.ones(n, dtype=bool)
        alive[[i, j]] = False
        ci, cj = self.one.cut[i], self.one.cut[j]
        group = np.where(alive, ci * n + cj, -1)
        _, group = np.unique(group, return_inverse=True)
        group = np.where(alive, group, -1)
        coarse = _pair_sum(group, v, w)
        fine = _pair_sum(self._labels(i, j), v, w)
        return coarse - fine

    def dense(self, i: int, j: int) -> np.ndarray:
        n = self.n
        if i == j:
            return np.zeros((n, n), dtype=bool)
        ci, cj = self.one.cut[i], self.one.cut[j]
        pc = self._labels(i, j)
        out = (
            (ci[:, None] == ci[None, :])
            & (cj[:, None] == cj[None, :])
            & (pc[:, None] != pc[None, :])
        )
        out[[i, j], :] = False
        out[:, [i, j]] = False
        return out

    def entries(self) -> Iterator[tuple[int, int, int, int]]:
        """Nonzero entries ``(i, j, k, s)`` with ``i < j`` and ``k < s``."""
        for i, j in combinations(range(self.n), 2):
            d = np.triu(self.dense(i, j))
            for k, s in zip(*np.nonzero(d)):
                yield i, j, int(k), int(s)


def _pair_sum(labels: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    alive = labels >= 0
    size = int(labels.max()) + 1 if alive.any() else 0
    V = np.bincount(labels[alive], weights=v[alive], minlength=size)
    W = np.bincount(labels[alive], weights=w[alive], minlength=size)
    return float(V @ W)


def one_point_protection(net: Network) -> OnePointTensor:
    k = kernels.backend()
    indptr, indices = net.csr
    cut = np.empty((net.n, net.n), dtype=np.int64)
    mask = np.ones(net.n, dtype=np.uint8)
    for j in range(net.n):
        mask[j] = 0
        cut[j] = k.components_masked(indptr, indices, mask)
        mask[j] = 1
    comp = k.components_masked(indptr, indices, mask)
    for arr in (cut, comp):
        arr.setflags(write=False)
    return OnePointTensor(net.n, comp, cut)


def two_point_protection(net: Network, a: OnePointTensor) -> TwoPointTensor:
    if a.n != net.n:
        raise TensorMismatch(f"1-point tensor is for n={a.n}, network has n={net.n}")
    k = kernels.backend()
    indptr, indices = net.csr
    n = net.n
    pair_cut = np.full((n, n, n), -1, dtype=np.int32)
    mask = np.ones(n, dtype=np.uint8)
    for i, j in combinations(range(n), 2):
        mask[i] = mask[j] = 0
        pair_cut[i, j] = k.components_masked(indptr, indices, mask)
        mask[i] = mask[j] = 1
    pair_cut.setflags(write=False)
    return TwoPointTensor(n, a, pair_cut)


def reduce_a_vec(a: OnePointTensor, j: int, v) -> np.ndarray:
    return a.reduce_vec(j, v)


def reduce_a_scalar(a: OnePointTensor, i: int, v, w) -> float:
    return a.reduce_scalar(i, v, w)


def reduce_b(b: TwoPointTensor, a: OnePointTensor, i: int, j: int, v, w) -> float:
    """``(1 - delta_ij) sum_{k,s} (b[(i,j),k,s] - a[i,k,s] a[j,k,s]) v[k] w[s]``."""
    if b.n != a.n:
        raise TensorMismatch("tensors come from different networks")
    if i == j:
        return 0.0
    v = _vec(v, a.n, "v")
    w = _vec(w, a.n, "w")
    overlap = a.dense(i) & a.dense(j)
    return b.b_sum(i, j, v, w) - float(v @ overlap @ w)


def reduce_b_matrix(b: TwoPointTensor, a: OnePointTensor, v, w) -> np.ndarray:
    """All ``b_ij(v, w)`` at once; zero diagonal."""
    n = a.n
    v = _vec(v, n, "v")
    w = _vec(w, n, "w")
    flat = np.stack([a.dense(j).ravel() for j in range(n)]).astype(np.float64)
    overlap = (flat * np.outer(v, w).ravel()) @ flat.T
    out = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        out[i, j] = out[j, i] = b.b_sum(i, j, v, w) - overlap[i, j]
    return out


def dump_one_point(a: OnePointTensor, fh) -> int:
    count = 0
    for j, i, k in a.entries():
        fh.write(json.dumps({"j": j, "i": i, "k": k}) + "\n")
        count += 1
    return count


def dump_two_point(b: TwoPointTensor, fh) -> int:
    count = 0
    for i, j, k, s in b.entries():
        fh.write(json.dumps({"i": i, "j": j, "k": k, "s": s}) + "\n")
        count += 1
    return count
