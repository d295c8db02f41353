"""Undirected networks, topology generators and removal-connectivity queries."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Network:
    """Simple undirected graph backed by a symmetric 0/1 adjacency matrix.

    Node indices are 0-based. Instances are immutable; derived structures
    (CSR arrays, component labels) are computed lazily and cached.
    """

    adjacency: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=np.int8, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise GraphError("adjacency must be a non-empty square matrix")
        if not np.isin(a, (0, 1)).all():
            raise GraphError("adjacency entries must be 0 or 1")
        if (a != a.T).any():
            raise GraphError("adjacency must be symmetric")
        if a.diagonal().any():
            raise GraphError("self-loops are not allowed")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @cached_property
    def degrees(self) -> np.ndarray:
        d = self.adjacency.sum(axis=1).astype(np.int64)
        d.setflags(write=False)
        return d

    @cached_property
    def edges(self) -> list[tuple[int, int]]:
        i, k = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(a), int(b)) for a, b in zip(i, k)]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` of the adjacency, int64, neighbours sorted."""
        m = csr_matrix(self.adjacency)
        m.sort_indices()
        return m.indptr.astype(np.int64), m.indices.astype(np.int64)

    @cached_property
    def components(self) -> np.ndarray:
        """Connected-component label of every node."""
        _, labels = connected_components(csr_matrix(self.adjacency), directed=False)
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        return labels

    @property
    def is_connected(self) -> bool:
        return bool(self.components.max() == 0)

    @cached_property
    def is_forest(self) -> bool:
        n_comp = int(self.components.max()) + 1
        return len(self.edges) == self.n - n_comp

    @cached_property
    def key(self) -> bytes:
        return self.n.to_bytes(4, "little") + np.packbits(self.adjacency).tobytes()

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"Network(n={self.n}, edges={len(self.edges)})"


def build_network(edges: Iterable[Sequence[int]], n: int, name: str = "") -> Network:
    """Build a network from an edge list; duplicate edges collapse."""
    if n < 1:
        raise GraphError(f"node count must be positive, got {n}")
    a = np.zeros((n, n), dtype=np.int8)
    for e in edges:
        if len(e) != 2:
            raise GraphError(f"edge {e!r} is not a pair")
        i, k = int(e[0]), int(e[1])
        if not (0 <= i < n and 0 <= k < n):
            raise GraphError(f"edge ({i}, {k}) has an index outside [0, {n})")
        if i == k:
            raise GraphError(f"self-loop at node {i}")
        a[i, k] = a[k, i] = 1
    return Network(a, name=name)


# --- topology specs -------------------------------------------------------


@dataclass(frozen=True)
class ExplicitTopology:
    n: int
    edges: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class ErdosRenyiTopology:
    n: int
    c: float
    seed: int = 0


@dataclass(frozen=True)
class TreeTopology:
    branching: int
    levels: int


@dataclass(frozen=True)
class CommunityTopology:
    sizes: tuple[int, ...]
    bridges: tuple[tuple[int, int], ...]


TopologySpec = ExplicitTopology | ErdosRenyiTopology | TreeTopology | CommunityTopology


def topology_from_dict(d: dict) -> TopologySpec:
    kind = d.get("kind")
    try:
        if kind == "explicit":
            return ExplicitTopology(int(d["n"]), tuple((int(a), int(b)) for a, b in d["edges"]))
        if kind == "erdos_renyi":
            return ErdosRenyiTopology(int(d["n"]), float(d["c"]), int(d.get("seed", 0)))
        if kind == "tree":
            return TreeTopology(int(d["branching"]), int(d["levels"]))
        if kind == "community":
            return CommunityTopology(
                tuple(int(s) for s in d["sizes"]),
                tuple((int(a), int(b)) for a, b in d.get("bridges", [])),
            )
    except KeyError as exc:
        raise GraphError(f"topology {kind!r} is missing field {exc.args[0]!r}") from None
    raise GraphError(f"unknown topology kind {kind!r}")


def topology_to_dict(spec: TopologySpec) -> dict:
    if isinstance(spec, ExplicitTopology):
        return {"kind": "explicit", "n": spec.n, "edges": [list(e) for e in spec.edges]}
    if isinstance(spec, ErdosRenyiTopology):
        return {"kind": "erdos_renyi", "n": spec.n, "c": spec.c, "seed": spec.seed}
    if isinstance(spec, TreeTopology):
        return {"kind": "tree", "branching": spec.branching, "levels": spec.levels}
    if isinstance(spec, CommunityTopology):
        return {"kind": "community", "sizes": list(spec.sizes), "bridges": [list(b) for b in spec.bridges]}
    raise TypeError(f"not a topology spec: {spec!r}")


def erdos_renyi(n: int, c: float, seed: int = 0) -> Network:
    """G(n, p) with p = c / (n - 1); no connectivity repair."""
    if n < 2:
        raise GraphError("erdos_renyi needs n >= 2")
    if not 0 < c <= n - 1:
        raise GraphError(f"connectivity c must lie in (0, {n - 1}], got {c}")
    rng = np.random.default_rng(seed)
    p = c / (n - 1)
    upper = np.triu(rng.random((n, n)) < p, 1)
    a = (upper | upper.T).astype(np.int8)
    return Network(a, name=f"er(n={n},c={c},seed={seed})")


def tree(branching: int, levels: int) -> Network:
    """Complete tree; node 0 is the root and nodes are numbered level by level."""
    if branching < 1 or levels < 0:
        raise GraphError("tree needs branching >= 1 and levels >= 0")
    edges = []
    level = [0]
    nxt = 1
    for _ in range(levels):
        new = []
        for parent in level:
            for _ in range(branching):
                edges.append((parent, nxt))
                new.append(nxt)
                nxt += 1
        level = new
    return build_network(edges, nxt, name=f"tree(b={branching},levels={levels})")


def tree_levels(branching: int, levels: int) -> list[list[int]]:
    """Node indices per level of :func:`tree` with the same parameters."""
    out, start = [], 0
    for ell in range(levels + 1):
        size = branching**ell
        out.append(list(range(start, start + size)))
        start += size
    return out


def community(sizes: Sequence[int], bridges: Sequence[Sequence[int]]) -> Network:
    """Complete graphs on consecutive index blocks joined by bridge edges."""
    if not sizes or any(int(s) < 1 for s in sizes):
        raise GraphError("community sizes must be positive")
    edges = []
    start = 0
    for s in sizes:
        block = range(start, start + s)
        edges.extend((i, k) for i in block for k in block if i < k)
        start += s
    edges.extend((int(a), int(b)) for a, b in bridges)
    return build_network(edges, start, name=f"community{tuple(sizes)}")


def generate_topology(spec: TopologySpec) -> Network:
    if isinstance(spec, ExplicitTopology):
        return build_network(spec.edges, spec.n)
    if isinstance(spec, ErdosRenyiTopology):
        return erdos_renyi(spec.n, spec.c, spec.seed)
    if isinstance(spec, TreeTopology):
        return tree(spec.branching, spec.levels)
    if isinstance(spec, CommunityTopology):
        return community(spec.sizes, spec.bridges)
    raise GraphError(f"not a topology spec: {spec!r}")


def example_network() -> Network:
    """Six-node example used to illustrate 1- and 2-point protection."""
    return build_network([(0, 1), (0, 2), (0, 3), (1, 4), (3, 4), (4, 5)], 6, name="example")


def example_communities() -> Network:
    """Three complete groups of ten joined by the bridges (9, 10) and (19, 20)."""
    return community([10, 10, 10], [(9, 10), (19, 20)])


# --- connectivity ---------------------------------------------------------


def component_labels(net: Network, removed: Iterable[int] = ()) -> np.ndarray:
    """Component labels of ``net`` with ``removed`` deleted; removed nodes get -1."""
    from . import kernels

    mask = np.ones(net.n, dtype=np.uint8)
    for r in removed:
        mask[int(r)] = 0
    indptr, indices = net.csr
    return kernels.backend().components_masked(indptr, indices, mask)


def connected_without(net: Network, i: int, k: int, removed: Iterable[int] = ()) -> bool:
    """True iff a path from ``i`` to ``k`` avoids every node in ``removed``."""
    removed = set(int(r) for r in removed)
    if i in removed or k in removed:
        raise GraphError("endpoints must not be removed")
    if i == k:
        raise GraphError("endpoints must differ")
    labels = component_labels(net, removed)
    return bool(labels[i] == labels[k])


# --- edge-list files --------------------------------------------------------


def read_edge_list(path: str | Path) -> Network:
    """Read ``n <count>`` followed by one whitespace-separated edge per line."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("n "):
        raise GraphError(f"{path}: first line must be 'n <count>'")
    n = int(lines[0].split()[1])
    edges = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError(f"{path}:{lineno}: expected two integers")
        edges.append((int(parts[0]), int(parts[1])))
    return build_network(edges, n)


def write_edge_list(net: Network, path: str | Path) -> None:
    body = "".join(f"{i} {k}\n" for i, k in net.edges)
    Path(path).write_text(f"n {net.n}\n{body}")
