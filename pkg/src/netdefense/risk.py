"""Contagion risk measures.

Every measure here is linear in the attack distribution: the risk of node i is
``sum_s phi_s W[i, s]`` where ``W[i, s]`` is the risk of i when the seed is s.
``connection_matrix`` returns that matrix (and, where cheap, its derivative
with respect to the defense vector), which is what the game and equilibrium
code consumes. The per-measure functions return :class:`RiskVector`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import kernels
from .graph import Network

EXACT_MAX_N = 16
WALK_MAX_L = 8
WALK_MAX_COUNT = 50_000_000
MC_CHUNK = 8192


class RiskError(ValueError):
    pass


# --- vectors --------------------------------------------------------------


def as_defense(q, n: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (n,):
        raise RiskError(f"defense vector has shape {q.shape}, expected ({n},)")
    if not np.isfinite(q).all() or (q < 0).any() or (q > 1).any():
        raise RiskError("defense entries must lie in [0, 1]")
    return q


def as_attack(phi, n: int) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (n,):
        raise RiskError(f"attack vector has shape {phi.shape}, expected ({n},)")
    if not np.isfinite(phi).all() or (phi < 0).any() or abs(phi.sum() - 1.0) > 1e-12:
        raise RiskError("attack vector must be a probability distribution")
    return phi


@dataclass(frozen=True)
class RiskVector:
    values: np.ndarray
    kind: str
    stderr: np.ndarray | None = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


# --- risk specs -----------------------------------------------------------


@dataclass(frozen=True)
class ExactRisk:
    kind = "exact"


@dataclass(frozen=True)
class MonteCarloRisk:
    samples: int = 100_000
    seed: int = 0
    kind = "monte_carlo"


@dataclass(frozen=True)
class WalkRisk:
    L: int = 4
    mode: str = "exact_distinct"
    zero_diagonal: bool = False
    kind = "walk"


@dataclass(frozen=True)
class ActivationRisk:
    f: str = "step"
    L: int = 4
    samples: int = 100_000
    seed: int = 0
    include_seed: bool = True
    kind = "activation"


RiskSpec = ExactRisk | MonteCarloRisk | WalkRisk | ActivationRisk
_SPECS = {c.kind: c for c in (ExactRisk, MonteCarloRisk, WalkRisk, ActivationRisk)}


def risk_from_dict(d: dict) -> RiskSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _SPECS:
        raise RiskError(f"unknown risk kind {kind!r}")
    try:
        spec = _SPECS[kind](**d)
    except TypeError as exc:
        raise RiskError(f"bad risk spec: {exc}") from None
    if isinstance(spec, WalkRisk) and spec.mode not in ("exact_distinct", "matrix_power"):
        raise RiskError(f"unknown walk mode {spec.mode!r}")
    if isinstance(spec, ActivationRisk) and spec.f not in ACTIVATIONS:
        raise RiskError(f"unknown activation {spec.f!r}")
    return spec


def risk_to_dict(spec: RiskSpec) -> dict:
    return {"kind": spec.kind, **asdict(spec)}


# --- static contagion -----------------------------------------------------


def infected_set(net: Network, x, s: int) -> set[int]:
    """Nodes infected from seed ``s`` given susceptibility vector ``x``."""
    x = np.asarray(x).astype(bool)
    if not 0 <= s < net.n:
        raise RiskError(f"seed {s} out of range")
    if not x[s]:
        return set()
    indptr, indices = net.csr
    labels = kernels.backend().components_masked(indptr, indices, x.astype(np.uint8))
    return set(np.flatnonzero(labels == labels[s]).tolist())


@lru_cache(maxsize=8)
def _state_table(net: Network) -> tuple[np.ndarray, np.ndarray]:
    """``(alive, same)`` over all 2^n states; ``same[x]`` is the flattened
    same-component indicator of the transmission network of state x."""
    indptr, indices = net.csr
    labels = kernels.backend().state_labels(indptr, indices, net.n)
    alive = labels >= 0
    same = (labels[:, :, None] == labels[:, None, :]) & alive[:, :, None] & alive[:, None, :]
    return alive, same.reshape(len(labels), -1)


def _loo_products(f: np.ndarray) -> np.ndarray:
    """Products of each row of ``f`` leaving one column out."""
    ones = np.ones((f.shape[0], 1))
    left = np.cumprod(np.hstack([ones, f[:, :-1]]), axis=1)
    right = np.cumprod(np.hstack([ones, f[:, :0:-1]]), axis=1)[:, ::-1]
    return left * right


def _exact_enumeration(net: Network, q: np.ndarray, grad: bool):
    n = net.n
    alive, same = _state_table(net)
    f = np.where(alive, 1.0 - q, q)
    w = np.prod(f, axis=1)
    W = np.zeros(n * n)
    dW = np.zeros((n, n * n)) if grad else None
    if grad:
        g = _loo_products(f) * np.where(alive, -1.0, 1.0)
    for lo in range(0, len(w), MC_CHUNK):
        block = same[lo : lo + MC_CHUNK].astype(np.float64)
        W += w[lo : lo + MC_CHUNK] @ block
        if grad:
            dW += g[lo : lo + MC_CHUNK].T @ block
    W = W.reshape(n, n)
    if grad:
        dW = dW.reshape(n, n, n).transpose(1, 2, 0).copy()
    return W, dW


@lru_cache(maxsize=8)
def _forest_paths(net: Network) -> np.ndarray:
    """``onpath[i, s, k]``: k lies on the i-s path (endpoints included)."""
    n = net.n
    indptr, indices = net.csr
    onpath = np.zeros((n, n, n), dtype=bool)
    for i in range(n):
        parent = np.full(n, -2, dtype=np.int64)
        parent[i] = -1
        order = [i]
        for v in order:
            for u in indices[indptr[v] : indptr[v + 1]]:
                if parent[u] == -2:
                    parent[u] = v
                    order.append(int(u))
        for s in order:
            v = s
            while v != -1:
                onpath[i, s, v] = True
                v = parent[v]
    return onpath


def _exact_forest(net: Network, q: np.ndarray, grad: bool):
    n = net.n
    onpath = _forest_paths(net)
    reach = onpath.any(axis=2)
    f = np.where(onpath, 1.0 - q[None, None, :], 1.0).reshape(n * n, n)
    W = np.where(reach, np.prod(f, axis=1).reshape(n, n), 0.0)
    dW = None
    if grad:
        dW = -np.where(onpath, _loo_products(f).reshape(n, n, n), 0.0)
    return W, dW


def exact_connection_matrix(net: Network, q, grad: bool = False):
    """``W[i, s] = P(i and s both susceptible and connected in T(X))``."""
    q = as_defense(q, net.n)
    if net.is_forest:
        return _exact_forest(net, q, grad)
    if net.n > EXACT_MAX_N:
        raise RiskError(
            f"exact enumeration is limited to n <= {EXACT_MAX_N} (or forests); "
            f"got n={net.n}, use a monte_carlo risk spec"
        )
    return _exact_enumeration(net, q, grad)


def state_weights(net: Network, q) -> np.ndarray:
    """``prod_i (1-q_i)^X_i q_i^(1-X_i)`` for every state, bit i of the index = X_i."""
    q = as_defense(q, net.n)
    if net.n > EXACT_MAX_N:
        raise RiskError(f"enumeration limited to n <= {EXACT_MAX_N}")
    states = np.arange(1 << net.n)
    alive = ((states[:, None] >> np.arange(net.n)) & 1).astype(bool)
    return np.prod(np.where(alive, 1.0 - q, q), axis=1)


def infection_probability_exact(net: Network, q, phi) -> RiskVector:
    phi = as_attack(phi, net.n)
    W, _ = exact_connection_matrix(net, q)
    return RiskVector(W @ phi, "probability")


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _chunks(samples: int) -> list[tuple[int, int]]:
    return [(c, min(MC_CHUNK, samples - lo)) for c, lo in enumerate(range(0, samples, MC_CHUNK))]


def _map_chunks(fn: Callable, chunks, workers: int):
    if workers <= 1:
        return [fn(*c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


def _sample(n: int, q: np.ndarray, phi: np.ndarray | None, seed: int, chunk: int, size: int):
    rng = _chunk_rng(seed, chunk)
    seeds = rng.choice(n, size=size, p=phi) if phi is not None else None
    susceptible = (rng.random((size, n)) >= q).astype(np.uint8)
    return seeds, susceptible


def infection_probability_mc(
    net: Network, q, phi, samples: int = 100_000, seed: int = 0, workers: int = 1
) -> RiskVector:
    """Monte-Carlo estimate over joint draws of (seed, susceptibility).

    Sample m depends only on ``(seed, m)``: draws are generated in fixed-size
    chunks, each from its own child of the seed sequence.
    """
    if samples < 1:
        raise RiskError("samples must be >= 1")
    n = net.n
    q = as_defense(q, n)
    phi = as_attack(phi, n)
    indptr, indices = net.csr
    k = kernels.backend()

    def run(chunk, size):
        seeds, x = _sample(n, q, phi, seed, chunk, size)
        return k.mc_infected_counts(indptr, indices, x, seeds.astype(np.int64))

    counts = np.sum(_map_chunks(run, _chunks(samples), workers), axis=0)
    p = counts / samples
    return RiskVector(p, "probability", np.sqrt(p * (1 - p) / samples))


def mc_connection_matrix(net: Network, q, samples: int, seed: int, workers: int = 1) -> np.ndarray:
    """Monte-Carlo estimate of the same-component matrix of :func:`exact_connection_matrix`."""
    n = net.n
    q = as_defense(q, n)
    indptr, indices = net.csr
    k = kernels.backend()

    def run(chunk, size):
        _, x = _sample(n, q, None, seed, chunk, size)
        labels = np.stack([k.components_masked(indptr, indices, row) for row in x])
        live = labels >= 0
        eq = (labels[:, :, None] == labels[:, None, :]) & live[:, :, None] & live[:, None, :]
        return eq.sum(axis=0)

    return np.sum(_map_chunks(run, _chunks(samples), workers), axis=0) / samples


# --- walk counts ----------------------------------------------------------


@lru_cache(maxsize=64)
def _walk_count_bound(net: Network, L: int) -> float:
    a = net.adjacency.astype(np.float64)
    v = np.ones(net.n)
    total = 0.0
    for _ in range(L):
        v = a @ v
        total += v.sum()
    return total


def _matrix_power_walks(net: Network, q: np.ndarray, L: int, grad: bool):
    n = net.n
    A = net.adjacency.astype(np.float64)
    keep = 1.0 - q
    B = A * keep[None, :]
    P = [np.eye(n)]
    for _ in range(L):
        P.append(P[-1] @ B)
    W = keep[:, None] * sum(P[1:])
    if not grad:
        return W, None
    dW = np.zeros((n, n, n))
    DPA = [keep[:, None] * (Pt @ A) for Pt in P[:L]]
    for ell in range(1, L + 1):
        dW -= np.einsum("ks,ik->isk", P[ell], np.eye(n))
        for t in range(ell):
            dW -= np.einsum("ik,ks->isk", DPA[t], P[ell - 1 - t])
    return W, dW


def walk_connection_matrix(
    net: Network, q, L: int = 4, mode: str = "exact_distinct", grad: bool = False, zero_diagonal: bool = False
):
    """Expected number of length-1..L susceptible walks between every node pair."""
    if L < 1:
        raise RiskError("L must be >= 1")
    q = as_defense(q, net.n)
    if mode == "exact_distinct":
        if L > WALK_MAX_L:
            raise RiskError(f"exact_distinct supports L <= {WALK_MAX_L}; use mode='matrix_power'")
        if _walk_count_bound(net, L) > WALK_MAX_COUNT:
            raise RiskError("too many walks for exact_distinct; use mode='matrix_power'")
        indptr, indices = net.csr
        W, dW = kernels.backend().walk_matrix(indptr, indices, 1.0 - q, L, grad)
    elif mode == "matrix_power":
        W, dW = _matrix_power_walks(net, q, L, grad)
    else:
        raise RiskError(f"unknown walk mode {mode!r}")
    if zero_diagonal:
        W = W.copy()
        np.fill_diagonal(W, 0.0)
        if dW is not None:
            idx = np.arange(net.n)
            dW[idx, idx, :] = 0.0
    return W, dW


def walk_count_risk(
    net: Network, q, phi, L: int = 4, mode: str = "exact_distinct", zero_diagonal: bool = False
) -> RiskVector:
    phi = as_attack(phi, net.n)
    W, _ = walk_connection_matrix(net, q, L, mode, zero_diagonal=zero_diagonal)
    return RiskVector(W @ phi, f"walk:{mode}")


# --- activation family ----------------------------------------------------

ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "step": lambda N: (N >= 1).astype(np.float64),
    "linear": lambda N: N.astype(np.float64),
    "log1p": np.log1p,
    "sqrt": np.sqrt,
    "saturating": lambda N: N / (1.0 + N),
}


def _walk_counts_from_seeds(A: np.ndarray, x: np.ndarray, seeds: np.ndarray, L: int, include_seed: bool):
    """``N[m, i]`` = number of length<=L walks i -> seeds[m] in T(x[m])."""
    size, n = x.shape
    xf = x.astype(np.float64)
    v = np.zeros((size, n))
    v[np.arange(size), seeds] = xf[np.arange(size), seeds]
    N = v.copy() if include_seed else np.zeros_like(v)
    for _ in range(L):
        v = xf * (v @ A)
        N += v
    return N


def activation_risk(
    net: Network,
    q,
    phi,
    f: str = "step",
    L: int = 4,
    samples: int = 100_000,
    seed: int = 0,
    include_seed: bool = True,
    workers: int = 1,
) -> RiskVector:
    """Monte-Carlo estimate of ``E[f(N_i)]`` with N_i the susceptible walk count i -> seed.

    ``include_seed`` counts the zero-length walk at the seed itself, so that
    ``f='step'`` converges to the infection probability as L grows.
    """
    if f not in ACTIVATIONS:
        raise RiskError(f"unknown activation {f!r}; choose from {sorted(ACTIVATIONS)}")
    if samples < 1:
        raise RiskError("samples must be >= 1")
    n = net.n
    q = as_defense(q, n)
    phi = as_attack(phi, n)
    A = net.adjacency.astype(np.float64)
    fn = ACTIVATIONS[f]

    def run(chunk, size):
        seeds, x = _sample(n, q, phi, seed, chunk, size)
        vals = fn(_walk_counts_from_seeds(A, x, seeds, L, include_seed))
        return vals.sum(axis=0), (vals**2).sum(axis=0)

    parts = _map_chunks(run, _chunks(samples), workers)
    s1 = np.sum([p[0] for p in parts], axis=0)
    s2 = np.sum([p[1] for p in parts], axis=0)
    mean = s1 / samples
    var = np.maximum(s2 / samples - mean**2, 0.0)
    return RiskVector(mean, f"activation:{f}", np.sqrt(var / samples))


def activation_connection_matrix(
    net: Network, q, f: str, L: int, samples: int, seed: int, include_seed: bool = True
) -> np.ndarray:
    """``W[i, s] = E_X[f(N_i(s, X))]`` estimated from ``samples`` draws of X."""
    n = net.n
    q = as_defense(q, n)
    A = net.adjacency.astype(np.float64)
    fn = ACTIVATIONS[f]
    W = np.zeros((n, n))
    for chunk, size in _chunks(samples):
        _, x = _sample(n, q, None, seed, chunk, size)
        for s in range(n):
            seeds = np.full(size, s)
            W[:, s] += fn(_walk_counts_from_seeds(A, x, seeds, L, include_seed)).sum(axis=0)
    return W / samples


# --- dispatch -------------------------------------------------------------


def default_risk(net: Network) -> RiskSpec:
    """Exact risk where enumeration is feasible, walk counts otherwise."""
    if net.n <= EXACT_MAX_N or net.is_forest:
        return ExactRisk()
    return WalkRisk()


def connection_matrix(net: Network, q, spec: RiskSpec | None = None, grad: bool = False):
    """``(W, dW)`` for the given risk spec; ``dW`` is None unless requested.

    Sampling-based specs do not provide derivatives.
    """
    spec = spec or default_risk(net)
    if isinstance(spec, ExactRisk):
        return exact_connection_matrix(net, q, grad)
    if isinstance(spec, WalkRisk):
        return walk_connection_matrix(net, q, spec.L, spec.mode, grad, spec.zero_diagonal)
    if grad:
        raise RiskError(f"risk kind {spec.kind!r} has no derivative; use exact or walk")
    if isinstance(spec, MonteCarloRisk):
        return mc_connection_matrix(net, q, spec.samples, spec.seed), None
    if isinstance(spec, ActivationRisk):
        W = activation_connection_matrix(net, q, spec.f, spec.L, spec.samples, spec.seed, spec.include_seed)
        return W, None
    raise RiskError(f"not a risk spec: {spec!r}")


def risk_vector(net: Network, q, phi, spec: RiskSpec | None = None) -> RiskVector:
    spec = spec or default_risk(net)
    if isinstance(spec, MonteCarloRisk):
        return infection_probability_mc(net, q, phi, spec.samples, spec.seed)
    if isinstance(spec, ActivationRisk):
        return activation_risk(net, q, phi, spec.f, spec.L, spec.samples, spec.seed, spec.include_seed)
    phi = as_attack(phi, net.n)
    W, _ = connection_matrix(net, q, spec)
    return RiskVector(W @ phi, spec.kind)


# --- reach decomposition -------------------------------------------------


def reach_decomposition(net: Network, q, phi, i: int, j: int) -> tuple[float, float]:
    """``(P~_i, Q_ji)`` by exhaustive enumeration.

    ``P~_i`` is the probability the infection reaches i (so ``P_i = (1-q_i) P~_i``);
    ``Q_ji`` is the probability it reaches j through i, conditioned on i being
    susceptible, so that ``P~_j(q) = P~_j(q with q_i=1) + (1-q_i) Q_ji``.
    """
    n = net.n
    q = as_defense(q, n)
    phi = as_attack(phi, n)
    if i == j:
        raise RiskError("reach_decomposition needs i != j")

    def p_tilde(node, qq):
        qq = qq.copy()
        qq[node] = 0.0
        W, _ = exact_connection_matrix(net, qq)
        return float(W[node] @ phi)

    pt_i = p_tilde(i, q)
    open_i, closed_i = q.copy(), q.copy()
    open_i[i], closed_i[i] = 0.0, 1.0
    q_ji = p_tilde(j, open_i) - p_tilde(j, closed_i)
    return pt_i, q_ji
