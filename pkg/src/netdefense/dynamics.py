"""Discrete-time contagion on a defended network.

One transition rule covers SI, SIS and threshold dynamics. An infected node
stays infected iff ``gamma - u > 0``; a susceptible node becomes infected iff
``beta_i / d_i * (# infected neighbours) - Z > 0`` with
``Z = tau * delta + (1 - tau) * u``. One uniform ``u`` is drawn per node per
step. Strict inequalities throughout, and isolated nodes feel no pressure.

Run r draws everything from its own child of the seed sequence, so results do
not depend on how runs are batched.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .graph import Network
from .risk import as_attack, as_defense

RUN_BATCH = 256
STRATEGIES = ("none", "optimal", "reshuffled")


class DynamicsError(ValueError):
    pass


@dataclass(frozen=True)
class DynamicsParams:
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 0.0
    tau: float = 0.0
    horizon: int = 50
    rescale_beta: bool = True

    def __post_init__(self):
        for name in ("beta", "gamma", "delta", "tau"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DynamicsError(f"{name} must lie in [0, 1], got {v}")
        if self.horizon < 1:
            raise DynamicsError("horizon must be a positive integer")

    @classmethod
    def si(cls, beta: float = 1.0, horizon: int = 50) -> "DynamicsParams":
        return cls(beta=beta, gamma=1.0, tau=0.0, horizon=horizon)

    @classmethod
    def sis(cls, gamma: float = 0.8, beta: float = 1.0, horizon: int = 50) -> "DynamicsParams":
        return cls(beta=beta, gamma=gamma, tau=0.0, horizon=horizon)

    @classmethod
    def threshold(cls, gamma: float = 0.9, delta: float = 0.2, beta: float = 1.0, horizon: int = 50) -> "DynamicsParams":
        return cls(beta=beta, gamma=gamma, delta=delta, tau=1.0, horizon=horizon)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Trajectory:
    fractions: np.ndarray
    final_state: np.ndarray
    asymptotic: float
    runs: np.ndarray | None = field(default=None, repr=False)  # per-run fractions (R, T+1)

    @property
    def run_asymptotic(self) -> np.ndarray:
        if self.runs is None:
            raise DynamicsError("per-run trajectories were not kept")
        return self.runs[:, -tail_length(self.runs.shape[1] - 1) :].mean(axis=1)


def tail_length(horizon: int) -> int:
    """Number of trailing steps averaged into the asymptotic fraction."""
    return min(horizon + 1, max(10, horizon // 10))


def node_beta(q: np.ndarray, params: DynamicsParams) -> np.ndarray:
    return (1.0 - q) * params.beta if params.rescale_beta else np.full(len(q), params.beta)


def _run_rng(seed: int, run: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run, stream)))


def sample_initial(net: Network, q, phi, seed=0) -> np.ndarray:
    """Independent Bernoulli(phi_i (1 - q_i)) initial infections."""
    q = as_defense(q, net.n)
    phi = as_attack(phi, net.n)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.random(net.n) < phi * (1.0 - q)


def step(net: Network, state, q, params: DynamicsParams, rng: np.random.Generator) -> np.ndarray:
    """One synchronous transition."""
    q = as_defense(q, net.n)
    state = np.asarray(state).astype(bool)
    if state.shape != (net.n,):
        raise DynamicsError(f"state has shape {state.shape}, expected ({net.n},)")
    indptr, indices = net.csr
    u = rng.random((1, 1, net.n))
    _, final = kernels.backend().dynamics_batch(
        indptr,
        indices,
        node_beta(q, params)[None, :],
        state.astype(np.uint8)[None, :],
        u,
        params.gamma,
        params.tau,
        params.delta,
    )
    return final[0].astype(bool)


def _draws(n: int, horizon: int, seed: int, runs: range):
    init = np.empty((len(runs), n))
    steps = np.empty((len(runs), horizon, n))
    for k, r in enumerate(runs):
        rng = _run_rng(seed, r)
        init[k] = rng.random(n)
        steps[k] = rng.random((horizon, n))
    return init, steps


def _batch(net, q_rows, phi, params, init, steps):
    indptr, indices = net.csr
    q_rows = np.ascontiguousarray(q_rows, dtype=np.float64)
    sigma0 = (init < phi * (1.0 - q_rows)).astype(np.uint8)
    beta = np.ascontiguousarray(np.stack([node_beta(r, params) for r in q_rows]))
    return kernels.backend().dynamics_batch(
        indptr, indices, beta, sigma0, steps, params.gamma, params.tau, params.delta
    )


def _aggregate(counts: np.ndarray, finals: np.ndarray, n: int, keep_runs: bool) -> Trajectory:
    fr = counts / n
    mean = fr.mean(axis=0)
    tail = tail_length(len(mean) - 1)
    return Trajectory(mean, finals.mean(axis=0), float(mean[-tail:].mean()), fr if keep_runs else None)


def simulate(
    net: Network, q, phi, params: DynamicsParams, runs: int = 100, seed: int = 0, keep_runs: bool = False
) -> Trajectory:
    """Mean trajectory over ``runs`` independent runs.

    ``final_state`` holds the per-node frequency of being infected at the horizon.
    """
    if runs < 1:
        raise DynamicsError("runs must be >= 1")
    n = net.n
    q = as_defense(q, n)
    phi = as_attack(phi, n)
    counts, finals = [], []
    for lo in range(0, runs, RUN_BATCH):
        block = range(lo, min(runs, lo + RUN_BATCH))
        init, steps = _draws(n, params.horizon, seed, block)
        c, f = _batch(net, np.tile(q, (len(block), 1)), phi, params, init, steps)
        counts.append(c)
        finals.append(f)
    return _aggregate(np.vstack(counts), np.vstack(finals), n, keep_runs)


def reshuffle(q: np.ndarray, rng: np.random.Generator, mode: str = "permutation") -> np.ndarray:
    """Same budget placed at random.

    ``permutation`` permutes the entries; ``redistribute`` draws a uniform
    point of the simplex scaled to ``sum(q)`` (entries above 1 are clipped).
    """
    if mode == "permutation":
        return rng.permutation(q)
    if mode == "redistribute":
        w = rng.dirichlet(np.ones(len(q)))
        return np.clip(w * q.sum(), 0.0, 1.0)
    raise DynamicsError(f"unknown reshuffle mode {mode!r}")


def compare_strategies(
    net: Network,
    budget_q,
    phi,
    params: DynamicsParams,
    runs: int = 100,
    seed: int = 0,
    reshuffle_mode: str = "permutation",
    keep_runs: bool = True,
) -> dict[str, Trajectory]:
    """Trajectories under no defense, ``budget_q``, and a per-run reshuffle of it.

    All three strategies share each run's uniform draws.
    """
    if runs < 1:
        raise DynamicsError("runs must be >= 1")
    n = net.n
    q = as_defense(budget_q, n)
    phi = as_attack(phi, n)
    out: dict[str, list] = {s: ([], []) for s in STRATEGIES}
    for lo in range(0, runs, RUN_BATCH):
        block = range(lo, min(runs, lo + RUN_BATCH))
        init, steps = _draws(n, params.horizon, seed, block)
        shuffled = np.stack([reshuffle(q, _run_rng(seed, r, 1), reshuffle_mode) for r in block])
        rows = {
            "none": np.zeros((len(block), n)),
            "optimal": np.tile(q, (len(block), 1)),
            "reshuffled": shuffled,
        }
        for name, q_rows in rows.items():
            c, f = _batch(net, q_rows, phi, params, init, steps)
            out[name][0].append(c)
            out[name][1].append(f)
    return {name: _aggregate(np.vstack(c), np.vstack(f), n, keep_runs) for name, (c, f) in out.items()}
