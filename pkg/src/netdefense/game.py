"""Player objectives and the attacker's best response."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Network
from .risk import RiskSpec, as_attack, as_defense, connection_matrix, risk_vector

COST_KINDS = ("quadratic", "l1")


class GameError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ValueProfiles:
    z: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        eta = np.asarray(self.eta, dtype=np.float64)
        if z.ndim != 1 or z.shape != eta.shape:
            raise GameError(f"profiles must be equal-length vectors, got {z.shape} and {eta.shape}")
        if not (np.isfinite(z).all() and np.isfinite(eta).all()):
            raise GameError("profile entries must be finite")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "eta", eta)

    @property
    def n(self) -> int:
        return len(self.z)


@dataclass(frozen=True)
class GameParams:
    alpha: float
    theta: float
    defender_cost: str = "quadratic"

    def __post_init__(self):
        if not self.alpha > 0 or not self.theta > 0:
            raise GameError("alpha and theta must be positive")
        if self.defender_cost not in COST_KINDS:
            raise GameError(f"defender_cost must be one of {COST_KINDS}")


def node_levels(net: Network, root: int = 0) -> np.ndarray:
    """BFS depth of every node from ``root``; -1 when unreachable."""
    indptr, indices = net.csr
    depth = np.full(net.n, -1, dtype=np.int64)
    depth[root] = 0
    frontier = [root]
    while frontier:
        nxt = []
        for v in frontier:
            for u in indices[indptr[v] : indptr[v + 1]]:
                if depth[u] < 0:
                    depth[u] = depth[v] + 1
                    nxt.append(int(u))
        frontier = nxt
    return depth


def resolve_profile(spec, net: Network) -> np.ndarray:
    """A value vector from a list or one of the presets

    ``"uniform"`` (all ones), ``"mean"`` (all 1/n), ``"zero"``,
    ``"indicator:i,j,..."`` and ``"level:k"`` (ones on tree depth k from node 0).
    """
    n = net.n
    if not isinstance(spec, str):
        v = np.asarray(spec, dtype=np.float64)
        if v.shape != (n,):
            raise GameError(f"profile has shape {v.shape}, expected ({n},)")
        return v
    name, _, arg = spec.partition(":")
    if name == "uniform":
        return np.ones(n)
    if name == "mean":
        return np.full(n, 1.0 / n)
    if name == "zero":
        return np.zeros(n)
    if name == "indicator":
        try:
            idx = [int(t) for t in arg.split(",") if t.strip()]
        except ValueError:
            raise GameError(f"bad indicator preset {spec!r}") from None
        if not idx or min(idx) < 0 or max(idx) >= n:
            raise GameError(f"indicator preset {spec!r} out of range for n={n}")
        v = np.zeros(n)
        v[idx] = 1.0
        return v
    if name == "level":
        try:
            k = int(arg)
        except ValueError:
            raise GameError(f"bad level preset {spec!r}") from None
        v = (node_levels(net) == k).astype(np.float64)
        if not v.any():
            raise GameError(f"no nodes at level {k}")
        return v
    raise GameError(f"unknown profile preset {spec!r}")


def make_profiles(net: Network, z="uniform", eta="uniform") -> ValueProfiles:
    return ValueProfiles(resolve_profile(z, net), resolve_profile(eta, net))


def defender_cost(q, kind: str = "quadratic") -> float:
    q = np.asarray(q, dtype=np.float64)
    if kind == "quadratic":
        return 0.5 * float(q @ q)
    if kind == "l1":
        return float(np.abs(q).sum())
    raise GameError(f"unknown cost kind {kind!r}")


def defender_cost_grad(q, kind: str = "quadratic") -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if kind == "quadratic":
        return q.copy()
    if kind == "l1":
        return np.ones_like(q)
    raise GameError(f"unknown cost kind {kind!r}")


def attacker_utility(net: Network, phi, q, profiles: ValueProfiles, theta: float, risk: RiskSpec | None = None) -> float:
    phi = as_attack(phi, net.n)
    r = risk_vector(net, q, phi, risk).values
    return float(profiles.eta @ r) - 0.5 * theta * float(phi @ phi)


def defender_loss(
    net: Network, q, phi, profiles: ValueProfiles, alpha: float, cost_kind: str = "quadratic", risk: RiskSpec | None = None
) -> float:
    r = risk_vector(net, q, phi, risk).values
    return float(profiles.z @ r) + alpha * defender_cost(q, cost_kind)


def project_simplex(y) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean projection onto the simplex by active-set iteration.

    Returns ``(x, support)``. Each round solves the equality-constrained
    problem on the current support and drops negative coordinates; at most n
    rounds are needed. When nothing is dropped in the first round the result
    is exactly ``y + (1 - sum y) / n``.
    """
    y = np.asarray(y, dtype=np.float64)
    support = np.ones(len(y), dtype=bool)
    while True:
        ys = y[support]
        x = ys + (1.0 - ys.sum()) / len(ys)
        neg = x < 0
        if not neg.any():
            break
        idx = np.flatnonzero(support)
        support[idx[neg]] = False
    out = np.zeros(len(y))
    out[support] = x
    return out, support


def best_response_from_gain(gain, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Maximizer of ``phi . gain - theta/2 |phi|^2`` over the simplex, with its support."""
    if not theta > 0:
        raise GameError("theta must be positive")
    gain = np.asarray(gain, dtype=np.float64)
    n = len(gain)
    # the interior formula, written so that huge theta gives 1/n exactly
    interior = 1.0 / n + (gain - gain.mean()) / theta
    if (interior >= 0).all():
        return interior, np.ones(n, dtype=bool)
    return project_simplex(gain / theta)


def attack_gain(net: Network, q, profiles: ValueProfiles, risk: RiskSpec | None = None) -> np.ndarray:
    """``g_s = sum_i eta_i R_i(q, e_s)``, the attacker's marginal value of seeding s."""
    q = as_defense(q, net.n)
    W, _ = connection_matrix(net, q, risk)
    return W.T @ profiles.eta


def attacker_best_response(
    net: Network, q, profiles: ValueProfiles, theta: float, risk: RiskSpec | None = None
) -> np.ndarray:
    phi, _ = best_response_from_gain(attack_gain(net, q, profiles, risk), theta)
    return phi
