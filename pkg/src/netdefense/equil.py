"""Defender equilibrium investments.

``asymptotic_sse`` evaluates the large-alpha closed form built from the
protection tensors; ``numerical_sse`` minimizes the defender loss with the
attacker best response substituted in, by projected gradient descent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .game import (
    ValueProfiles,
    best_response_from_gain,
    defender_cost,
    defender_cost_grad,
)
from .graph import Network
from .protect import (
    OnePointTensor,
    TwoPointTensor,
    TensorMismatch,
    one_point_protection,
    reduce_b_matrix,
    two_point_protection,
)
from .risk import RiskSpec, as_defense, connection_matrix, default_risk

log = logging.getLogger(__name__)

VARIANTS = ("theorem", "proof")
ORDERS = ("first", "second", "full")
DEFAULT_VARIANT = "theorem"
MAX_CONDITION = 1e12
STALL_ITERS = 10
STALL_RTOL = 1e-14


class EquilibriumError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class AsymptoticSystem:
    m: np.ndarray
    s: np.ndarray
    variant: str


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    q_star: np.ndarray
    q_raw: np.ndarray
    phi_star: np.ndarray
    loss: float
    utility: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "q": self.q_star.tolist(),
            "phi": self.phi_star.tolist(),
            "loss": self.loss,
            "utility": self.utility,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class SolverOptions:
    method: str = "projected_gradient"
    order: str = "full"
    variant: str = DEFAULT_VARIANT
    armijo_c: float = 1e-4
    shrink: float = 0.5
    memory: int = 10
    tol: float = 1e-7
    max_iters: int = 10_000
    multistarts: int = 5
    seed: int = 0
    gradient: str = "analytic"
    fd_step: float = 1e-5
    cost: str = "quadratic"
    risk: RiskSpec | None = None

    def __post_init__(self):
        if self.method not in ("projected_gradient", "closed_form"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.gradient not in ("analytic", "finite_difference"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")
        if self.cost not in ("quadratic", "l1"):
            raise ValueError(f"unknown cost {self.cost!r}")
        if min(self.tol, self.fd_step, self.armijo_c) <= 0 or not 0 < self.shrink < 1:
            raise ValueError("tolerances and step constants must be positive")
        if self.max_iters < 1 or self.multistarts < 0 or self.memory < 1:
            raise ValueError("max_iters and memory must be >= 1, multistarts >= 0")


# --- closed form ----------------------------------------------------------


@lru_cache(maxsize=16)
def protection_tensors(net: Network) -> tuple[OnePointTensor, TwoPointTensor]:
    a = one_point_protection(net)
    return a, two_point_protection(net, a)


def assemble_system(
    net: Network,
    profiles: ValueProfiles,
    theta: float,
    tensors: tuple[OnePointTensor, TwoPointTensor] | None = None,
    variant: str = DEFAULT_VARIANT,
) -> AsymptoticSystem:
    """``s`` and ``M`` of the asymptotic equilibrium.

    ``variant='theorem'`` sums the constant term over k (factor n);
    ``variant='proof'`` includes it once.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    a, b = tensors if tensors is not None else protection_tensors(net)
    n = net.n
    if a.n != n or b.n != n or profiles.n != n:
        raise TensorMismatch("tensors, profiles and network disagree on n")
    uniform = np.full(n, 1.0 / n)
    z, eta = profiles.z, profiles.eta
    Rz = a.reduce_all(z)  # Rz[i, k] = a^i_k(z)
    Re = a.reduce_all(eta)
    tz = Rz.sum(axis=1) / n  # a^i(1/n, z)
    te = Re.sum(axis=1) / n
    c1 = float(n) if variant == "theorem" else 1.0
    B = reduce_b_matrix(b, a, uniform, z)
    m = B - (Re @ Rz.T - c1 * np.outer(te, tz)) / theta - (Rz @ Re.T - c1 * np.outer(tz, te)) / theta
    return AsymptoticSystem(m, tz, variant)


def _evaluate(net, q, profiles, alpha, theta, cost, risk):
    W, _ = connection_matrix(net, q, risk)
    phi, support = best_response_from_gain(W.T @ profiles.eta, theta)
    risk_vals = W @ phi
    loss = float(profiles.z @ risk_vals) + alpha * defender_cost(q, cost)
    utility = float(profiles.eta @ risk_vals) - 0.5 * theta * float(phi @ phi)
    return phi, support, loss, utility


def closed_form_q(system: AsymptoticSystem, alpha: float, order: str = "full") -> tuple[np.ndarray, float]:
    """``(q_raw, condition_estimate)`` for the chosen expansion order."""
    if not alpha > 0:
        raise EquilibriumError("alpha must be positive")
    m, s = system.m, system.s
    n = len(s)
    K = alpha * np.eye(n) - m
    cond = float(np.linalg.cond(K))
    radius = float(np.max(np.abs(np.linalg.eigvals(m)))) if n else 0.0
    if not np.isfinite(cond) or cond > MAX_CONDITION or alpha <= radius:
        raise EquilibriumError("alpha too small for asymptotic regime")
    if order == "first":
        return s / alpha, cond
    if order == "second":
        return s / alpha + m @ s / alpha**2, cond
    if order == "full":
        return np.linalg.solve(K, s), cond
    raise ValueError(f"order must be one of {ORDERS}")


def asymptotic_sse(
    net: Network, profiles: ValueProfiles, alpha: float, theta: float, options: SolverOptions | None = None
) -> EquilibriumResult:
    options = options or SolverOptions(method="closed_form")
    system = assemble_system(net, profiles, theta, variant=options.variant)
    q_raw, cond = closed_form_q(system, alpha, options.order)
    q = np.clip(q_raw, 0.0, 1.0)
    risk = options.risk or default_risk(net)
    phi, support, loss, utility = _evaluate(net, q, profiles, alpha, theta, "quadratic", risk)
    return EquilibriumResult(
        q,
        q_raw,
        phi,
        loss,
        utility,
        {
            "method": "closed_form",
            "order": options.order,
            "variant": options.variant,
            "iterations": 0,
            "out_of_box": bool((q != q_raw).any()),
            "condition_estimate": cond,
            "interior_attack": bool(support.all()),
            "connected": net.is_connected,
        },
    )


# --- numerical ------------------------------------------------------------


class _Objective:
    """Defender loss with the attacker best response substituted in."""

    def __init__(self, net, profiles, alpha, theta, options: SolverOptions):
        self.net = net
        self.z = profiles.z
        self.eta = profiles.eta
        self.alpha = alpha
        self.theta = theta
        self.cost = options.cost
        self.risk = options.risk or default_risk(net)
        self.fd = options.gradient == "finite_difference"
        self.fd_step = options.fd_step
        self.evals = 0

    def value(self, q) -> float:
        self.evals += 1
        W, _ = connection_matrix(self.net, q, self.risk)
        phi, _ = best_response_from_gain(W.T @ self.eta, self.theta)
        return float(self.z @ W @ phi) + self.alpha * defender_cost(q, self.cost)

    def value_grad(self, q) -> tuple[float, np.ndarray]:
        if self.fd:
            return self.value(q), self._fd_grad(q)
        self.evals += 1
        W, dW = connection_matrix(self.net, q, self.risk, grad=True)
        phi, support = best_response_from_gain(W.T @ self.eta, self.theta)
        loss = float(self.z @ W @ phi) + self.alpha * defender_cost(q, self.cost)
        direct = np.einsum("i,isk,s->k", self.z, dW, phi)
        dg = np.einsum("i,isk->sk", self.eta, dW)[support]
        dphi = (dg - dg.mean(axis=0)) / self.theta
        u = (W.T @ self.z)[support]
        grad = direct + u @ dphi + self.alpha * defender_cost_grad(q, self.cost)
        return loss, grad

    def _fd_grad(self, q) -> np.ndarray:
        # central differences, one-sided at the box edges
        h = self.fd_step
        g = np.empty(len(q))
        for k in range(len(q)):
            lo, hi = q.copy(), q.copy()
            lo[k] = max(q[k] - h, 0.0)
            hi[k] = min(q[k] + h, 1.0)
            g[k] = (self.value(hi) - self.value(lo)) / (hi[k] - lo[k])
        return g


def projected_gradient_norm(q, grad) -> float:
    return float(np.max(np.abs(q - np.clip(q - grad, 0.0, 1.0)), initial=0.0))


def _descend(obj: _Objective, q0: np.ndarray, options: SolverOptions):
    """Projected gradient with Armijo backtracking along the projection arc.

    Line searches start from the Barzilai-Borwein step and compare against the
    largest of the last ``options.memory`` losses (``memory=1`` is the plain
    monotone rule). The best iterate seen is returned.
    """
    q = np.clip(np.asarray(q0, dtype=np.float64), 0.0, 1.0)
    f, g = obj.value_grad(q)
    best = (f, q, g)
    recent = [f]
    step = 1.0
    it = stalled = 0
    pg = projected_gradient_norm(q, g)
    # at a kink of the best response the loss can be flat to machine
    # precision while the one-sided gradient is not small
    while pg > options.tol and it < options.max_iters and stalled < STALL_ITERS:
        it += 1
        ref = max(recent)
        t = step
        while True:
            cand = np.clip(q - t * g, 0.0, 1.0)
            d = cand - q
            fc = obj.value(cand)
            if fc <= ref + options.armijo_c * float(g @ d) or t < 1e-16:
                break
            t *= options.shrink
        if not np.any(d):
            break
        g_old = q, g
        q = cand
        f, g = obj.value_grad(q)
        sy = float(d @ (g - g_old[1]))
        step = min(float(d @ d) / sy, 1e6) if sy > 0 else min(2.0 * t, 1e6)
        recent = (recent + [f])[-options.memory :]
        if f < best[0] - STALL_RTOL * max(1.0, abs(f)):
            stalled = 0
        else:
            stalled += 1
        if f < best[0]:
            best = (f, q, g)
        pg = projected_gradient_norm(q, g)
    f, q, g = best
    return q, f, it, projected_gradient_norm(q, g), stalled >= STALL_ITERS


def start_points(
    net: Network, profiles: ValueProfiles, alpha: float, theta: float, options: SolverOptions, extra=()
) -> list[tuple[str, np.ndarray]]:
    """Deterministic multistart list: zero, closed form, ``extra``, then random points."""
    n = net.n
    starts = [("zero", np.zeros(n))]
    try:
        sys_ = assemble_system(net, profiles, theta, variant=options.variant)
        starts.append(("closed_form", np.clip(closed_form_q(sys_, alpha, "full")[0], 0.0, 1.0)))
    except EquilibriumError:
        log.debug("closed form unavailable at alpha=%g; skipping that start", alpha)
    for q in extra:
        starts.append(("warm", np.clip(np.asarray(q, dtype=np.float64), 0.0, 1.0)))
    rng = np.random.default_rng(options.seed)
    for r in range(options.multistarts):
        starts.append((f"random{r}", rng.random(n)))
    return starts


def numerical_sse(
    net: Network,
    profiles: ValueProfiles,
    alpha: float,
    theta: float,
    options: SolverOptions | None = None,
    extra_starts=(),
) -> EquilibriumResult:
    options = options or SolverOptions()
    if not alpha > 0 or not theta > 0:
        raise EquilibriumError("alpha and theta must be positive")
    if profiles.n != net.n:
        raise EquilibriumError("profiles do not match the network size")
    obj = _Objective(net, profiles, alpha, theta, options)
    best = None
    for idx, (label, q0) in enumerate(start_points(net, profiles, alpha, theta, options, extra_starts)):
        q, f, it, pg, stall = _descend(obj, q0, options)
        if best is None or f < best[1]:
            best = (q, f, it, pg, stall, idx, label)
    q, f, it, pg, stall, idx, label = best
    phi, support, loss, utility = _evaluate(net, q, profiles, alpha, theta, options.cost, obj.risk)
    return EquilibriumResult(
        q,
        q.copy(),
        phi,
        loss,
        utility,
        {
            "method": "projected_gradient",
            "iterations": it,
            "converged": pg <= options.tol,
            "stalled": stall,
            "projected_gradient": pg,
            "start": label,
            "start_index": idx,
            "out_of_box": False,
            "interior_attack": bool(support.all()),
            "evaluations": obj.evals,
        },
    )


def solve(net, profiles, alpha, theta, options: SolverOptions | None = None, extra_starts=()) -> EquilibriumResult:
    options = options or SolverOptions()
    if options.method == "closed_form":
        return asymptotic_sse(net, profiles, alpha, theta, options)
    return numerical_sse(net, profiles, alpha, theta, options, extra_starts)


def with_risk(options: SolverOptions, risk: RiskSpec | None) -> SolverOptions:
    return options if risk is None else replace(options, risk=risk)
