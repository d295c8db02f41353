"""Risk-cost efficient frontiers over a grid of budget multipliers."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .equil import EquilibriumError, SolverOptions, _descend, _Objective, solve
from .game import ValueProfiles, best_response_from_gain, defender_cost
from .graph import Network
from .risk import RiskError, RiskSpec, connection_matrix, default_risk

GRID_POINTS = 25
REPAIR_PASSES = 3


@dataclass(frozen=True, eq=False)
class FrontierPoint:
    alpha: float
    cost: float
    risk_z: float
    risk_eta: float
    flag: str = ""
    q: np.ndarray | None = None
    phi: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "cost": self.cost,
            "risk_z": self.risk_z,
            "risk_eta": self.risk_eta,
            "flag": self.flag,
            "q": None if self.q is None else self.q.tolist(),
            "phi": None if self.phi is None else self.phi.tolist(),
        }


def risk_scale(net: Network, profiles: ValueProfiles, theta: float, options: SolverOptions) -> float:
    """Largest marginal risk reduction at q = 0; sets the scale of useful alphas."""
    obj = _Objective(net, profiles, 1.0, theta, replace(options, cost="quadratic"))
    _, g = obj.value_grad(np.zeros(net.n))
    return float(np.max(np.abs(g)))


def default_alpha_grid(net: Network, profiles: ValueProfiles, theta: float, options: SolverOptions | None = None) -> list[float]:
    """25 log-spaced alphas from 0.001 to 10 times :func:`risk_scale`."""
    options = options or SolverOptions()
    g0 = risk_scale(net, profiles, theta, options)
    if g0 <= 0:
        g0 = 1.0
    return np.geomspace(1e-3 * g0, 10 * g0, GRID_POINTS).tolist()


def evaluate_point(net, profiles, alpha, theta, q, options: SolverOptions, flag: str = "") -> FrontierPoint:
    risk = options.risk or default_risk(net)
    W, _ = connection_matrix(net, q, risk)
    phi, _ = best_response_from_gain(W.T @ profiles.eta, theta)
    r = W @ phi
    return FrontierPoint(
        float(alpha),
        defender_cost(q, options.cost),
        float(profiles.z @ r),
        float(profiles.eta @ r),
        flag,
        np.asarray(q, dtype=np.float64),
        phi,
    )


def _solve_point(net, profiles, alpha, theta, options, warm):
    try:
        res = solve(net, profiles, alpha, theta, options, extra_starts=() if warm is None else (warm,))
    except (EquilibriumError, RiskError) as exc:
        nan = math.nan
        return FrontierPoint(float(alpha), nan, nan, nan, f"failed: {exc}")
    flag = ""
    if res.diagnostics.get("out_of_box"):
        flag = "out_of_box"
    elif res.diagnostics.get("converged") is False:
        flag = "not_converged"
    return evaluate_point(net, profiles, alpha, theta, res.q_star, options, flag)


def _solve_star(args):
    return _solve_point(*args)


def _repair(net, profiles, theta, options: SolverOptions, points: list[FrontierPoint]) -> list[FrontierPoint]:
    """Re-solve any point whose loss is beaten by another point's allocation.

    After this, each q* is the best allocation found anywhere in the sweep for
    its own alpha, which makes risk non-increasing in cost along the sweep.
    """
    points = list(points)
    for _ in range(REPAIR_PASSES):
        changed = False
        for idx, p in enumerate(points):
            if p.q is None:
                continue
            obj = _Objective(net, profiles, p.alpha, theta, options)
            best_f = obj.value(p.q)
            best_q = None
            for other in points:
                if other is p or other.q is None:
                    continue
                f = obj.value(other.q)
                if f < best_f - 1e-12 * max(1.0, abs(best_f)):
                    best_f, best_q = f, other.q
            if best_q is None:
                continue
            q, _, _, pg, _ = _descend(obj, best_q, options)
            points[idx] = evaluate_point(net, profiles, p.alpha, theta, q, options, "" if pg <= options.tol else "not_converged")
            changed = True
        if not changed:
            break
    return points


def efficient_frontier(
    net: Network,
    profiles: ValueProfiles,
    theta: float,
    alpha_grid=None,
    options: SolverOptions | None = None,
    risk: RiskSpec | None = None,
    warm_start: bool = True,
    workers: int = 1,
    repair: bool = True,
) -> list[FrontierPoint]:
    """Equilibrium cost and risks at every alpha, in grid order.

    With ``warm_start`` each solve also starts from the previous point's q*,
    which serializes the sweep; otherwise points run in ``workers`` processes.
    ``repair`` then re-solves points that another point's allocation beats
    (numerical method only).
    """
    options = options or SolverOptions()
    if risk is not None:
        options = replace(options, risk=risk)
    if alpha_grid is None:
        alpha_grid = default_alpha_grid(net, profiles, theta, options)
    grid = [float(a) for a in alpha_grid]
    if not grid or min(grid) <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("alpha grid must be nonempty, positive and strictly increasing")
    if warm_start:
        out, warm = [], None
        for a in grid:
            p = _solve_point(net, profiles, a, theta, options, warm)
            if p.q is not None:
                warm = p.q
            out.append(p)
    else:
        jobs = [(net, profiles, a, theta, options, None) for a in grid]
        if workers <= 1:
            out = [_solve_star(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                out = list(pool.map(_solve_star, jobs))
    if repair and options.method == "projected_gradient":
        out = _repair(net, profiles, theta, options, out)
    return out


def risk_at_cost(points: list[FrontierPoint], cost: float, which: str = "risk_z") -> float:
    """Frontier risk at a given cost, by linear interpolation of the lower envelope."""
    pts = sorted((p.cost, getattr(p, which)) for p in points if not p.flag.startswith("failed"))
    if not pts:
        raise ValueError("no usable frontier points")
    costs = np.array([c for c, _ in pts])
    risks = np.minimum.accumulate(np.array([r for _, r in pts]))
    return float(np.interp(cost, costs, risks))
