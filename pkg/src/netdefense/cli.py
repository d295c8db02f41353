"""``netdefense`` command line driver.

Every subcommand reads one JSON config (``--config``) and writes its outputs
into ``--out``. Outputs are a pure function of the config and the seed.
Exit codes: 0 success, 1 computation failure, 2 config or usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import DynamicsError, DynamicsParams, compare_strategies, simulate
from .equil import EquilibriumError, SolverOptions, solve
from .frontier import efficient_frontier
from .game import GameError, GameParams, ValueProfiles, attacker_best_response, resolve_profile
from .graph import GraphError, Network, generate_topology, topology_from_dict, topology_to_dict, write_edge_list
from .protect import (
    TensorMismatch,
    dump_one_point,
    dump_two_point,
    one_point_protection,
    reduce_b_matrix,
    two_point_protection,
)
from .risk import RiskError, RiskSpec, risk_from_dict, risk_to_dict, risk_vector

log = logging.getLogger("netdefense")

COMMANDS = ("generate", "metrics", "equilibrium", "frontier", "simulate", "compare")


class ConfigError(ValueError):
    pass


def _solver_from_dict(d: dict) -> SolverOptions:
    names = {f.name for f in fields(SolverOptions)} - {"risk"}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown solver option(s): {', '.join(sorted(unknown))}")
    try:
        return SolverOptions(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver options: {exc}") from None


def _solver_to_dict(opts: SolverOptions) -> dict:
    d = asdict(opts)
    d.pop("risk")
    return d


@dataclass(frozen=True)
class RunConfig:
    topology: object
    z: object = "uniform"
    eta: object = "uniform"
    game: GameParams = field(default_factory=lambda: GameParams(alpha=1.0, theta=100.0))
    risk: RiskSpec | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    alphas: tuple[float, ...] | None = None
    warm_start: bool = True
    dynamics: DynamicsParams | None = None
    runs: int = 100
    defense: object = "equilibrium"
    attack: object = "equilibrium"
    v: object = "mean"
    w: object = "uniform"
    seed: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"topology", "profiles", "game", "risk", "solver", "frontier", "dynamics", "simulation", "metrics", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        if "topology" not in d:
            raise ConfigError("config needs a 'topology' section")
        try:
            topology = topology_from_dict(d["topology"])
            profiles = d.get("profiles", {})
            game = GameParams(**d.get("game", {"alpha": 1.0, "theta": 100.0}))
            risk = risk_from_dict(d["risk"]) if d.get("risk") is not None else None
            frontier = d.get("frontier", {})
            dyn = DynamicsParams(**d["dynamics"]) if d.get("dynamics") is not None else None
            sim = d.get("simulation", {})
            metrics = d.get("metrics", {})
        except (GraphError, GameError, RiskError, DynamicsError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        alphas = frontier.get("alphas")
        seed = d.get("seed")
        if seed is not None and (not isinstance(seed, int) or seed < 0):
            raise ConfigError("seed must be a non-negative integer")
        return cls(
            topology=topology,
            z=profiles.get("z", "uniform"),
            eta=profiles.get("eta", "uniform"),
            game=game,
            risk=risk,
            solver=_solver_from_dict(d.get("solver", {})),
            alphas=None if alphas is None else tuple(float(a) for a in alphas),
            warm_start=bool(frontier.get("warm_start", True)),
            dynamics=dyn,
            runs=int(sim.get("runs", 100)),
            defense=sim.get("defense", "equilibrium"),
            attack=sim.get("attack", "equilibrium"),
            v=metrics.get("v", "mean"),
            w=metrics.get("w", "uniform"),
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {
            "topology": topology_to_dict(self.topology),
            "profiles": {"z": self.z, "eta": self.eta},
            "game": asdict(self.game),
            "risk": None if self.risk is None else risk_to_dict(self.risk),
            "solver": _solver_to_dict(self.solver),
            "frontier": {"alphas": None if self.alphas is None else list(self.alphas), "warm_start": self.warm_start},
            "dynamics": None if self.dynamics is None else self.dynamics.to_dict(),
            "simulation": {"runs": self.runs, "defense": self.defense, "attack": self.attack},
            "metrics": {"v": self.v, "w": self.w},
            "seed": self.seed,
        }

    def with_seed(self, seed: int | None) -> "RunConfig":
        """Apply the master seed to every stochastic component."""
        if seed is None:
            return self
        risk = self.risk
        if risk is not None and hasattr(risk, "seed"):
            risk = replace(risk, seed=seed)
        return replace(self, seed=seed, solver=replace(self.solver, seed=seed), risk=risk)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    cfg = RunConfig.from_dict(data)
    return cfg.with_seed(cfg.seed)


# --- shared pieces ---------------------------------------------------------


class _Context:
    def __init__(self, cfg: RunConfig, out: Path, full: bool, workers: int):
        self.cfg = cfg
        self.out = out
        self.full = full
        self.workers = workers
        try:
            self.net: Network = generate_topology(cfg.topology)
            self.profiles = ValueProfiles(resolve_profile(cfg.z, self.net), resolve_profile(cfg.eta, self.net))
        except (GraphError, GameError) as exc:
            raise ConfigError(str(exc)) from None

    @property
    def options(self) -> SolverOptions:
        opts = self.cfg.solver
        return opts if self.cfg.risk is None else replace(opts, risk=self.cfg.risk)

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name


def _num(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _vector(ctx: _Context, spec, label: str) -> np.ndarray:
    try:
        return resolve_profile(spec, ctx.net)
    except GameError as exc:
        raise ConfigError(f"{label}: {exc}") from None


def _require_seed(ctx: _Context, what: str) -> int:
    if ctx.cfg.seed is None:
        raise ConfigError(f"{what} is stochastic; set 'seed' in the config or pass --seed")
    return ctx.cfg.seed


# --- commands ------------------------------------------------------------


def cmd_generate(ctx: _Context) -> list[Path]:
    net = ctx.net
    edges = ctx.path("network.edges")
    write_edge_list(net, edges)
    meta = ctx.path("network.json")
    _write_json(
        meta,
        {
            "n": net.n,
            "edges": [list(e) for e in net.edges],
            "degrees": net.degrees.tolist(),
            "components": int(net.components.max()) + 1 if net.n else 0,
            "forest": net.is_forest,
        },
    )
    return [edges, meta]


def cmd_metrics(ctx: _Context) -> list[Path]:
    net = ctx.net
    a = one_point_protection(net)
    b = two_point_protection(net, a)
    v = _vector(ctx, ctx.cfg.v, "metrics.v")
    w = _vector(ctx, ctx.cfg.w, "metrics.w")
    p1, p2 = ctx.path("one_point.jsonl"), ctx.path("two_point.jsonl")
    with p1.open("w") as fh:
        dump_one_point(a, fh)
    with p2.open("w") as fh:
        dump_two_point(b, fh)
    red = ctx.path("reductions.csv")
    _write_csv(red, ["node", "a_v_w", "a_w_v"], [[i, _num(a.reduce_scalar(i, v, w)), _num(a.reduce_scalar(i, w, v))] for i in range(net.n)])
    B = reduce_b_matrix(b, a, v, w)
    bp = ctx.path("b_matrix.csv")
    _write_csv(bp, ["i", "j", "b_v_w"], [[i, j, _num(B[i, j])] for i in range(net.n) for j in range(net.n) if i != j])
    return [p1, p2, red, bp]


def _equilibrium(ctx: _Context):
    g = ctx.cfg.game
    opts = replace(ctx.options, cost=g.defender_cost)
    return solve(ctx.net, ctx.profiles, g.alpha, g.theta, opts)


def cmd_equilibrium(ctx: _Context) -> list[Path]:
    res = _equilibrium(ctx)
    js = ctx.path("equilibrium.json")
    _write_json(js, res.to_dict())
    cs = ctx.path("equilibrium.csv")
    _write_csv(cs, ["node", "q", "phi"], [[i, _num(q), _num(p)] for i, (q, p) in enumerate(zip(res.q_star, res.phi_star))])
    r = risk_vector(ctx.net, res.q_star, res.phi_star, ctx.options.risk)
    rp = ctx.path("risk.csv")
    _write_csv(rp, ["node", "risk"], [[i, _num(x)] for i, x in enumerate(r.values)])
    return [js, cs, rp]


def cmd_frontier(ctx: _Context) -> list[Path]:
    g = ctx.cfg.game
    pts = efficient_frontier(
        ctx.net,
        ctx.profiles,
        g.theta,
        alpha_grid=ctx.cfg.alphas,
        options=replace(ctx.options, cost=g.defender_cost),
        warm_start=ctx.cfg.warm_start,
        workers=ctx.workers,
    )
    cs = ctx.path("frontier.csv")
    _write_csv(
        cs,
        ["alpha", "cost", "risk_z", "risk_eta", "flag"],
        [[_num(p.alpha), _num(p.cost), _num(p.risk_z), _num(p.risk_eta), p.flag] for p in pts],
    )
    written = [cs]
    if ctx.full:
        js = ctx.path("frontier.json")
        _write_json(js, [p.to_dict() for p in pts])
        written.append(js)
    return written


def _dynamics_inputs(ctx: _Context):
    if ctx.cfg.dynamics is None:
        raise ConfigError("this command needs a 'dynamics' section")
    seed = _require_seed(ctx, "simulation")
    cfg = ctx.cfg
    res = None
    if isinstance(cfg.defense, str) and cfg.defense == "equilibrium":
        res = _equilibrium(ctx)
        q = res.q_star
    else:
        q = _vector(ctx, cfg.defense, "simulation.defense")
        if (q < 0).any() or (q > 1).any():
            raise ConfigError("simulation.defense entries must lie in [0, 1]")
    if isinstance(cfg.attack, str) and cfg.attack == "equilibrium":
        phi = res.phi_star if res is not None else attacker_best_response(ctx.net, q, ctx.profiles, cfg.game.theta, cfg.risk)
    else:
        phi = _vector(ctx, cfg.attack, "simulation.attack")
        if phi.sum() <= 0 or (phi < 0).any():
            raise ConfigError("simulation.attack must be a nonnegative nonzero vector")
        phi = phi / phi.sum()
    return q, phi, seed


def cmd_simulate(ctx: _Context) -> list[Path]:
    q, phi, seed = _dynamics_inputs(ctx)
    traj = simulate(ctx.net, q, phi, ctx.cfg.dynamics, ctx.cfg.runs, seed, keep_runs=ctx.full)
    cs = ctx.path("trajectory.csv")
    _write_csv(cs, ["t", "mean_fraction"], [[t, _num(x)] for t, x in enumerate(traj.fractions)])
    written = [cs]
    if ctx.full:
        jl = ctx.path("runs.jsonl")
        with jl.open("w") as fh:
            for r, row in enumerate(traj.runs):
                fh.write(json.dumps({"run": r, "fractions": row.tolist()}) + "\n")
        written.append(jl)
    return written


def cmd_compare(ctx: _Context) -> list[Path]:
    q, phi, seed = _dynamics_inputs(ctx)
    res = compare_strategies(ctx.net, q, phi, ctx.cfg.dynamics, ctx.cfg.runs, seed)
    cs = ctx.path("compare.csv")
    rows = [[t, _num(x), name] for name, traj in res.items() for t, x in enumerate(traj.fractions)]
    _write_csv(cs, ["t", "mean_fraction", "strategy"], rows)
    js = ctx.path("compare_summary.json")
    _write_json(js, {name: {"asymptotic": traj.asymptotic} for name, traj in res.items()})
    return [cs, js]


HANDLERS = {
    "generate": cmd_generate,
    "metrics": cmd_metrics,
    "equilibrium": cmd_equilibrium,
    "frontier": cmd_frontier,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netdefense", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__name__.removeprefix("cmd_"))
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", default=".", metavar="DIR")
        p.add_argument("--seed", type=int, default=None, metavar="N")
        p.add_argument("--workers", type=int, default=1, metavar="N")
        p.add_argument("--full", action="store_true", help="also write per-point / per-run detail")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = load_config(args.config).with_seed(args.seed)
        ctx = _Context(cfg, Path(args.out), args.full, args.workers)
        written = HANDLERS[args.command](ctx)
    except ConfigError as exc:
        print(f"netdefense: config error: {exc}", file=sys.stderr)
        return 2
    except (EquilibriumError, RiskError, TensorMismatch, DynamicsError, GameError, GraphError, ValueError) as exc:
        print(f"netdefense: error: {exc}", file=sys.stderr)
        return 1
    for p in written:
        log.info("wrote %s", p)
    return 0
