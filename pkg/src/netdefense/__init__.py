"""Optimal cyber-defense allocation on networks under strategic attack."""

from .dynamics import DynamicsParams, Trajectory, compare_strategies, sample_initial, simulate, step
from .equil import (
    AsymptoticSystem,
    EquilibriumResult,
    SolverOptions,
    assemble_system,
    asymptotic_sse,
    numerical_sse,
)
from .frontier import FrontierPoint, efficient_frontier
from .game import (
    GameParams,
    ValueProfiles,
    attacker_best_response,
    attacker_utility,
    defender_cost,
    defender_loss,
    make_profiles,
)
from .graph import (
    Network,
    build_network,
    community,
    erdos_renyi,
    example_network,
    example_communities,
    generate_topology,
    tree,
)
from .protect import one_point_protection, reduce_a_scalar, reduce_a_vec, reduce_b, two_point_protection
from .risk import (
    ActivationRisk,
    ExactRisk,
    MonteCarloRisk,
    RiskVector,
    WalkRisk,
    activation_risk,
    infected_set,
    infection_probability_exact,
    infection_probability_mc,
    walk_count_risk,
)

__version__ = "0.1.0"
