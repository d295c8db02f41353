import itertools
import json

import numpy as np
import pytest

from netdefense.equil import (
    DEFAULT_VARIANT,
    EquilibriumError,
    SolverOptions,
    _Objective,
    assemble_system,
    asymptotic_sse,
    closed_form_q,
    numerical_sse,
    projected_gradient_norm,
    solve,
    start_points,
)
from netdefense.game import ValueProfiles, make_profiles
from netdefense.graph import build_network, example_network
from netdefense.protect import one_point_protection, reduce_b_matrix
from netdefense.risk import MonteCarloRisk, RiskError, WalkRisk
from conftest import random_graphs


def ones(n):
    return ValueProfiles(np.ones(n), np.ones(n))


def k2_loss(q0, q1, alpha, theta):
    """Defender loss on K2 with z = eta = 1, written out by hand."""
    w00, w11, w01 = 1 - q0, 1 - q1, (1 - q0) * (1 - q1)
    g = np.array([w00 + w01, w01 + w11])
    phi0 = np.clip(0.5 + (g[0] - g[1]) / (2 * theta), 0, 1)
    phi = np.array([phi0, 1 - phi0])
    return g @ phi + alpha * 0.5 * (q0**2 + q1**2)


def test_k2_system_by_hand(k2):
    theta = 100.0
    thm = assemble_system(k2, ones(2), theta, variant="theorem")
    assert thm.s.tolist() == [1.5, 1.5]
    assert np.allclose(thm.m, [[-1 / theta, -1 + 1 / theta], [-1 + 1 / theta, -1 / theta]], atol=1e-15)
    prf = assemble_system(k2, ones(2), theta, variant="proof")
    assert prf.m[0, 1] == pytest.approx(-1 - 3.5 / theta, abs=1e-15)
    assert prf.m[0, 0] == pytest.approx(-5.5 / theta, abs=1e-15)


def test_k2_closed_form(k2):
    res = asymptotic_sse(k2, ones(2), 20.0, 100.0)
    assert np.allclose(res.q_raw, 1.5 / 21, atol=1e-15)
    first = asymptotic_sse(k2, ones(2), 10.0, 100.0, SolverOptions(method="closed_form", order="first"))
    assert np.allclose(first.q_raw, 0.15, atol=1e-15)
    d = res.to_dict()
    assert set(d) == {"q", "phi", "loss", "utility", "diagnostics"}
    json.dumps(d)


def test_zero_profile(k2):
    prof = ValueProfiles(np.zeros(2), np.ones(2))
    assert not asymptotic_sse(k2, prof, 5.0, 10.0).q_star.any()
    res = numerical_sse(k2, prof, 5.0, 10.0)
    assert not res.q_star.any()
    assert np.allclose(res.phi_star, 0.5)


def test_theta_limit_is_b_term():
    net = example_network()
    prof = make_profiles(net)
    a = one_point_protection(net)
    from netdefense.equil import protection_tensors

    _, b = protection_tensors(net)
    B = reduce_b_matrix(b, a, np.full(6, 1 / 6), prof.z)
    for variant in ("theorem", "proof"):
        m = assemble_system(net, prof, 1e12, variant=variant).m
        assert np.allclose(m, B, atol=1e-9)


def test_order_expansion_is_second_order():
    rng = np.random.default_rng(0)
    for net in random_graphs(5, (3, 8), seed=40, connected=True):
        prof = ValueProfiles(rng.random(net.n), rng.random(net.n))
        sys_ = assemble_system(net, prof, 50.0)
        scaled = []
        for alpha in (100.0, 200.0, 400.0, 800.0):
            full, _ = closed_form_q(sys_, alpha, "full")
            first, _ = closed_form_q(sys_, alpha, "first")
            second, _ = closed_form_q(sys_, alpha, "second")
            scaled.append(np.abs(full - first).max() * alpha**2)
            assert np.abs(full - second).max() <= np.abs(full - first).max() + 1e-15
        assert max(scaled) <= 1.5 * min(scaled)


def test_small_alpha_raises(k2):
    with pytest.raises(EquilibriumError, match="alpha too small"):
        asymptotic_sse(k2, ones(2), 0.5, 100.0)
    with pytest.raises(EquilibriumError):
        closed_form_q(assemble_system(k2, ones(2), 100.0), -1.0)


def test_out_of_box_flag():
    net = example_network()
    res = asymptotic_sse(net, make_profiles(net, "indicator:0"), 1.0, 100.0)
    assert res.diagnostics["out_of_box"]
    assert res.q_raw.min() < 0 and res.q_star.min() == 0.0


def test_numerical_k2_matches_grid_and_closed_form(k2):
    alpha, theta = 50.0, 100.0
    res = numerical_sse(k2, ones(2), alpha, theta)
    grid = np.round(np.arange(0, 0.2 + 1e-9, 1e-3), 6)
    vals = np.array([[k2_loss(a, b, alpha, theta) for b in grid] for a in grid])
    i, j = np.unravel_index(vals.argmin(), vals.shape)
    assert np.abs(res.q_star - [grid[i], grid[j]]).max() <= 1e-3
    assert res.loss <= vals.min() + 1e-12
    proof = asymptotic_sse(k2, ones(2), alpha, theta, SolverOptions(method="closed_form", variant="proof"))
    assert np.abs(res.q_star - proof.q_raw).max() <= 2e-2


def test_path3_grid_oracle(path3):
    alpha, theta = 40.0, 100.0
    res = numerical_sse(path3, ones(3), alpha, theta)
    obj = _Objective(path3, ones(3), alpha, theta, SolverOptions())
    grid = np.arange(0, 0.21, 1e-2)
    best = min(obj.value(np.array(p)) for p in itertools.product(grid, repeat=3))
    assert best >= res.loss - 1e-4


def test_stationarity_and_determinism():
    net = example_network()
    prof = make_profiles(net)
    a = numerical_sse(net, prof, 5.0, 10.0)
    b = numerical_sse(net, prof, 5.0, 10.0)
    assert np.array_equal(a.q_star, b.q_star)
    if a.diagnostics["converged"]:
        assert a.diagnostics["projected_gradient"] <= 1e-7
    else:
        assert a.diagnostics["stalled"]
    assert abs(a.phi_star.sum() - 1) < 1e-12


@pytest.mark.parametrize("risk", [None, WalkRisk(L=3), WalkRisk(L=3, mode="matrix_power")])
def test_analytic_gradient_matches_fd(risk):
    rng = np.random.default_rng(1)
    net = example_network()
    prof = ValueProfiles(rng.random(6), rng.random(6))
    for theta in (0.3, 50.0):
        obj = _Objective(net, prof, 2.0, theta, SolverOptions(risk=risk))
        fd = _Objective(net, prof, 2.0, theta, SolverOptions(risk=risk, gradient="finite_difference", fd_step=1e-6))
        q = rng.uniform(0.2, 0.8, 6)
        _, g = obj.value_grad(q)
        _, gf = fd.value_grad(q)
        assert np.allclose(g, gf, atol=1e-6)


def test_finite_difference_solver_agrees():
    net = example_network()
    prof = make_profiles(net)
    a = numerical_sse(net, prof, 5.0, 10.0, SolverOptions(multistarts=1))
    b = numerical_sse(net, prof, 5.0, 10.0, SolverOptions(multistarts=1, gradient="finite_difference"))
    assert abs(a.loss - b.loss) < 1e-6


def test_cost_monotone_in_alpha():
    net = example_network()
    prof = make_profiles(net)
    costs = [0.5 * float(solve(net, prof, a, 10.0, SolverOptions(multistarts=2)).q_star @
             solve(net, prof, a, 10.0, SolverOptions(multistarts=2)).q_star) for a in (0.5, 1, 2, 4, 8, 16)]
    assert all(b <= a + 1e-6 for a, b in zip(costs, costs[1:]))


def test_l1_cost_sparser():
    net = example_network()
    prof = make_profiles(net)
    res = numerical_sse(net, prof, 0.3, 10.0, SolverOptions(cost="l1", multistarts=2))
    assert res.q_star.min() >= 0 and res.q_star.max() <= 1
    assert res.loss <= numerical_sse(net, prof, 0.3, 10.0, SolverOptions(cost="l1", multistarts=0)).loss + 1e-12


def test_start_points():
    net = example_network()
    prof = make_profiles(net)
    labels = [s for s, _ in start_points(net, prof, 50.0, 10.0, SolverOptions(), extra=[np.ones(6)])]
    assert labels == ["zero", "closed_form", "warm"] + [f"random{r}" for r in range(5)]
    labels = [s for s, _ in start_points(net, prof, 1e-3, 10.0, SolverOptions(multistarts=0))]
    assert labels == ["zero"]


def test_options_validation():
    for kw in ({"method": "newton"}, {"order": "third"}, {"variant": "x"}, {"tol": 0}, {"shrink": 1.0},
               {"max_iters": 0}, {"gradient": "auto"}, {"cost": "l2"}):
        with pytest.raises(ValueError):
            SolverOptions(**kw)
    assert DEFAULT_VARIANT == "theorem"


def test_sampling_risk_rejected(k2):
    with pytest.raises(RiskError):
        numerical_sse(k2, ones(2), 5.0, 10.0, SolverOptions(risk=MonteCarloRisk(samples=100)))


def test_solver_errors(k2):
    with pytest.raises(EquilibriumError):
        numerical_sse(k2, ones(2), 0.0, 10.0)
    with pytest.raises(EquilibriumError):
        numerical_sse(k2, ones(3), 1.0, 10.0)


def test_projected_gradient_norm():
    assert projected_gradient_norm(np.array([0.0, 1.0]), np.array([1.0, -1.0])) == 0.0
    assert projected_gradient_norm(np.array([0.5]), np.array([0.2])) == pytest.approx(0.2)


def test_disconnected_graph_closed_form():
    net = build_network([(0, 1), (2, 3)], 4)
    res = asymptotic_sse(net, ones(4), 30.0, 100.0)
    assert not res.diagnostics["connected"]
    assert np.allclose(res.q_raw[:2], res.q_raw[2:])
