import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netdefense.game import (
    GameError,
    GameParams,
    ValueProfiles,
    attack_gain,
    attacker_best_response,
    attacker_utility,
    best_response_from_gain,
    defender_cost,
    defender_cost_grad,
    defender_loss,
    make_profiles,
    node_levels,
    project_simplex,
    resolve_profile,
)
from netdefense.graph import build_network, example_network, tree
from netdefense.risk import ExactRisk, WalkRisk, infection_probability_exact
from conftest import random_graphs
from oracles import simplex_points


def test_costs():
    assert defender_cost(np.zeros(3)) == 0
    assert defender_cost([1.0, 1.0]) == 1.0
    assert defender_cost([0.5, 0.5], "l1") == 1.0
    assert defender_cost_grad([0.2, 0.4]).tolist() == [0.2, 0.4]
    assert defender_cost_grad([0.2, 0.4], "l1").tolist() == [1.0, 1.0]
    with pytest.raises(GameError):
        defender_cost([0.1], "cubic")


def test_params_validation():
    with pytest.raises(GameError):
        GameParams(alpha=0, theta=1)
    with pytest.raises(GameError):
        GameParams(alpha=1, theta=-1)
    with pytest.raises(GameError):
        GameParams(alpha=1, theta=1, defender_cost="l2")
    with pytest.raises(GameError):
        ValueProfiles([1, 2], [1])
    with pytest.raises(GameError):
        ValueProfiles([np.nan], [1])


def test_utility_examples(k2):
    zero = ValueProfiles(np.zeros(4), np.zeros(4))
    net4 = build_network([(0, 1), (1, 2), (2, 3)], 4)
    phi = np.full(4, 0.25)
    assert attacker_utility(net4, phi, np.zeros(4), zero, 2.0) == pytest.approx(-0.25)
    ones = ValueProfiles(np.ones(4), np.ones(4))
    assert attacker_utility(net4, phi, np.ones(4), ones, 1.0) == pytest.approx(-1 / 8)
    k2p = ValueProfiles(np.ones(2), np.ones(2))
    assert attacker_utility(k2, [1, 0], [0, 0], k2p, 1.0) == 1.5


def test_loss_examples(k2):
    zero = ValueProfiles(np.zeros(2), np.ones(2))
    assert defender_loss(k2, [0, 0], [0.5, 0.5], zero, 3.0) == 0
    ones = ValueProfiles(np.ones(2), np.ones(2))
    assert defender_loss(k2, [0, 0], [1, 0], ones, 2.0) == 2.0
    assert defender_loss(k2, [1, 1], [0.5, 0.5], ones, 2.0) == 2.0
    assert defender_loss(k2, [1, 1], [0.5, 0.5], ones, 2.0, "l1") == 4.0


def test_best_response_examples(k2):
    prof = ValueProfiles(np.ones(2), np.array([1.0, 0.0]))
    phi = attacker_best_response(k2, [0.0, 0.5], prof, 1.0, ExactRisk())
    assert phi.tolist() == [0.75, 0.25]
    net = example_network()
    uni = make_profiles(net)
    phi = attacker_best_response(net, np.full(6, 0.3), uni, 1e9)
    assert np.abs(phi - 1 / 6).max() < 1e-9
    cycle = build_network([(i, (i + 1) % 5) for i in range(5)], 5)
    phi = attacker_best_response(cycle, np.full(5, 0.2), make_profiles(cycle), 0.5)
    assert np.allclose(phi, 0.2, atol=1e-15)


def test_gain_is_eta_weighted_probability():
    rng = np.random.default_rng(0)
    net = example_network()
    q, eta = rng.random(6), rng.random(6)
    g = attack_gain(net, q, ValueProfiles(np.ones(6), eta))
    per_seed = np.array([eta @ infection_probability_exact(net, q, np.eye(6)[s]).values for s in range(6)])
    assert np.allclose(g, per_seed, atol=1e-14)


def test_best_response_dominates_random_points():
    rng = np.random.default_rng(1)
    for net in random_graphs(8, (3, 10), seed=30):
        q = rng.random(net.n)
        prof = ValueProfiles(rng.random(net.n), rng.random(net.n))
        for theta in (0.05, 1.0, 20.0):
            phi = attacker_best_response(net, q, prof, theta)
            assert (phi >= 0).all() and abs(phi.sum() - 1) < 1e-12
            best = attacker_utility(net, phi, q, prof, theta)
            for p in simplex_points(net.n, 200, rng):
                assert attacker_utility(net, p, q, prof, theta) <= best + 1e-12


def test_project_simplex_interior_formula():
    y = np.array([0.3, 0.1, 0.2])
    x, support = project_simplex(y)
    assert support.all()
    assert np.array_equal(x, y + (1 - y.sum()) / 3)
    x, support = project_simplex([5.0, 0.0, -3.0])
    assert x.tolist() == [1.0, 0.0, 0.0] and support.tolist() == [True, False, False]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=12))
def test_project_simplex_kkt(ys):
    y = np.array(ys)
    x, support = project_simplex(y)
    assert (x >= 0).all() and abs(x.sum() - 1) < 1e-12
    # KKT: y - x equals a common multiplier on the support and is below it off the support
    mu = (y - x)[support]
    assert np.ptp(mu) < 1e-9
    if (~support).any():
        assert ((y - x)[~support] <= mu[0] + 1e-9).all()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=2, max_size=10), st.floats(0.01, 100))
def test_best_response_interior_consistency(gain, theta):
    g = np.array(gain)
    phi, _ = best_response_from_gain(g, theta)
    interior = 1 / len(g) + (g - g.mean()) / theta
    if (interior >= 0).all():
        assert np.array_equal(phi, interior)
    assert abs(phi.sum() - 1) < 1e-12 and (phi >= 0).all()


def test_best_response_theta_error():
    with pytest.raises(GameError):
        best_response_from_gain([1.0, 2.0], 0.0)


def test_profiles_presets():
    net = tree(3, 2)
    assert resolve_profile("uniform", net).tolist() == [1.0] * 13
    assert resolve_profile("mean", net).sum() == pytest.approx(1.0)
    assert not resolve_profile("zero", net).any()
    assert np.flatnonzero(resolve_profile("indicator:0,4", net)).tolist() == [0, 4]
    assert resolve_profile("level:1", net).sum() == 3
    assert resolve_profile("level:2", net).sum() == 9
    assert node_levels(net).max() == 2
    for bad in ("level:7", "indicator:99", "indicator:x", "gauss", [1.0]):
        with pytest.raises(GameError):
            resolve_profile(bad, net)


def test_walk_risk_backend():
    net = example_network()
    prof = make_profiles(net)
    phi = attacker_best_response(net, np.zeros(6), prof, 5.0, WalkRisk(L=3))
    assert abs(phi.sum() - 1) < 1e-12
