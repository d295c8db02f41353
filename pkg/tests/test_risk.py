import networkx as nx
import numpy as np
import pytest
from scipy import stats

from netdefense.graph import build_network, example_network, tree
from netdefense.protect import one_point_protection
from netdefense.risk import (
    ActivationRisk,
    ExactRisk,
    MonteCarloRisk,
    RiskError,
    WalkRisk,
    activation_risk,
    connection_matrix,
    exact_connection_matrix,
    infected_set,
    infection_probability_exact,
    infection_probability_mc,
    reach_decomposition,
    risk_from_dict,
    risk_to_dict,
    risk_vector,
    state_weights,
    walk_connection_matrix,
    walk_count_risk,
)
from conftest import random_graphs
from oracles import infection_probabilities, to_nx, walk_matrix

TRIANGLE = [(0, 1), (1, 2), (0, 2)]


def test_infected_set_examples(path3):
    assert infected_set(path3, [0, 0, 0], 0) == set()
    assert infected_set(path3, [1, 0, 1], 0) == {0}
    x = np.ones(6, dtype=int)
    x[[1, 3]] = 0
    assert infected_set(example_network(), x, 5) == {4, 5}


def test_infected_set_matches_matrix_powers():
    rng = np.random.default_rng(0)
    for net in random_graphs(30, (3, 8), seed=10):
        x = rng.integers(0, 2, net.n)
        s = int(rng.integers(net.n))
        T = net.adjacency * np.outer(x, x)
        reach = np.zeros(net.n, dtype=bool)
        M = np.eye(net.n)
        for _ in range(net.n):
            M = M @ T
            reach |= M[:, s] >= 1
        expected = set(np.flatnonzero(reach)) | ({s} if x[s] else set())
        assert infected_set(net, x, s) == expected


def test_exact_examples(k2):
    single = build_network([], 1)
    assert infection_probability_exact(single, [0.25], [1.0]).values[0] == 0.75
    P = infection_probability_exact(k2, [0.5, 0.5], [0.5, 0.5])
    assert P.values.tolist() == [0.375, 0.375]
    net = example_network()
    assert not infection_probability_exact(net, np.ones(6), np.full(6, 1 / 6)).values.any()


def test_exact_vs_exhaustive_oracle():
    rng = np.random.default_rng(1)
    for net in random_graphs(15, (2, 7), seed=11):
        q, phi = rng.random(net.n), rng.dirichlet(np.ones(net.n))
        P, total = infection_probabilities(net, q, phi)
        assert total == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(infection_probability_exact(net, q, phi).values, P, atol=1e-12)


def test_state_weights_normalized():
    rng = np.random.default_rng(2)
    net = example_network()
    w = state_weights(net, rng.random(6))
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(RiskError):
        state_weights(build_network([], 17), np.zeros(17))


def test_exact_size_limit():
    net = build_network([(i, i + 1) for i in range(16)] + [(0, 16)], 17)
    with pytest.raises(RiskError, match="monte_carlo"):
        exact_connection_matrix(net, np.zeros(17))


def test_forest_matches_enumeration():
    rng = np.random.default_rng(3)
    net = tree(2, 3)
    q = rng.random(net.n)
    W, _ = exact_connection_matrix(net, q)
    g = to_nx(net)
    for i in range(net.n):
        for s in range(net.n):
            path = nx.shortest_path(g, i, s)
            assert W[i, s] == pytest.approx(np.prod(1 - q[path]), rel=1e-12)


def test_monotone_in_q():
    rng = np.random.default_rng(4)
    for net in random_graphs(10, (3, 10), seed=12):
        q, phi = rng.random(net.n), rng.dirichlet(np.ones(net.n))
        base = infection_probability_exact(net, q, phi).values
        k = int(rng.integers(net.n))
        q2 = q.copy()
        q2[k] = q[k] + (1 - q[k]) * rng.random()
        assert (infection_probability_exact(net, q2, phi).values <= base + 1e-15).all()


def test_linear_in_phi():
    rng = np.random.default_rng(5)
    net = example_network()
    q, phi = rng.random(6), rng.dirichlet(np.ones(6))
    cols = np.stack([infection_probability_exact(net, q, np.eye(6)[s]).values for s in range(6)], axis=1)
    assert np.allclose(cols @ phi, infection_probability_exact(net, q, phi).values, atol=1e-15)


def test_exact_gradient_fd():
    rng = np.random.default_rng(6)
    net = example_network()
    q = rng.uniform(0.1, 0.9, 6)
    _, dW = exact_connection_matrix(net, q, grad=True)
    h = 1e-6
    for k in range(6):
        e = np.eye(6)[k] * h
        fd = (exact_connection_matrix(net, q + e)[0] - exact_connection_matrix(net, q - e)[0]) / (2 * h)
        assert np.allclose(dW[:, :, k], fd, atol=1e-8)


def test_mc_examples(k2):
    assert not infection_probability_mc(k2, [1.0, 1.0], [0.5, 0.5], samples=1000).values.any()
    P = infection_probability_mc(k2, [0.5, 0.5], [0.5, 0.5], samples=100_000, seed=3)
    assert np.allclose(P.values, 0.375, atol=0.005)


def test_mc_deterministic_and_worker_independent():
    net = example_network()
    q, phi = np.full(6, 0.3), np.full(6, 1 / 6)
    a = infection_probability_mc(net, q, phi, samples=20_000, seed=9)
    b = infection_probability_mc(net, q, phi, samples=20_000, seed=9, workers=3)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(RiskError):
        infection_probability_mc(net, q, phi, samples=0)


def test_mc_connection_matrix_close_to_exact():
    net = example_network()
    q = np.linspace(0.1, 0.6, 6)
    W_mc, _ = connection_matrix(net, q, MonteCarloRisk(samples=50_000, seed=1))
    assert np.abs(W_mc - exact_connection_matrix(net, q)[0]).max() < 0.01


def test_walk_examples(path3):
    R = walk_count_risk(path3, np.zeros(3), [0, 0, 1], L=2)
    assert R.values[0] == 1.0
    assert not walk_count_risk(path3, np.ones(3), [0, 0, 1], L=3).values.any()
    tri = build_network(TRIANGLE, 3)
    for mode in ("exact_distinct", "matrix_power"):
        assert walk_count_risk(tri, np.zeros(3), [1, 0, 0], L=1, mode=mode).values.tolist() == [0, 1, 1]


def test_walk_vs_enumerator():
    rng = np.random.default_rng(7)
    for net in random_graphs(12, (3, 8), seed=13):
        q = rng.random(net.n)
        for L in (1, 2, 3, 4):
            W, _ = walk_connection_matrix(net, q, L)
            ref = walk_matrix(net, q, L)
            assert np.allclose(W, ref, rtol=1e-12, atol=1e-300)
            Wp, _ = walk_connection_matrix(net, q, L, mode="matrix_power")
            assert np.allclose(Wp, walk_matrix(net, q, L, distinct=False), rtol=1e-12)
            assert (Wp <= W * (1 + 1e-12)).all()


def test_walk_modes_agree_without_defense_or_revisits():
    net = random_graphs(1, (6, 6), seed=14)[0]
    W, _ = walk_connection_matrix(net, np.zeros(6), 4)
    Wp, _ = walk_connection_matrix(net, np.zeros(6), 4, mode="matrix_power")
    assert np.allclose(W, Wp, rtol=1e-14)
    # a tree has no revisit-free discrepancy at L=1
    t = tree(2, 2)
    q = np.linspace(0, 0.9, t.n)
    assert np.allclose(walk_connection_matrix(t, q, 1)[0], walk_connection_matrix(t, q, 1, mode="matrix_power")[0])


@pytest.mark.parametrize("mode", ["exact_distinct", "matrix_power"])
def test_walk_gradient_fd(mode):
    rng = np.random.default_rng(8)
    net = example_network()
    q = rng.uniform(0.1, 0.9, 6)
    _, dW = walk_connection_matrix(net, q, 4, mode, grad=True)
    h = 1e-6
    for k in range(6):
        e = np.eye(6)[k] * h
        fd = (walk_connection_matrix(net, q + e, 4, mode)[0] - walk_connection_matrix(net, q - e, 4, mode)[0]) / (2 * h)
        assert np.allclose(dW[:, :, k], fd, rtol=1e-6, atol=1e-7)


def test_walk_zero_diagonal():
    net = example_network()
    W, dW = walk_connection_matrix(net, np.full(6, 0.2), 3, grad=True, zero_diagonal=True)
    assert not np.diag(W).any()
    assert not dW[np.arange(6), np.arange(6)].any()


def test_walk_errors(path3):
    with pytest.raises(RiskError, match="matrix_power"):
        walk_connection_matrix(path3, np.zeros(3), 9)
    with pytest.raises(RiskError):
        walk_connection_matrix(path3, np.zeros(3), 0)
    with pytest.raises(RiskError):
        walk_connection_matrix(path3, np.zeros(3), 2, mode="bogus")
    assert walk_connection_matrix(path3, np.zeros(3), 12, mode="matrix_power")[0].shape == (3, 3)


def test_activation_linear_matches_walk():
    net = example_network()
    q, phi = np.full(6, 0.3), np.full(6, 1 / 6)
    R = activation_risk(net, q, phi, "linear", L=3, samples=40_000, seed=2, include_seed=False)
    ref = walk_count_risk(net, q, phi, L=3).values
    assert (np.abs(R.values - ref) <= 4 * R.stderr + 1e-12).all()


def test_activation_step_converges_to_probability():
    rng = np.random.default_rng(9)
    net = example_network()
    q, phi = rng.random(6), rng.dirichlet(np.ones(6))
    R = activation_risk(net, q, phi, "step", L=6, samples=100_000, seed=4)
    P = infection_probability_exact(net, q, phi).values
    assert (np.abs(R.values - P) <= 3 * R.stderr + 1e-12).all()


def test_activation_trivial_and_errors():
    net = example_network()
    assert not activation_risk(net, np.ones(6), np.full(6, 1 / 6), samples=500).values.any()
    with pytest.raises(RiskError):
        activation_risk(net, np.zeros(6), np.full(6, 1 / 6), f="cubic")
    with pytest.raises(RiskError):
        connection_matrix(net, np.zeros(6), ActivationRisk(), grad=True)


@pytest.mark.parametrize("f", ["step", "linear", "log1p", "sqrt", "saturating"])
def test_activation_monotone_in_q(f):
    net = example_network()
    phi = np.full(6, 1 / 6)
    lo = activation_risk(net, np.full(6, 0.2), phi, f, samples=5000, seed=1).values
    hi = activation_risk(net, np.full(6, 0.6), phi, f, samples=5000, seed=1).values
    # common random numbers: a larger q removes nodes sample by sample
    assert (hi <= lo + 1e-12).all()


def test_risk_vector_dispatch(k2):
    q, phi = [0.5, 0.5], [0.5, 0.5]
    assert risk_vector(k2, q, phi).values.tolist() == [0.375, 0.375]
    assert risk_vector(k2, q, phi, ExactRisk()).kind == "exact"
    assert risk_vector(k2, q, phi, WalkRisk(L=1)).values.tolist() == [0.125, 0.125]


def test_spec_roundtrip():
    for spec in (ExactRisk(), MonteCarloRisk(10, 3), WalkRisk(3, "matrix_power", True), ActivationRisk("sqrt", 2, 7, 1, False)):
        assert risk_from_dict(risk_to_dict(spec)) == spec
    for bad in ({"kind": "nope"}, {"kind": "walk", "mode": "x"}, {"kind": "walk", "foo": 1}, {"kind": "activation", "f": "x"}):
        with pytest.raises(RiskError):
            risk_from_dict(bad)


def test_reach_decomposition_identity():
    rng = np.random.default_rng(10)
    net = example_network()
    q, phi = rng.random(6), rng.dirichlet(np.ones(6))
    P = infection_probability_exact(net, q, phi).values
    for i in range(6):
        j = (i + 1) % 6
        pt, qji = reach_decomposition(net, q, phi, i, j)
        assert (1 - q[i]) * pt == pytest.approx(P[i], abs=1e-14)
        qj = q.copy()
        qj[j] = 0.0
        qij = qj.copy()
        qij[i] = 1.0
        lhs = exact_connection_matrix(net, qj)[0][j] @ phi
        rhs = exact_connection_matrix(net, qij)[0][j] @ phi + (1 - q[i]) * qji
        assert lhs == pytest.approx(rhs, abs=1e-14)


def test_reach_decomposition_k2(k2):
    _, qji = reach_decomposition(k2, [0.0, 0.0], [0.5, 0.5], 0, 1)
    assert qji == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(RiskError):
        reach_decomposition(k2, [0.0, 0.0], [0.5, 0.5], 0, 0)


def test_first_order_expansion():
    # P~_i = 1 - sum_{j != i} sum_t phi_t a^j_{it} q_j + O(eps^2)
    net = example_network()
    a = one_point_protection(net)
    rng = np.random.default_rng(11)
    base, phi = rng.random(6), rng.dirichlet(np.ones(6))
    errs = []
    for eps in (1e-2, 1e-3):
        q = eps * base
        worst = 0.0
        for i in range(6):
            pt, _ = reach_decomposition(net, q, phi, i, (i + 1) % 6)
            approx = 1 - sum(phi @ a.dense(j)[i] * q[j] for j in range(6) if j != i)
            worst = max(worst, abs(pt - approx))
        errs.append(worst)
    assert errs[1] < errs[0] / 50


def test_mc_standard_errors_are_calibrated():
    # z-scores against the exact answer should look standard normal
    rng = np.random.default_rng(12)
    z = []
    for net in random_graphs(15, (6, 12), (2.0, 3.0), seed=15):
        q, phi = rng.random(net.n), rng.dirichlet(np.ones(net.n))
        exact = infection_probability_exact(net, q, phi).values
        mc = infection_probability_mc(net, q, phi, samples=20_000, seed=int(rng.integers(1000)))
        z.extend((mc.values - exact) / mc.stderr)
    z = np.array(z)
    assert abs(z.mean()) < 0.3 and 0.8 < z.std() < 1.2
    assert stats.kstest(z, "norm").pvalue > 0.01
