import math

import numpy as np
import pytest

from pdmcf.generator import generate_instance
from pdmcf.graph import Topology, flows_to_traffic, step_size_eta
from pdmcf.instance import ProblemInstance
from pdmcf.reference import dense_incidence, lambda_max_power_iteration, reference_solve
from pdmcf.solver import (Solution, SolverConfig, SolverDivergence, SolverState, WarmStart,
                          adapt_step_sizes, default_epsilon, initial_state, pdhg_iteration,
                          solve, warm_start_from_perturbed)
from pdmcf.utilities import UtilitySpec

F_STAR = np.array([[0.0, 1.0], [1.0, 0.0]])
Y_STAR = np.eye(2) - np.ones((2, 2))


def transliterated_step(F, Y, alpha, beta, rho, A, caps, W):
    """Straight-line scalar rendering of one over-relaxed PDHG update."""
    n, m = F.shape
    Q = [[F[i][l] + alpha * (Y[i] @ A[:, l]) for l in range(m)] for i in range(n)]
    F_hat = np.zeros((n, m))
    for l in range(m):
        col = [Q[i][l] for i in range(n)]
        pos = [max(v, 0.0) for v in col]
        if sum(pos) <= caps[l]:
            mu = 0.0
        else:
            srt = sorted(col, reverse=True)
            run, mu = 0.0, 0.0
            for t, v in enumerate(srt, start=1):
                run += v
                cand = (run - caps[l]) / t
                if v > cand:
                    mu = cand
        for i in range(n):
            F_hat[i][l] = max(col[i] - mu, 0.0)
    F_ext = 2.0 * F_hat - F
    T_ext = -F_ext @ A.T
    Y_hat = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            y = Y[i][j] + beta * T_ext[i][j]
            bw = beta * W[i][j]
            s = math.sqrt(y * y + 4.0 * bw)
            Y_hat[i][j] = -2.0 * bw / (y + s) if y > 0 else 0.5 * (y - s)
    F_new = rho * F_hat + (1.0 - rho) * F
    Y_new = rho * Y_hat + (1.0 - rho) * Y
    return F_new, Y_new, F_hat, Y_hat


def test_one_step_matches_transliteration_bitwise(two_node):
    cfg = SolverConfig()
    s0 = initial_state(two_node, cfg)
    s1 = pdhg_iteration(s0, two_node, rho=1.9)
    A = dense_incidence(two_node.topology)
    F, Y, F_hat, Y_hat = transliterated_step(
        s0.F_half, s0.Y, s0.alpha, s0.beta, 1.9, A, two_node.topology.capacities,
        two_node.utility.weights)
    np.testing.assert_array_equal(s1.F_hat, F_hat)
    np.testing.assert_array_equal(s1.Y_hat, Y_hat)
    np.testing.assert_array_equal(s1.F_half, F)
    np.testing.assert_array_equal(s1.Y, Y)
    assert s1.iter == 1


def test_one_step_matches_transliteration_random(rng):
    inst = generate_instance(6, 2, seed=3)
    A = dense_incidence(inst.topology)
    state = SolverState(rng.random((6, inst.m)) * 0.3, -rng.random((6, 6)), 1.7,
                        step_size_eta(inst.topology))
    out = pdhg_iteration(state, inst, rho=1.5)
    F, Y, _, _ = transliterated_step(state.F_half, state.Y, state.alpha, state.beta, 1.5, A,
                                     inst.topology.capacities, inst.utility.weights)
    np.testing.assert_allclose(out.F_half, F, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(out.Y, Y, rtol=1e-13, atol=1e-15)


def test_rho_one_identity(rng):
    inst = generate_instance(6, 2, seed=1)
    state = SolverState(rng.random((6, inst.m)), -rng.random((6, 6)), 1.0,
                        step_size_eta(inst.topology))
    out = pdhg_iteration(state, inst, rho=1.0)
    np.testing.assert_array_equal(out.F_half, out.F_hat)
    np.testing.assert_array_equal(out.Y, out.Y_hat)


def test_saddle_point_is_fixed(two_node):
    # T* = [[., 1], [1, .]] saturates both unit edges; Y* = -u'(T*) off the diagonal
    state = SolverState(F_STAR.copy(), Y_STAR.copy(), 1.0, step_size_eta(two_node.topology))
    out = pdhg_iteration(state, two_node, rho=1.9)
    np.testing.assert_allclose(out.F_half, F_STAR, atol=1e-10)
    np.testing.assert_allclose(out.Y, Y_STAR, atol=1e-10)


def test_dual_prox_diagonal_always_zero():
    inst = generate_instance(8, 3, seed=2)
    state = initial_state(inst, SolverConfig())
    # I - 1 1^T: zero diagonal, -1 elsewhere
    assert np.all(np.diag(state.Y) == 0.0)
    assert np.all(state.Y[~np.eye(8, dtype=bool)] == -1.0)
    for _ in range(30):
        state = pdhg_iteration(state, inst)
        assert np.all(np.diag(state.Y_hat) == 0.0)


def test_projection_output_always_feasible():
    inst = generate_instance(8, 3, seed=2)
    state = initial_state(inst, SolverConfig())
    caps = inst.topology.capacities
    for _ in range(30):
        state = pdhg_iteration(state, inst)
        assert state.F_hat.min() >= 0
        assert np.all(state.F_hat.sum(axis=0) <= caps * (1 + 1e-12))


def test_step_sizes_respect_spectral_bound():
    inst = generate_instance(20, 4, seed=0)
    A = dense_incidence(inst.topology)
    state = initial_state(inst, SolverConfig())
    lam = lambda_max_power_iteration(A @ A.T)
    assert state.alpha * state.beta * lam <= 1 + 1e-12
    state = adapt_step_sizes(state, 1.0, 9.0, SolverConfig())
    assert state.alpha * state.beta == pytest.approx(state.eta ** 2, rel=1e-14)


# --- adaptation -----------------------------------------------------------

def _state(omega=1.0):
    return SolverState(np.zeros((2, 2)), np.zeros((2, 2)), omega, 0.5)


def test_adapt_equal_deltas():
    # ratio 1 leaves omega = 1 alone; otherwise omega moves to omega^(1 - theta)
    assert adapt_step_sizes(_state(1.0), 0.2, 0.2, SolverConfig()).omega == 1.0
    assert adapt_step_sizes(_state(3.0), 0.2, 0.2, SolverConfig()).omega == pytest.approx(np.sqrt(3))


def test_adapt_square_root_rule():
    s = adapt_step_sizes(_state(1.0), 1.0, 4.0, SolverConfig(theta=0.5))
    assert s.omega == pytest.approx(2.0)
    assert s.alpha == pytest.approx(0.25) and s.beta == pytest.approx(1.0)


@pytest.mark.parametrize("dF, dY", [(1e-6, 1.0), (1.0, 1e-6), (1e-5, 1.0)])
def test_adapt_guard(dF, dY):
    assert adapt_step_sizes(_state(1.0), dF, dY, SolverConfig()).omega == 1.0


# --- full solves ----------------------------------------------------------

def test_two_node_analytic_optimum(two_node):
    sol = solve(two_node)
    assert sol.converged
    assert sol.utility == pytest.approx(0.0, abs=1e-3)
    np.testing.assert_allclose(sol.F.sum(axis=0), 1.0, atol=1e-3)
    assert sol.final_residual < 2 * 2 * default_epsilon(2)


def test_two_node_asymmetric_weights():
    # each pair has its own edge, so the optimum saturates both regardless of weights
    topo = Topology.from_edges(2, [(0, 1), (1, 0)], [2.0, 0.5])
    inst = ProblemInstance(topo, UtilitySpec("power", np.array([[0, 1.0], [3.0, 0]]), 0.5))
    sol = solve(inst)
    assert sol.converged
    assert sol.T[1, 0] == pytest.approx(2.0, rel=1e-3)
    assert sol.T[0, 1] == pytest.approx(0.5, rel=1e-3)


@pytest.mark.parametrize("family, gamma", [("log", None), ("power", 0.5)])
def test_matches_reference_solver(family, gamma):
    inst = generate_instance(10, 3, seed=7, family=family, gamma=gamma)
    sol = solve(inst)
    ref = reference_solve(inst)
    assert sol.converged and ref.converged
    assert sol.utility == pytest.approx(ref.utility, rel=1e-3, abs=1e-3)
    T = flows_to_traffic(sol.F, inst.topology)
    assert np.all(T[~np.eye(10, dtype=bool)] > 0)
    assert sol.final_residual < inst.n * inst.m * sol.epsilon


def test_solution_invariants():
    inst = generate_instance(12, 3, seed=5)
    sol = solve(inst)
    assert sol.converged
    assert sol.iterations % 25 == 1
    assert sol.trace[-1].iter == sol.iterations
    assert [r.iter for r in sol.trace] == list(range(1, sol.iterations + 1, 25))
    np.testing.assert_allclose(sol.T, flows_to_traffic(sol.F, inst.topology))
    assert sol.F.min() >= 0
    assert np.all(sol.F.sum(axis=0) <= inst.topology.capacities * (1 + 1e-12))


def test_max_iters_returns_best_unconverged():
    inst = generate_instance(12, 3, seed=5)
    sol = solve(inst, SolverConfig(max_iters=60))
    assert not sol.converged
    assert sol.iterations == 60
    finite = [r.residual for r in sol.trace]
    assert sol.final_residual == min(finite)


def test_warm_start_from_optimum_converges_at_first_check():
    inst = generate_instance(12, 3, seed=5)
    cold = solve(inst, SolverConfig(epsilon=default_epsilon(12) / 100))
    warm = solve(inst, warm=WarmStart(cold.F, cold.Y, cold.omega))
    assert warm.converged and warm.iterations == 1


def test_warm_start_capture_is_feasible():
    inst = generate_instance(12, 3, seed=5)
    ws = warm_start_from_perturbed(inst, 0.1, seed=3)
    T = flows_to_traffic(ws.F, inst.topology)
    assert np.all(T[~np.eye(12, dtype=bool)] > 0)
    assert ws.F.min() >= 0
    assert np.all(ws.F.sum(axis=0) <= inst.topology.capacities * (1 + 1e-12))
    assert ws.iterations > 0 and ws.omega > 0


def test_warm_start_nu_zero_is_early_iterate_of_original():
    inst = generate_instance(12, 3, seed=5)
    cfg = SolverConfig()
    ws = warm_start_from_perturbed(inst, 0.0, cfg)
    state = initial_state(inst, cfg)
    from pdmcf.solver import _iterate
    for k in range(ws.iterations):
        state = _iterate(inst, cfg, state, k)
    np.testing.assert_array_equal(state.F_hat, ws.F)
    np.testing.assert_array_equal(state.Y, ws.Y)


def test_warm_start_rejects_bad_nu():
    inst = generate_instance(6, 2, seed=0)
    with pytest.raises(ValueError):
        warm_start_from_perturbed(inst, 1.0)


def test_warm_start_shape_mismatch():
    inst = generate_instance(6, 2, seed=0)
    with pytest.raises(ValueError, match="shapes"):
        solve(inst, warm=WarmStart(np.zeros((6, 1)), np.zeros((6, 6)), 1.0))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(two_node):
    state = SolverState(np.full((2, 2), np.inf), Y_STAR.copy(), 1.0, 0.5)
    with pytest.raises(SolverDivergence, match="iteration 0"):
        pdhg_iteration(state, two_node)


def test_deterministic():
    inst = generate_instance(15, 3, seed=9)
    a, b = solve(inst), solve(inst)
    assert a.iterations == b.iterations
    np.testing.assert_array_equal(a.F, b.F)
    np.testing.assert_array_equal(a.Y, b.Y)


def test_freeze_after_stops_adaptation():
    inst = generate_instance(10, 3, seed=1)
    sol = solve(inst, SolverConfig(freeze_after=1, max_iters=400))
    omegas = {r.omega for r in sol.trace}
    assert len(omegas) == 1


@pytest.mark.parametrize("kwargs", [dict(rho=2.0), dict(rho=0.0), dict(epsilon=0.0),
                                    dict(k_adapt=0), dict(omega0=-1.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_default_epsilon():
    assert default_epsilon(100) == pytest.approx(0.01 / 9900)
    assert SolverConfig(epsilon=1e-3).epsilon_for(50) == 1e-3


def test_path_graph_analytic_optimum():
    # stationarity on the path 0 - 1 - 2 with unit caps: one-hop pairs get 2/3,
    # the two-hop pairs 1/3
    topo = Topology.from_edges(3, [(0, 1), (1, 0), (1, 2), (2, 1)], [1.0] * 4)
    inst = ProblemInstance(topo, UtilitySpec("log", np.ones((3, 3)) - np.eye(3)))
    sol = solve(inst, SolverConfig(epsilon=1e-8))
    assert sol.converged
    expect = np.array([[0, 2 / 3, 1 / 3], [2 / 3, 0, 2 / 3], [1 / 3, 2 / 3, 0]])
    off = ~np.eye(3, dtype=bool)
    np.testing.assert_allclose(sol.T[off], expect[off], atol=1e-3)
