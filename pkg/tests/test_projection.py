import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pdmcf.projection import project_flows, project_simplex_column, simplex_shift
from pdmcf.reference import project_columns_bisection, qp_project_oracle

from conftest import random_topology


def test_inactive_cap_is_positive_part():
    x, mu = project_simplex_column([0.2, -1.0, 0.3], 1.0)
    np.testing.assert_array_equal(x, [0.2, 0.0, 0.3])
    assert mu == 0.0


def test_hand_computed_projection():
    # (3, 1, 0) onto sum <= 2: mu = 1 and only the first entry survives
    x, mu = project_simplex_column([3.0, 1.0, 0.0], 2.0)
    np.testing.assert_allclose(x, [2.0, 0.0, 0.0])
    assert mu == pytest.approx(1.0)
    # (1, 1, 1) onto sum <= 1: mu = 2/3
    x, mu = project_simplex_column([1.0, 1.0, 1.0], 1.0)
    np.testing.assert_allclose(x, [1 / 3] * 3)


def test_ties_at_pivot():
    x, _ = project_simplex_column([2.0, 2.0, 2.0, -1.0], 3.0)
    np.testing.assert_allclose(x, [1.0, 1.0, 1.0, 0.0])


def test_rejects_nonpositive_cap():
    with pytest.raises(ValueError):
        project_simplex_column([1.0], 0.0)


@settings(max_examples=300, deadline=None)
@given(f=arrays(np.float64, st.integers(1, 30), elements=st.floats(-10, 10)),
       cap=st.floats(0.01, 20))
def test_matches_oracle_and_kkt(f, cap):
    x, mu = project_simplex_column(f, cap)
    np.testing.assert_allclose(x, qp_project_oracle(f, cap), atol=1e-9)
    assert np.all(x >= 0) and x.sum() <= cap * (1 + 1e-12) + 1e-12
    assert mu >= 0
    # KKT: x = (f - mu)_+ and mu > 0 only when the cap binds
    np.testing.assert_allclose(x, np.maximum(f - mu, 0), atol=1e-12)
    if mu > 0:
        assert x.sum() == pytest.approx(cap, rel=1e-10)


def test_variational_inequality(rng):
    # <f - x, z - x> <= 0 for feasible z
    for _ in range(200):
        n = int(rng.integers(1, 20))
        f = rng.normal(0, 3, n)
        cap = rng.uniform(0.1, 5)
        x, _ = project_simplex_column(f, cap)
        z = rng.random(n)
        z *= rng.uniform(0, cap) / z.sum()
        assert np.dot(f - x, z - x) <= 1e-10


def test_matrix_projection_matches_columns(rng):
    topo = random_topology(rng, 12)
    Q = rng.normal(0, 1, (12, topo.m))
    P = project_flows(Q, topo)
    np.testing.assert_allclose(P, project_columns_bisection(Q, topo.capacities), atol=1e-10)
    for l in range(topo.m):
        np.testing.assert_array_equal(P[:, l], project_simplex_column(Q[:, l], topo.capacities[l])[0])


def test_worker_count_does_not_change_result(rng, monkeypatch):
    topo = random_topology(rng, 30, extra=60)
    Q = rng.normal(0, 1, (30, topo.m))
    serial = project_flows(Q, topo, workers=1)
    np.testing.assert_array_equal(project_flows(Q, topo, workers=4), serial)
    monkeypatch.setenv("PDMCF_WORKERS", "3")
    np.testing.assert_array_equal(project_flows(Q, topo), serial)


def test_shift_zero_for_feasible_columns():
    Q = np.array([[0.1, 5.0], [0.2, 5.0]])
    mu = simplex_shift(Q, np.array([1.0, 1.0]))
    assert mu[0] == 0 and mu[1] == pytest.approx(4.5)
