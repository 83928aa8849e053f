"""Optimality residual used as the stopping test, with infeasibility diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import dual_times_incidence, flows_to_traffic
from .projection import project_flows
from .utilities import utility_derivative

__all__ = ["ResidualReport", "optimality_residual", "residual_from_projection",
           "flow_gradient", "infeasible_fraction"]

# ||F - Q||_F^2 below this counts as F == Q
SAME_POINT_TOL = 1e-24


@dataclass(frozen=True)
class ResidualReport:
    """Residual of ``F = Pi(Q)``.

    ``value`` is ``inf`` (and ``finite`` false) when the traffic of ``F`` has a
    nonpositive off-diagonal entry; ``infeasible_fraction`` is the share of
    such entries.  ``residual_gamma`` is the minimizing multiplier ``gamma``
    in ``min_{gamma >= 0} ||G - gamma (F - Q)||_F^2``.
    """

    finite: bool
    value: float
    infeasible_fraction: float
    residual_gamma: float


def infeasible_fraction(T) -> float:
    """Fraction of off-diagonal entries of ``T`` that are not strictly positive."""
    n = T.shape[0]
    off = ~np.eye(n, dtype=bool)
    return np.count_nonzero(~(T[off] > 0)) / (n * (n - 1))


def flow_gradient(T, topo, spec) -> np.ndarray:
    """Gradient of ``-U(-F A^T)`` with respect to ``F``, i.e. ``U' A``."""
    return dual_times_incidence(utility_derivative(T, spec), topo)


def residual_from_projection(Q, F, T, topo, spec) -> ResidualReport:
    """Residual given a precomputed ``F = Pi(Q)`` and ``T = -F A^T``."""
    frac = infeasible_fraction(T)
    if frac > 0:
        return ResidualReport(False, np.inf, frac, 0.0)
    G = flow_gradient(T, topo, spec)
    D = F - Q
    g2 = float(np.vdot(G, G))
    d2 = float(np.vdot(D, D))
    inner = float(np.vdot(G, D))
    if d2 <= SAME_POINT_TOL or inner < 0:
        return ResidualReport(True, g2, 0.0, 0.0)
    # Cauchy-Schwarz keeps this nonnegative up to round-off
    return ResidualReport(True, max(g2 - inner * inner / d2, 0.0), 0.0, inner / d2)


def optimality_residual(Q, topo, spec) -> ResidualReport:
    """Residual ``r(Q)``; zero exactly when ``Pi(Q)`` is an optimal flow.

    ``r(Q) = min_{gamma >= 0} ||G - gamma (F - Q)||_F^2`` with ``F = Pi(Q)``
    and ``G = U' A``, i.e. the defect of ``F`` as a fixed point of a projected
    gradient step.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape != (topo.n, topo.m):
        raise ValueError(f"matrix has shape {Q.shape}, expected {(topo.n, topo.m)}")
    F = project_flows(Q, topo)
    return residual_from_projection(Q, F, flows_to_traffic(F, topo), topo, spec)
