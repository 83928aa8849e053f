"""PDMCF: over-relaxed primal-dual hybrid gradient for multicommodity flow.

The saddle problem solved is

    min_F max_Y  I(F) - (-U)^*(Y) - Tr Y^T F A^T

where ``I`` is the indicator of the feasible flow set.  One iteration is

    F_hat   = Pi(F + alpha Y A)
    F_ext   = 2 F_hat - F
    Y_hat   = prox_{beta (-U)^*}(Y - beta F_ext A^T)      (zero diagonal)
    F, Y    <- rho * (F_hat, Y_hat) + (1 - rho) * (F, Y)

with ``alpha = eta / omega`` and ``beta = eta * omega``.  The primal weight
``omega`` is rebalanced every ``k_adapt`` iterations from the sizes of the
last primal and dual moves.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import dual_times_incidence, flows_to_traffic, step_size_eta
from .instance import ProblemInstance
from .projection import project_flows
from .residual import residual_from_projection
from .utilities import prox_conjugate_matrix, total_utility

__all__ = [
    "SolverConfig",
    "SolverState",
    "TraceRecord",
    "WarmStart",
    "Solution",
    "SolverDivergence",
    "default_epsilon",
    "initial_state",
    "pdhg_iteration",
    "adapt_step_sizes",
    "solve",
    "warm_start_from_perturbed",
]

log = logging.getLogger(__name__)


class SolverDivergence(FloatingPointError):
    """An iterate picked up non-finite entries."""

    def __init__(self, iteration):
        super().__init__(f"non-finite iterate at iteration {iteration}")
        self.iteration = iteration


def default_epsilon(n: int) -> float:
    return 0.01 / (n * (n - 1))


@dataclass(frozen=True)
class SolverConfig:
    """Algorithm parameters.

    ``epsilon=None`` means ``0.01 / (n (n - 1))``.  The stopping test is
    ``r < n m epsilon``, evaluated every ``k_check`` iterations.
    ``freeze_after`` stops adapting the primal weight after that many
    iterations (``None``: never freeze).
    """

    epsilon: float | None = None
    rho: float = 1.9
    theta: float = 0.5
    k_adapt: int = 100
    tau: float = 1e-5
    k_check: int = 25
    max_iters: int = 1_000_000
    omega0: float = 1.0
    freeze_after: int | None = None

    def __post_init__(self):
        if not 0 < self.rho < 2:
            raise ValueError(f"rho must lie in (0, 2), got {self.rho}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.k_adapt < 1 or self.k_check < 1 or self.max_iters < 1:
            raise ValueError("k_adapt, k_check and max_iters must be at least 1")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")

    def epsilon_for(self, n: int) -> float:
        return default_epsilon(n) if self.epsilon is None else self.epsilon


@dataclass
class SolverState:
    """Iterates plus by-products of the most recent iteration.

    ``F_half`` and ``Y`` are the over-relaxed iterates carried between
    iterations.  ``Q`` and ``F_hat`` are the pre-projection point and the
    projected flow of the last iteration, ``Y_hat`` its raw dual prox output,
    and ``delta_F`` / ``delta_Y`` the norms of the last primal and dual moves.
    """

    F_half: np.ndarray
    Y: np.ndarray
    omega: float
    eta: float
    iter: int = 0
    Q: np.ndarray | None = None
    F_hat: np.ndarray | None = None
    Y_hat: np.ndarray | None = None
    delta_F: float = np.nan
    delta_Y: float = np.nan

    @property
    def alpha(self) -> float:
        return self.eta / self.omega

    @property
    def beta(self) -> float:
        return self.eta * self.omega


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    residual: float
    infeasible_fraction: float
    omega: float
    utility: float


@dataclass
class WarmStart:
    F: np.ndarray
    Y: np.ndarray
    omega: float
    iterations: int = 0


@dataclass
class Solution:
    F: np.ndarray
    T: np.ndarray
    Y: np.ndarray
    iterations: int
    final_residual: float
    utility: float
    converged: bool
    omega: float
    epsilon: float
    seconds: float = 0.0
    trace: list[TraceRecord] = field(default_factory=list)


def initial_state(instance: ProblemInstance, config: SolverConfig,
                  warm: WarmStart | None = None) -> SolverState:
    """Cold start ``F = 0``, ``Y = I - 1 1^T``, or the given warm start."""
    n, m = instance.n, instance.m
    eta = step_size_eta(instance.topology)
    if warm is None:
        return SolverState(np.zeros((n, m)), np.eye(n) - np.ones((n, n)),
                           config.omega0, eta)
    F = np.array(warm.F, dtype=np.float64)
    Y = np.array(warm.Y, dtype=np.float64)
    if F.shape != (n, m) or Y.shape != (n, n):
        raise ValueError("warm start shapes do not match the instance")
    return SolverState(F, Y, float(warm.omega), eta)


def pdhg_iteration(state: SolverState, instance: ProblemInstance,
                   rho: float = 1.9) -> SolverState:
    """One over-relaxed PDHG update; returns a new state."""
    topo, spec = instance.topology, instance.utility
    alpha, beta = state.alpha, state.beta
    F, Y = state.F_half, state.Y

    Q = F + alpha * dual_times_incidence(Y, topo)
    F_hat = project_flows(Q, topo)
    F_ext = 2.0 * F_hat - F
    # Y - beta F_ext A^T = Y + beta T(F_ext)
    Y_hat = prox_conjugate_matrix(Y + beta * flows_to_traffic(F_ext, topo), beta, spec)
    if rho == 1.0:
        F_new, Y_new = F_hat, Y_hat
    else:
        F_new = rho * F_hat + (1.0 - rho) * F
        Y_new = rho * Y_hat + (1.0 - rho) * Y

    k = state.iter
    if not (np.isfinite(F_new.sum()) and np.isfinite(Y_new.sum())):
        raise SolverDivergence(k)
    return SolverState(F_new, Y_new, state.omega, state.eta, k + 1, Q, F_hat, Y_hat,
                       float(np.linalg.norm(F_new - F)), float(np.linalg.norm(Y_new - Y)))


def adapt_step_sizes(state: SolverState, delta_F: float, delta_Y: float,
                     config: SolverConfig) -> SolverState:
    """Primal-weight update ``omega <- (dY / dF)^theta * omega^(1 - theta)``.

    Skipped unless both moves exceed ``config.tau``; the step sizes follow
    from ``omega`` (``alpha = eta / omega``, ``beta = eta * omega``).
    """
    if not (delta_F > config.tau and delta_Y > config.tau):
        return state
    theta = config.theta
    omega = (delta_Y / delta_F) ** theta * state.omega ** (1.0 - theta)
    return replace(state, omega=float(omega))


def _adapt_due(k, config):
    if config.freeze_after is not None and k >= config.freeze_after:
        return False
    return k % config.k_adapt == 0


def _iterate(instance, config, state, k):
    """Iteration ``k``: PDHG update followed by the scheduled adaptation."""
    state = pdhg_iteration(state, instance, config.rho)
    if _adapt_due(k, config):
        state = adapt_step_sizes(state, state.delta_F, state.delta_Y, config)
    return state


def solve(instance: ProblemInstance, config: SolverConfig | None = None,
          warm: WarmStart | None = None) -> Solution:
    """Run PDMCF until ``r < n m epsilon`` or ``config.max_iters``.

    The residual is evaluated at iterations ``0, k_check, 2 k_check, ...`` on
    that iteration's pre-projection point ``Q``; a passing check returns its
    projected flow.  ``Solution.iterations`` counts the iterations performed.
    Without convergence, the checked iterate with the smallest residual is
    returned with ``converged=False``.
    """
    config = config or SolverConfig()
    topo, spec = instance.topology, instance.utility
    n, m = instance.n, instance.m
    eps = config.epsilon_for(n)
    threshold = n * m * eps
    state = initial_state(instance, config, warm)
    trace: list[TraceRecord] = []
    best = None
    start = time.perf_counter()

    for k in range(config.max_iters):
        state = _iterate(instance, config, state, k)
        if k % config.k_check:
            continue
        T = flows_to_traffic(state.F_hat, topo)
        rep = residual_from_projection(state.Q, state.F_hat, T, topo, spec)
        util = total_utility(T, spec).value if rep.finite else np.nan
        trace.append(TraceRecord(k + 1, rep.value, rep.infeasible_fraction, state.omega, util))
        if best is None or rep.value <= best[0]:
            best = (rep.value, k + 1, state.F_hat, T, state.Y, util)
        if rep.finite and rep.value < threshold:
            log.debug("converged at iteration %d, residual %.3e", k + 1, rep.value)
            return Solution(state.F_hat, T, state.Y, k + 1, rep.value, util, True,
                            state.omega, eps, time.perf_counter() - start, trace)

    value, _, F, T, Y, util = best
    log.warning("no convergence within %d iterations (best residual %.3e)",
                config.max_iters, value)
    return Solution(F, T, Y, config.max_iters, value, util, False, state.omega, eps,
                    time.perf_counter() - start, trace)


def warm_start_from_perturbed(instance: ProblemInstance, nu: float,
                              config: SolverConfig | None = None, seed: int = 0) -> WarmStart:
    """Feasibility-phase state of a solve with randomly perturbed weights.

    Each off-diagonal weight is scaled by ``1 + nu`` or ``1 - nu`` with equal
    probability, and PDMCF runs on the perturbed problem until the projected
    flow has strictly positive off-diagonal traffic.  That flow, the current
    dual and the current primal weight form the warm start.
    """
    from .generator import perturb_weights

    if not 0 <= nu < 1:
        raise ValueError(f"nu must lie in [0, 1), got {nu}")
    config = config or SolverConfig()
    perturbed = instance.with_utility(perturb_weights(instance.utility, nu, seed))
    topo = instance.topology
    state = initial_state(perturbed, config)
    off = ~np.eye(instance.n, dtype=bool)
    for k in range(config.max_iters):
        state = _iterate(perturbed, config, state, k)
        if np.all(flows_to_traffic(state.F_hat, topo)[off] > 0):
            return WarmStart(state.F_hat.copy(), state.Y.copy(), state.omega, k + 1)
    raise RuntimeError(f"no feasible iterate within {config.max_iters} iterations")
