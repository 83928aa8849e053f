"""Slow, independent oracles for testing.

Nothing here reuses the solver's kernels: the incidence matrix is built
densely, projections use multiplier bisection instead of sorting, and the
reference solver is accelerated projected gradient rather than PDHG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

__all__ = [
    "dense_incidence",
    "qp_project_oracle",
    "project_columns_bisection",
    "lambda_max_power_iteration",
    "reference_residual",
    "reference_solve",
    "shortest_path_routing",
    "ReferenceResult",
]


def dense_incidence(topo) -> np.ndarray:
    """Explicit ``n x m`` incidence matrix: +1 at each edge's head, -1 at its tail."""
    A = np.zeros((topo.n, topo.m))
    cols = np.arange(topo.m)
    A[np.asarray(topo.heads), cols] = 1.0
    A[np.asarray(topo.tails), cols] = -1.0
    return A


def project_columns_bisection(Q, caps, steps=200):
    """Project each column of ``Q`` onto ``{x >= 0, sum(x) <= cap}``.

    The multiplier ``mu`` solves ``sum((f - mu)_+) = cap``, a decreasing
    function of ``mu``, and is bracketed by bisection.  Once no entry lies
    strictly inside the bracket (or after ``steps`` halvings) the active set
    is fixed and gives ``mu`` in closed form.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    caps = np.broadcast_to(np.asarray(caps, dtype=np.float64), (Q.shape[1],))
    P = np.maximum(Q, 0.0)
    over = P.sum(axis=0) > caps
    if not over.any():
        return P
    f, c = Q[:, over], caps[over]
    lo = np.zeros(f.shape[1])
    hi = f.max(axis=0)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        big = np.maximum(f - mid, 0.0).sum(axis=0) > c
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
        if not np.any((f > lo) & (f < hi)):
            break
    active = f > lo
    mu = ((f * active).sum(axis=0) - c) / active.sum(axis=0)
    P[:, over] = np.maximum(f - mu, 0.0)
    return P


def qp_project_oracle(f, cap):
    """Euclidean projection of a vector onto ``{x >= 0, sum(x) <= cap}``."""
    f = np.asarray(f, dtype=np.float64).reshape(-1, 1)
    return project_columns_bisection(f, np.array([cap]))[:, 0]


def lambda_max_power_iteration(M, iters=5000, tol=1e-12, seed=0):
    """Largest eigenvalue of a symmetric positive semidefinite matrix."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = M @ x
        lam_new = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        x = y / norm
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def _utility_parts(T, W, family, gamma):
    off = ~np.eye(T.shape[0], dtype=bool)
    t, w = T[off], W[off]
    if np.any(t <= 0):
        return -np.inf, None
    D = np.zeros_like(T)
    if family == "log":
        val = np.sum(w * np.log(t))
        D[off] = w / t
    else:
        val = np.sum(w * t ** gamma)
        D[off] = w * gamma * t ** (gamma - 1.0)
    return float(val), D


def reference_residual(Q, A, caps, W, family="log", gamma=None, F=None):
    """Optimality residual of ``F = Pi(Q)`` computed with dense algebra."""
    if F is None:
        F = project_columns_bisection(Q, caps)
    _, D = _utility_parts(-F @ A.T, W, family, gamma)
    if D is None:
        return np.inf
    G = D @ A
    R = F - Q
    g2, r2, gr = np.sum(G * G), np.sum(R * R), np.sum(G * R)
    if r2 <= 1e-24 or gr < 0:
        return float(g2)
    return float(max(g2 - gr * gr / r2, 0.0))


def shortest_path_routing(topo):
    """Hop-count shortest-path routing of equal all-pairs traffic, scaled to the caps."""
    n, m = topo.n, topo.m
    graph = csr_matrix((np.ones(m), (topo.tails, topo.heads)), shape=(n, n))
    edge_id = {(int(t), int(h)): l for l, (t, h) in enumerate(zip(topo.tails, topo.heads))}
    _, pred = shortest_path(graph, unweighted=True, return_predecessors=True)
    F = np.zeros((n, m))
    for src in range(n):
        for dst in range(n):
            v = dst
            while v != src:
                u = pred[src, v]
                F[dst, edge_id[(int(u), int(v))]] += 1.0
                v = u
    return F / np.max(F.sum(axis=0) / topo.capacities)


@dataclass
class ReferenceResult:
    F: np.ndarray
    utility: float
    residual: float
    iterations: int
    converged: bool


def reference_solve(instance, tol_per_entry=1e-10, max_iters=200_000) -> ReferenceResult:
    """Maximize ``U(-F A^T)`` over feasible flows by accelerated projected gradient.

    Starts from a scaled shortest-path flow (strictly inside the utility
    domain), uses backtracking on the step size, rejects any step that
    leaves the domain, and restarts momentum whenever the objective drops.
    Stops when the residual at the gradient-step point is below
    ``tol_per_entry * n * m``.
    """
    topo, spec = instance.topology, instance.utility
    W, family, gamma = spec.weights, spec.family, spec.power_exponent
    A = dense_incidence(topo)
    caps = np.asarray(topo.capacities)
    n, m = topo.n, topo.m
    target = tol_per_entry * n * m

    def objective(F):
        return _utility_parts(-F @ A.T, W, family, gamma)

    F = shortest_path_routing(topo)
    val, D = objective(F)
    X, Xval, XD = F, val, D
    t_mom = 1.0
    step = 1.0
    res = np.inf
    for it in range(1, max_iters + 1):
        # ascent step from the extrapolated point X, with backtracking
        grad = XD @ A  # gradient of -U is grad; ascent direction is -grad
        while True:
            Q = X - step * grad
            F_new = project_columns_bisection(Q, caps)
            val_new, D_new = objective(F_new)
            if D_new is not None:
                diff = F_new - X
                # sufficient-increase test for the concave objective
                if val_new >= Xval - np.sum(grad * diff) - np.sum(diff * diff) / (2 * step) - 1e-12 * abs(Xval):
                    break
            step *= 0.5
            if step < 1e-20:
                raise RuntimeError("reference solver step collapsed")
        res = reference_residual(Q, A, caps, W, family, gamma, F=F_new)
        if res < target:
            return ReferenceResult(F_new, val_new, res, it, True)
        if val_new < val:
            # objective dropped: restart momentum from the last iterate
            t_mom = 1.0
            X, Xval, XD = F, val, D
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        Y = F_new + ((t_mom - 1.0) / t_next) * (F_new - F)
        F, val, D = F_new, val_new, D_new
        t_mom = t_next
        Yval, YD = objective(Y)
        if YD is None:
            t_mom = 1.0
            X, Xval, XD = F, val, D
        else:
            X, Xval, XD = Y, Yval, YD
        step *= 1.25
    return ReferenceResult(F, val, res, max_iters, False)
