"""Euclidean projection onto feasible flows ``{F >= 0, F^T 1 <= c}``.

The constraint set separates over the columns of ``F``; column ``l`` is
projected onto the scaled simplex ``{f >= 0, 1^T f <= c_l}`` as
``(f - mu 1)_+`` where ``mu >= 0`` is the smallest shift meeting the cap.
When clipping is needed, ``mu`` is found by sorting the column in decreasing
order and taking the last pivot ``t`` with ``f'_t > (sum_{i<=t} f'_i - c) / t``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["project_simplex_column", "project_flows", "simplex_shift", "worker_count"]

WORKERS_ENV = "PDMCF_WORKERS"


def worker_count() -> int:
    """Thread count for column-parallel kernels, from ``PDMCF_WORKERS``."""
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def simplex_shift(Q, caps):
    """Per-column shift ``mu`` for projecting the columns of ``Q``.

    Columns whose positive part already fits under the cap get ``mu = 0``.
    """
    Q = np.asarray(Q, dtype=np.float64)
    caps = np.asarray(caps, dtype=np.float64)
    mu = np.zeros(Q.shape[1])
    over = np.maximum(Q, 0.0).sum(axis=0) > caps
    if not over.any():
        return mu
    S = -np.sort(-Q[:, over], axis=0)
    shifts = (np.cumsum(S, axis=0) - caps[over]) / np.arange(1, Q.shape[0] + 1)[:, None]
    admissible = S > shifts
    # admissible pivots form a prefix; take the last one
    t = Q.shape[0] - 1 - np.argmax(admissible[::-1], axis=0)
    mu[over] = shifts[t, np.arange(t.size)]
    return mu


def project_simplex_column(f, cap):
    """Project one vector onto ``{x >= 0, sum(x) <= cap}``.

    Returns
    -------
    x : ndarray
        The projection ``(f - mu)_+``.
    mu : float
        The optimal multiplier of the cap constraint (zero when inactive).
    """
    if not cap > 0:
        raise ValueError(f"cap must be positive, got {cap}")
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    mu = float(simplex_shift(f[:, None], np.array([cap]))[0])
    return np.maximum(f - mu, 0.0), mu


def _project_block(Q, caps):
    return np.maximum(Q - simplex_shift(Q, caps), 0.0)


def project_flows(Q, topo, workers=None) -> np.ndarray:
    """Projection of an ``n x m`` matrix onto the feasible flow set of ``topo``.

    With more than one worker the columns are split into contiguous blocks
    handled by a thread pool; every column is still computed by the same
    sequential code, so the result does not depend on the worker count.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape != (topo.n, topo.m):
        raise ValueError(f"matrix has shape {Q.shape}, expected {(topo.n, topo.m)}")
    caps = topo.capacities
    workers = worker_count() if workers is None else workers
    if workers <= 1 or topo.m < 2 * workers:
        return _project_block(Q, caps)
    bounds = np.linspace(0, topo.m, workers + 1).astype(int)
    out = np.empty_like(Q)

    def run(b):
        lo, hi = bounds[b], bounds[b + 1]
        out[:, lo:hi] = _project_block(Q[:, lo:hi], caps[lo:hi])

    with ThreadPoolExecutor(workers) as pool:
        list(pool.map(run, range(workers)))
    return out
