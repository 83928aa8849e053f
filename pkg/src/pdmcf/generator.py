"""Random geometric test instances and weight perturbations.

All randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence([seed, attempt])``, so an instance is a pure function of its
parameters and seed.
"""

from __future__ import annotations

import numpy as np

from .graph import Topology, check_strong_connectivity
from .instance import ProblemInstance
from .utilities import UtilitySpec

__all__ = ["generate_instance", "generate_topology", "perturb_weights", "knn_edges",
           "WEIGHT_RANGE", "CAPACITY_RANGE"]

WEIGHT_RANGE = (0.3, 3.0)
CAPACITY_RANGE = (0.5, 5.0)
MAX_ATTEMPTS = 100


def _rng(*key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def _log_uniform(rng, bounds, size):
    lo, hi = np.log(bounds[0]), np.log(bounds[1])
    return np.exp(rng.uniform(lo, hi, size))


def knn_edges(points: np.ndarray, q: int) -> np.ndarray:
    """Directed edge list of the symmetric q-nearest-neighbour graph.

    Nodes ``i`` and ``j`` are joined (in both directions) when either is among
    the ``q`` nearest neighbours of the other.  Distance ties go to the
    smaller index.  Edges are ordered by undirected pair ``(i, j)``, ``i < j``,
    with ``i -> j`` directly followed by ``j -> i``.
    """
    n = points.shape[0]
    diff = points[:, None, :] - points[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :q]
    adj = np.zeros((n, n), dtype=bool)
    adj[np.repeat(np.arange(n), q), nbrs.ravel()] = True
    adj |= adj.T
    i, j = np.nonzero(np.triu(adj, k=1))
    return np.stack([np.column_stack([i, j]), np.column_stack([j, i])], axis=1).reshape(-1, 2)


def generate_topology(n: int, q: int, seed: int) -> tuple[Topology, np.random.Generator]:
    """Geometric q-NN topology; point sets are redrawn until strongly connected.

    Returns the topology and the generator it was drawn from, positioned
    after the capacity draws.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not 1 <= q < n:
        raise ValueError(f"q must satisfy 1 <= q < n, got q={q}, n={n}")
    for attempt in range(MAX_ATTEMPTS):
        rng = _rng(seed, attempt)
        points = rng.uniform(0.0, 1.0, size=(n, 2))
        edges = knn_edges(points, q)
        caps = _log_uniform(rng, CAPACITY_RANGE, edges.shape[0])
        topo = Topology.from_edges(n, edges, caps)
        if check_strong_connectivity(topo):
            return topo, rng
    raise RuntimeError(f"no strongly connected topology after {MAX_ATTEMPTS} attempts")


def generate_instance(n: int, q: int, seed: int = 0, family: str = "log",
                      gamma: float | None = None) -> ProblemInstance:
    """Random instance: ``n`` uniform points in the unit square, q-NN edges.

    Capacities are log-uniform on [0.5, 5] and pair weights log-uniform on
    [0.3, 3].  The diagonal of the weight matrix is set to zero.
    """
    topo, rng = generate_topology(n, q, seed)
    W = _log_uniform(rng, WEIGHT_RANGE, (n, n))
    np.fill_diagonal(W, 0.0)
    return ProblemInstance(topo, UtilitySpec(family, W, gamma))


def perturb_weights(spec: UtilitySpec, nu: float, seed: int = 0) -> UtilitySpec:
    """Scale each off-diagonal weight by ``1 + nu`` or ``1 - nu``, each w.p. 1/2."""
    if not 0 <= nu < 1:
        raise ValueError(f"nu must lie in [0, 1), got {nu}")
    n = spec.n
    up = _rng(seed, 0x5eed).random((n, n)) < 0.5
    W = spec.weights * np.where(up, 1.0 + nu, 1.0 - nu)
    np.fill_diagonal(W, np.diag(spec.weights))
    return spec.with_weights(W)
