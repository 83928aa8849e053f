"""Directed network topology and incidence-matrix products.

The incidence matrix ``A`` (n x m) has ``A[i, l] = +1`` when edge ``l``
enters node ``i`` and ``-1`` when it leaves node ``i``.  It is never
materialized here: products with ``A`` and ``A.T`` are carried out as
gathers and segmented scatters over the edge list.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Topology",
    "flows_to_traffic",
    "dual_times_incidence",
    "max_degree",
    "step_size_eta",
    "shortest_path_flow",
    "check_strong_connectivity",
]


@dataclass(frozen=True, eq=False)
class Topology:
    """Directed graph given as an edge list with per-edge capacities.

    Parameters
    ----------
    n : int
        Number of nodes.
    tails, heads : array_like of int
        Edge ``l`` runs from ``tails[l]`` to ``heads[l]``.
    capacities : array_like of float
        Strictly positive capacity of each edge.
    """

    n: int
    tails: np.ndarray
    heads: np.ndarray
    capacities: np.ndarray
    _out_perm: np.ndarray = field(init=False, repr=False)
    _out_starts: np.ndarray = field(init=False, repr=False)
    _in_perm: np.ndarray = field(init=False, repr=False)
    _in_starts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        tails = np.ascontiguousarray(self.tails, dtype=np.int64).reshape(-1)
        heads = np.ascontiguousarray(self.heads, dtype=np.int64).reshape(-1)
        caps = np.ascontiguousarray(self.capacities, dtype=np.float64).reshape(-1)
        n = int(self.n)
        if n < 2:
            raise ValueError(f"need at least 2 nodes, got n={n}")
        if not (tails.shape == heads.shape == caps.shape):
            raise ValueError("tails, heads and capacities must have equal length")
        if tails.size == 0:
            raise ValueError("topology has no edges")
        if tails.min() < 0 or heads.min() < 0 or tails.max() >= n or heads.max() >= n:
            raise ValueError("edge endpoint out of range [0, n)")
        if np.any(tails == heads):
            raise ValueError("self-loop edges are not allowed")
        if not np.all(np.isfinite(caps)) or np.any(caps <= 0):
            raise ValueError("capacities must be finite and strictly positive")
        keys = tails * n + heads
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate parallel edges are not allowed")
        for a in (tails, heads, caps):
            a.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "tails", tails)
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "capacities", caps)

        # segment layout for scatter-by-reduceat; a node without out (or in)
        # edges gets an empty segment, handled in _segment_sum
        for name, ends in (("out", tails), ("in", heads)):
            perm = np.argsort(ends, kind="stable")
            starts = np.searchsorted(ends[perm], np.arange(n))
            object.__setattr__(self, f"_{name}_perm", perm)
            object.__setattr__(self, f"_{name}_starts", starts)

    @property
    def m(self) -> int:
        return int(self.tails.size)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.tails.tolist(), self.heads.tolist()))

    @classmethod
    def from_edges(cls, n, edges, capacities) -> "Topology":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        return cls(n, edges[:, 0], edges[:, 1], capacities)

    def degrees(self) -> np.ndarray:
        """Total (in + out) degree of every node, i.e. ``diag(A A^T)``."""
        return (np.bincount(self.tails, minlength=self.n)
                + np.bincount(self.heads, minlength=self.n))

    def validate(self) -> None:
        if not check_strong_connectivity(self):
            raise ValueError("topology is not strongly connected")


def _segment_sum(F, perm, starts, n):
    # sum of F[:, l] over the edges l of each node's segment
    m = perm.size
    Fp = F[:, perm]
    counts = np.diff(np.append(starts, m))
    out = np.zeros((F.shape[0], n), dtype=F.dtype)
    nonempty = counts > 0
    if nonempty.any():
        out[:, nonempty] = np.add.reduceat(Fp, starts[nonempty], axis=1)
    return out


def _check_flow_shape(F, topo):
    F = np.asarray(F, dtype=np.float64)
    if F.shape != (topo.n, topo.m):
        raise ValueError(f"flow matrix has shape {F.shape}, expected {(topo.n, topo.m)}")
    return F


def flows_to_traffic(F, topo: Topology) -> np.ndarray:
    """Traffic matrix ``T = -F A^T`` of a flow matrix.

    ``T[i, j]`` is the flow destined to ``i`` leaving node ``j`` minus the flow
    destined to ``i`` entering ``j``; off the diagonal this is the traffic from
    ``j`` to ``i``, and every row of ``T`` sums to zero.
    """
    F = _check_flow_shape(F, topo)
    out = _segment_sum(F, topo._out_perm, topo._out_starts, topo.n)
    inn = _segment_sum(F, topo._in_perm, topo._in_starts, topo.n)
    return out - inn


def dual_times_incidence(Y, topo: Topology) -> np.ndarray:
    """Product ``Y A`` with ``(Y A)[i, l] = Y[i, head(l)] - Y[i, tail(l)]``."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (topo.n, topo.n):
        raise ValueError(f"dual matrix has shape {Y.shape}, expected {(topo.n, topo.n)}")
    return Y[:, topo.heads] - Y[:, topo.tails]


def max_degree(topo: Topology) -> int:
    return int(topo.degrees().max())


def step_size_eta(topo: Topology) -> float:
    """Step scale ``1 / sqrt(2 d_max)``, a lower bound on ``1 / ||A||_2``.

    ``A A^T`` is the graph Laplacian, whose largest eigenvalue is at most
    twice the largest node degree.
    """
    return float(1.0 / np.sqrt(2.0 * max_degree(topo)))


def _bfs_order(n, adj, source):
    seen = np.zeros(n, dtype=bool)
    seen[source] = True
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


def check_strong_connectivity(topo: Topology) -> bool:
    """True iff every ordered node pair is joined by a directed path."""
    fwd = [[] for _ in range(topo.n)]
    bwd = [[] for _ in range(topo.n)]
    for t, h in zip(topo.tails.tolist(), topo.heads.tolist()):
        fwd[t].append(h)
        bwd[h].append(t)
    return bool(_bfs_order(topo.n, fwd, 0).all() and _bfs_order(topo.n, bwd, 0).all())


def shortest_path_flow(topo: Topology) -> np.ndarray:
    """Feasible flow sending equal traffic between every ordered node pair.

    A unit of traffic is routed from each source to each destination along a
    hop-count shortest path, and the whole flow is then scaled down uniformly
    until the most loaded edge sits exactly at capacity.  Every off-diagonal
    entry of the resulting traffic matrix equals the scale factor.

    Hop distances come from a BFS run backwards from each destination.  Among
    the out-edges of a node that lead one hop closer, the one whose head has
    the lowest node id wins, then the lowest edge id.
    """
    if not check_strong_connectivity(topo):
        raise ValueError("topology is not strongly connected")
    n, m = topo.n, topo.m
    tails, heads = topo.tails.tolist(), topo.heads.tolist()
    into = [[] for _ in range(n)]
    for l, h in enumerate(heads):
        into[h].append(l)
    # out-edges sorted by (head, edge id) so the first admissible one wins
    outof = [[] for _ in range(n)]
    for l in sorted(range(m), key=lambda l: (heads[l], l)):
        outof[tails[l]].append(l)

    F = np.zeros((n, m))
    for dest in range(n):
        dist = np.full(n, -1, dtype=np.int64)
        dist[dest] = 0
        order = [dest]
        queue = deque([dest])
        while queue:
            v = queue.popleft()
            for l in into[v]:
                u = tails[l]
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    order.append(u)
                    queue.append(u)
        # push from the farthest nodes inwards: each node forwards its own
        # unit plus everything routed through it
        carried = np.ones(n)
        carried[dest] = 0.0
        for u in reversed(order[1:]):
            l = next(l for l in outof[u] if dist[heads[l]] == dist[u] - 1)
            F[dest, l] += carried[u]
            carried[heads[l]] += carried[u]
    load = F.sum(axis=0) / topo.capacities
    alpha = 1.0 / load.max()
    return alpha * F
