"""Weighted log and power utilities and the proxes of their conjugates.

For a pair utility ``u`` the dual update needs ``prox_{beta (-u)^*}``.  Both
families have a prox that is strictly negative:

* log, ``u(s) = w log s``: the negative root of ``z^2 - y z - beta w = 0``;
* power, ``u(s) = w s^g``: ``z = -t`` where ``t > 0`` solves
  ``t^(c1 + 2) + y t^(c1 + 1) = c1 c2`` with ``c1 = g / (1 - g)`` and
  ``c1 c2 = beta (w g)^(1 / (1 - g))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "UtilitySpec",
    "UtilityValue",
    "total_utility",
    "utility_derivative",
    "prox_conjugate",
    "prox_conjugate_matrix",
    "prox_log",
    "prox_power",
]

LOG = "log"
POWER = "power"


@dataclass(frozen=True, eq=False)
class UtilitySpec:
    """Utility family and weight matrix for all ordered node pairs.

    ``weights[i, j]`` weighs the traffic from ``j`` to ``i``; the diagonal is
    stored but never used.
    """

    family: str
    weights: np.ndarray
    power_exponent: float | None = None

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in (LOG, POWER):
            raise ValueError(f"unknown utility family {self.family!r}")
        W = np.array(self.weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"weights must be a square matrix, got shape {W.shape}")
        off = ~np.eye(W.shape[0], dtype=bool)
        if not np.all(np.isfinite(W[off])) or np.any(W[off] <= 0):
            raise ValueError("off-diagonal weights must be finite and positive")
        gamma = self.power_exponent
        if family == POWER:
            if gamma is None or not 0.0 < float(gamma) < 1.0:
                raise ValueError("power utility needs an exponent in (0, 1)")
            gamma = float(gamma)
        else:
            gamma = None
        W.setflags(write=False)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "power_exponent", gamma)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def with_weights(self, weights) -> "UtilitySpec":
        return UtilitySpec(self.family, weights, self.power_exponent)


@dataclass(frozen=True)
class UtilityValue:
    """Total utility, or a flag that some pair had nonpositive traffic."""

    value: float
    feasible: bool
    infeasible_fraction: float


def _offdiag(n):
    return ~np.eye(n, dtype=bool)


def total_utility(T, spec: UtilitySpec) -> UtilityValue:
    """Sum of the pair utilities over the off-diagonal entries of ``T``.

    Nonpositive off-diagonal traffic lies outside the utility domain; this is
    reported through ``feasible=False`` (with ``value=-inf``) instead of an
    exception, since early solver iterates are routinely in that state.
    """
    T = np.asarray(T, dtype=np.float64)
    if T.shape != spec.weights.shape:
        raise ValueError(f"traffic matrix has shape {T.shape}, expected {spec.weights.shape}")
    off = _offdiag(spec.n)
    t = T[off]
    bad = np.count_nonzero(~(t > 0))
    if bad:
        return UtilityValue(-np.inf, False, bad / t.size)
    w = spec.weights[off]
    if spec.family == LOG:
        val = np.sum(w * np.log(t))
    else:
        val = np.sum(w * t ** spec.power_exponent)
    return UtilityValue(float(val), True, 0.0)


def utility_derivative(T, spec: UtilitySpec) -> np.ndarray:
    """Entrywise ``u_ij'(T_ij)`` off the diagonal, zero on it."""
    T = np.asarray(T, dtype=np.float64)
    if T.shape != spec.weights.shape:
        raise ValueError(f"traffic matrix has shape {T.shape}, expected {spec.weights.shape}")
    off = _offdiag(spec.n)
    t = T[off]
    if not np.all(t > 0):
        raise ValueError("utility derivative needs positive off-diagonal traffic")
    w = spec.weights[off]
    D = np.zeros_like(T)
    if spec.family == LOG:
        D[off] = w / t
    else:
        g = spec.power_exponent
        D[off] = w * g * t ** (g - 1.0)
    return D


def prox_log(y, beta, w):
    """Prox of ``beta (-w log)^*``: ``(y - sqrt(y^2 + 4 beta w)) / 2``.

    Evaluated in the cancellation-free form ``-2 beta w / (y + sqrt(...))`` when
    ``y > 0``.
    """
    y = np.asarray(y, dtype=np.float64)
    bw = np.asarray(beta * w, dtype=np.float64)
    s = np.sqrt(y * y + 4.0 * bw)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(y > 0, -2.0 * bw / (y + s), 0.5 * (y - s))
    return z[()] if z.ndim == 0 else z


def _power_poly(t, y, c1, k):
    # t^(c1+1) (t + y) - k, factored to keep accuracy when t ~ -y
    return t ** (c1 + 1.0) * (t + y) - k


def prox_power(y, beta, w, gamma, max_iter=200):
    """Prox of ``beta (-w s^gamma)^*``, vectorized over all four arguments.

    The root ``t = -z`` of ``t^(c1+1) (t + y) = c1 c2`` is unique on
    ``t > max(0, -y)`` and lies below ``max(0, -y) + (c1 c2)^(1/(c1+2))``.
    Newton steps are taken inside that bracket, falling back to bisection
    whenever a step leaves it.  Iteration stops once
    ``|g| <= 1e-13 max(1, c1 c2)`` or the bracket has shrunk to adjacent
    floats.
    """
    y, beta, w, gamma = np.broadcast_arrays(
        *(np.asarray(a, dtype=np.float64) for a in (y, beta, w, gamma)))
    shape = y.shape
    y, beta, w, gamma = y.ravel(), beta.ravel(), w.ravel(), gamma.ravel()
    c1 = gamma / (1.0 - gamma)
    k = beta * (w * gamma) ** (1.0 / (1.0 - gamma))
    tol = 1e-13 * np.maximum(1.0, k)

    lo = np.maximum(0.0, -y)
    hi = lo + k ** (1.0 / (c1 + 2.0))
    # start from the upper end, where g >= 0 and Newton is monotone for a
    # convex-increasing g
    t = hi.copy()
    active = np.ones(y.size, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ti, yi, ki, ci = t[idx], y[idx], k[idx], c1[idx]
        g = _power_poly(ti, yi, ci, ki)
        done = (np.abs(g) <= tol[idx]) | (np.nextafter(lo[idx], np.inf) >= hi[idx])
        pos = g > 0
        hi[idx] = np.where(pos, ti, hi[idx])
        lo[idx] = np.where(pos, lo[idx], ti)
        dg = (ci + 2.0) * ti ** (ci + 1.0) + (ci + 1.0) * yi * ti ** ci
        with np.errstate(divide="ignore", invalid="ignore"):
            step = ti - g / dg
        inside = np.isfinite(step) & (step > lo[idx]) & (step < hi[idx])
        t_new = np.where(inside, step, 0.5 * (lo[idx] + hi[idx]))
        t[idx] = np.where(done, ti, t_new)
        active[idx[done]] = False
    z = -t.reshape(shape)
    return z[()] if z.ndim == 0 else z


def prox_conjugate(y, beta, w, family, power_exponent=None):
    """Scalar (or elementwise) prox of ``beta (-u)^*`` for one utility family."""
    if beta <= 0 if np.isscalar(beta) else np.any(np.asarray(beta) <= 0):
        raise ValueError("beta must be positive")
    family = str(family).lower()
    if family == LOG:
        return prox_log(y, beta, w)
    if family == POWER:
        if power_exponent is None or not 0.0 < power_exponent < 1.0:
            raise ValueError("power utility needs an exponent in (0, 1)")
        return prox_power(y, beta, w, power_exponent)
    raise ValueError(f"unknown utility family {family!r}")


def prox_conjugate_matrix(Yin, beta, spec: UtilitySpec) -> np.ndarray:
    """Dual prox applied entrywise; the diagonal is set to zero.

    The diagonal utilities vanish, so their conjugates are indicators of
    ``{0}`` and their prox is identically zero.
    """
    Yin = np.asarray(Yin, dtype=np.float64)
    if Yin.shape != spec.weights.shape:
        raise ValueError(f"dual matrix has shape {Yin.shape}, expected {spec.weights.shape}")
    off = _offdiag(spec.n)
    out = np.zeros_like(Yin)
    out[off] = prox_conjugate(Yin[off], beta, spec.weights[off], spec.family,
                              spec.power_exponent)
    return out
