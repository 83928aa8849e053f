"""Figures rendered next to the CSV outputs of the command-line tools."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_convergence", "plot_runtime", "plot_warmstart", "loglog_slope"]

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_convergence(trace, nm, path, title=None):
    """Infeasible fraction (blue) before feasibility, then ``r / nm`` (red).

    Both series share the iteration axis on a log scale.
    """
    it = np.array([r.iter for r in trace], dtype=float)
    res = np.array([r.residual for r in trace], dtype=float)
    frac = np.array([r.infeasible_fraction for r in trace], dtype=float)
    finite = np.isfinite(res)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if (~finite).any():
            ax.semilogy(it[~finite], frac[~finite], "o", ms=3, color="tab:blue",
                        label="fraction of nonpositive $T_{ij}$")
        if finite.any():
            ax.semilogy(it[finite], res[finite] / nm, "o", ms=3, color="tab:red",
                        label="residual $r/nm$")
        ax.set_xlabel("iteration")
        ax.legend(loc="upper right")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def loglog_slope(x, y):
    """Slope and intercept of a least-squares line through ``(log x, log y)``."""
    lx, ly = np.log10(np.asarray(x, float)), np.log10(np.asarray(y, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def plot_runtime(rows, path):
    """Runtime against ``nm`` on log-log axes with an affine fit."""
    rows = [r for r in rows if r.get("status") == "converged"]
    if not rows:
        return None
    nm = np.array([r["nm"] for r in rows], float)
    sec = np.array([r["seconds"] for r in rows], float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(nm, sec, "o", ms=4, color="tab:red", label="PDMCF")
        if np.unique(nm).size > 1:
            slope, icpt = loglog_slope(nm, sec)
            xs = np.geomspace(nm.min(), nm.max(), 50)
            ax.loglog(xs, 10 ** icpt * xs ** slope, "-", color="tab:red", lw=1,
                      label=f"fit, slope {slope:.2f}")
        ax.set_xlabel("number of variables $nm$")
        ax.set_ylabel("runtime (s)")
        ax.legend(loc="upper left")
        return _save(fig, path)


def plot_warmstart(rows, path):
    """Cold and warm iteration counts against the perturbation ratio."""
    nu = np.array([r["nu"] for r in rows], float)
    order = np.argsort(nu, kind="stable")
    cold = np.array([r["cold_iterations"] for r in rows], float)[order]
    warm = np.array([r["warm_iterations"] for r in rows], float)[order]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(nu[order], cold, "s-", color="tab:blue", label="cold start")
        ax.plot(nu[order], warm, "o-", color="tab:red", label="warm start")
        ax.set_xlabel(r"perturbation ratio $\nu$")
        ax.set_ylabel("iterations")
        ax.set_ylim(bottom=0)
        ax.legend(loc="upper left")
        return _save(fig, path)
