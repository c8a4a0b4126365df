"""Static figures written next to the CSV outputs (Agg backend, PNG)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.dpi": 150,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_surface(rho, r, alpha, path):
    """Heat map of ``alpha`` on the (rho, r) grid; NaN cells stay blank."""
    alpha = np.asarray(alpha, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.4))
        if alpha.shape[0] > 1 and alpha.shape[1] > 1:
            m = ax.pcolormesh(r, rho, np.ma.masked_invalid(alpha), shading="nearest", cmap="viridis")
            fig.colorbar(m, ax=ax, label=r"$\alpha_c$")
        else:
            # degenerate grid: a line is more readable than a 1-pixel mesh
            x = r if alpha.shape[0] == 1 else rho
            ax.plot(x, alpha.ravel(), "o-")
            ax.set_ylabel(r"$\alpha_c$")
        ax.set_xlabel("r")
        if alpha.shape[0] > 1:
            ax.set_ylabel(r"$\rho$")
        return _save(fig, path)


def plot_deviation(rho, r, alpha, path):
    """``alpha(rho, r) - alpha(rho, r0)`` against rho, one curve per r.

    ``r0`` is the first column of the grid (zero for the usual sweeps).
    """
    alpha = np.asarray(alpha, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        base = alpha[:, 0]
        for j in range(1, alpha.shape[1]):
            ax.plot(rho, alpha[:, j] - base, label=f"r={r[j]:g}")
        ax.axhline(0.0, color="0.6", lw=0.8)
        ax.set_xlabel(r"$\rho$")
        ax.set_ylabel(rf"$\alpha_c(\rho,r)-\alpha_c(\rho,{r[0]:g})$")
        if alpha.shape[1] > 1:
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_extrapolation(summaries, fit, path, analytic=None):
    """Mean ``Pc/N`` against ``1/N`` with error bars and the quadratic fit."""
    N = np.array([s.N for s in summaries], dtype=float)
    y = np.array([s.mean_alpha for s in summaries])
    e = np.array([s.std_error for s in summaries])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        ax.errorbar(1 / N, y, yerr=e, fmt="o", capsize=2, label="simulation")
        if fit is not None:
            u = np.linspace(0, 1.05 / N.min(), 200)
            ax.plot(u, fit.c0 + fit.c1 * u + fit.c2 * u * u, "-", label=f"fit, N->inf: {fit.c0:.4f}")
        if analytic is not None and np.isfinite(analytic):
            ax.axhline(analytic, color="k", ls="--", lw=0.8, label=f"analytic {analytic:.5f}")
        ax.set_xlabel("1/N")
        ax.set_ylabel(r"$\langle P_c/N \rangle$")
        ax.set_xlim(left=0)
        ax.legend(frameon=False)
        return _save(fig, path)
