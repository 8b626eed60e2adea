"""Figure rendering for study outputs.

Each study writes its delimited table first; these helpers render the
companion PNG files from the same rows.  Uses the Agg backend so the CLI
works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def sweep_figure(rows, path) -> None:
    """Eigenvalues and their p-th roots along a continuation sweep."""
    rows = np.asarray([r[:6] for r in rows], dtype=float)
    p, lam_orig, root = rows[:, 0], rows[:, 3], rows[:, 4]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax1.loglog(p, lam_orig, "o-", ms=3)
    ax1.set_xlabel("$p$")
    ax1.set_ylabel(r"$\lambda_{p,h}$")
    ax1.grid(True, which="both", alpha=0.3)
    ax2.semilogx(p, root, "o-", ms=3)
    ax2.axhline(1.0, color="k", lw=0.8, ls="--")
    ax2.set_xlabel("$p$")
    ax2.set_ylabel(r"$\lambda_{p,h}^{1/p}$")
    ax2.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def frequency_figure(rows, path) -> None:
    """Monotonicity check: p times the p-th root of the eigenvalue."""
    rows = np.asarray([r[:6] for r in rows], dtype=float)
    p = rows[:, 0]
    freq = p * rows[:, 4]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.plot(p, freq, "o-", ms=3)
    ax.set_xlabel("$p$")
    ax.set_ylabel(r"$p\,\lambda_{p,h}^{1/p}$")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def convergence_figure(rows, p, path) -> None:
    """Log-log error decay under refinement with first/second order guides."""
    rows = np.asarray(rows, dtype=float)
    cells, l2, lam = rows[:, 0], rows[:, 1], rows[:, 3]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.loglog(cells, l2, "o-", ms=4, label="$L^2$ error")
    ax.loglog(cells, lam, "s-", ms=4, label=r"$\lambda$ rel. error")
    # ideal-order guides; h halves per level while cells grow by a fixed factor
    if len(cells) > 1:
        level = np.log(cells / cells[0]) / np.log(cells[1] / cells[0])
        ax.loglog(cells, l2[0] * 2.0 ** (-level), "k:", lw=0.8, label="order 1")
        ax.loglog(cells, lam[0] * 4.0 ** (-level), "k--", lw=0.8, label="order 2")
    ax.set_xlabel("cells")
    ax.set_ylabel("error")
    ax.set_title(f"$p = {p:g}$")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def profile_figure(x, u, uinf, path) -> None:
    """1D eigenfunction against the limiting distance profile."""
    order = np.argsort(x)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax1.plot(x[order], u[order], label="$u_{p,h}$")
    if uinf is not None:
        ax1.plot(x[order], uinf[order], "--", label=r"$u_\infty$")
        ax2.plot(x[order], (u - uinf)[order])
        ax2.set_ylabel(r"$u_{p,h} - u_\infty$")
    ax1.set_xlabel("$x$")
    ax1.legend()
    ax1.grid(True, alpha=0.3)
    ax2.set_xlabel("$x$")
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
