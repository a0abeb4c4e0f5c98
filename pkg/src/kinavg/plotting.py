"""Figures written next to the CSV outputs of the command line tool."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from kinavg import spectral  # noqa: E402
from kinavg.analysis import h_neg_norm  # noqa: E402


def convergence_figure(summary: list, path) -> None:
    """Mean errors per cell against ``eps``, with standard-error bars."""
    eps = np.array([row["eps"] for row in summary])
    fig, ax = plt.subplots(figsize=(5, 4))
    for key, label in (("err_sup_Hneg", r"$\sup_t \|\rho-\bar\rho\|_{H^{-\varsigma}}$"),
                       ("err_L2_time", r"$\|\rho-\bar\rho\|_{L^2_T L^2_x}$")):
        mean = np.array([row[f"mean_{key}"] for row in summary])
        se = np.nan_to_num(np.array([row[f"se_{key}"] for row in summary]))
        ax.errorbar(eps, mean, yerr=se, marker="o", capsize=3, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel("mean error")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def trajectory_figure(times, rho, rho_bar, path, d: int = 1) -> None:
    """Final densities in real space and the ``H^{-1}`` gap over time."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.5))
    if d == 1:
        N = rho.shape[-1]
        x = np.arange(N) / N
        ax0.plot(x, spectral.backward(rho[-1], 1), label="kinetic")
        ax0.plot(x, spectral.backward(rho_bar[-1], 1), "--", label="limit")
        ax0.set_xlabel("x")
        ax0.legend(frameon=False)
    else:
        im = ax0.imshow(spectral.backward(rho[-1] - rho_bar[-1], d), origin="lower",
                        extent=(0, 1, 0, 1))
        fig.colorbar(im, ax=ax0)
    ax0.set_title(f"t = {times[-1]:g}")
    ax1.plot(times, h_neg_norm(np.asarray(rho) - np.asarray(rho_bar), 1.0, d))
    ax1.set_xlabel("t")
    ax1.set_ylabel(r"$\|\rho-\bar\rho\|_{H^{-1}}$")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def residual_figure(rows: list, path) -> None:
    """Generator residual against ``eps`` and ``delta`` on log axes."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, key, other in ((axes[0], "eps", "delta"), (axes[1], "delta", "eps")):
        sel = [r for r in rows if r.get("sweep") == key]
        if not sel:
            continue
        s = np.array([r[key] for r in sel])
        ax.loglog(s, [r["residual"] for r in sel], "o-", label="residual")
        ax.loglog(s, [r["bound_value"] for r in sel], ":", label="bound shape")
        ax.set_xlabel(key)
        ax.set_title(f"{other} = {sel[0][other]:g}")
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
