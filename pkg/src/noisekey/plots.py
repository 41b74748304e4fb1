"""Figure rendering for the report commands.

Every renderer writes a PNG next to the delimited output; all plotting
goes through the Agg backend so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .rngsim import FitResult, FlatnessReport, RunLengthHistogram  # noqa: E402


def plot_run_lengths(hists: dict[str, RunLengthHistogram],
                     fits: dict[str, FitResult], path) -> None:
    """Run-length counts with fitted decay curves, log-scale counts."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    markers = {"ones": "o", "zeros": "s"}
    for label, hist in hists.items():
        k, n = hist.counts()
        ax.semilogy(k, np.maximum(n, 0.5), markers.get(label, "o"),
                    ms=4, ls="none", label=f"runs of {label}")
        fit = fits.get(label)
        if fit is not None:
            kk = np.linspace(k.min(), k.max(), 200)
            ax.semilogy(kk, fit.c * 2.0 ** (-(1 - fit.epsilon) * kk), "-",
                        lw=1,
                        label=f"{label}: c={fit.c:.0f}, "
                              f"eps={fit.epsilon:.4f}")
    ax.set_xlabel("run length k")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_spectrum(report: FlatnessReport, path, max_points: int = 4096) -> None:
    """Relative Fourier amplitudes; decimated to keep the figure light."""
    rel = report.rel_amplitude
    stride = max(1, len(rel) // max_points)
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    ax.plot(np.arange(0, len(rel), stride), rel[::stride], ",", alpha=0.6)
    ax.axhline(report.mean_amplitude, color="k", lw=0.8, label="mean")
    ax.axhline(6 * report.mean_amplitude, color="r", lw=0.8, ls="--",
               label="6x mean gate")
    ax.set_xlabel("frequency bin")
    ax.set_ylabel("relative amplitude")
    ax.set_title(f"flatness: max/mean = {report.max_over_mean:.2f}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_attacker_sweep(rows, path) -> None:
    """Attacker error vs basis count, one curve per photon number."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    photons = sorted({r.mean_photons for r in rows})
    for nbar in photons:
        pts = sorted((r for r in rows if r.mean_photons == nbar),
                     key=lambda r: r.M)
        ms = [r.M for r in pts]
        ax.plot(ms, [r.p_e_analytic for r in pts], "-", lw=1,
                label=f"analytic, <n>={nbar:g}")
        ax.errorbar(ms, [r.p_e_empirical for r in pts],
                    yerr=[[r.p_e_empirical - r.ci_low for r in pts],
                          [r.ci_high - r.p_e_empirical for r in pts]],
                    fmt="o", ms=3, capsize=2)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("bases M")
    ax.set_ylabel("attacker bit-error probability")
    ax.set_ylim(-0.02, 0.55)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_pa_surface(rows, path) -> None:
    """log10 of residual information over the (r, t) plane."""
    ts = sorted({r["t"] for r in rows})
    rs = sorted({r["r"] for r in rows})
    grid = np.full((len(ts), len(rs)), np.nan)
    for row in rows:
        grid[ts.index(row["t"]), rs.index(row["r"])] = row["log10_i_lambda"]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    im = ax.imshow(grid, origin="lower", aspect="auto",
                   extent=(min(rs), max(rs), min(ts), max(ts)))
    fig.colorbar(im, ax=ax, label="log10 I")
    ax.set_xlabel("distilled bits r")
    ax.set_ylabel("leaked bits t")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
