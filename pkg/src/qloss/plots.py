"""SVG figure emission. Every figure has a sibling CSV/JSON with the numbers;
plots are presentation only and never the artifact of record."""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .resfit import NotchModelParams, notch_s21
from .tls import ResonatorSweepRecord, tls_qi_model

THICKNESS_COLORS = {150.0: "tab:blue", 300.0: "tab:purple", 500.0: "tab:pink"}


def _color(thickness: float, i: int = 0) -> str:
    return THICKNESS_COLORS.get(float(thickness), f"C{i % 10}")


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def plot_resonator_fit(trace, result, path) -> None:
    """Complex-plane and magnitude/phase panels with the fitted model overlaid."""
    params = NotchModelParams(fr=result.fr, ql=result.ql, qc_mag=result.qc_mag,
                              phi=result.phi, a=result.a, alpha=result.alpha,
                              tau=result.tau)
    f = trace.frequencies
    model = notch_s21(params, f)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    axes[0].plot(trace.s21.real, trace.s21.imag, ".", ms=3, label="data")
    axes[0].plot(model.real, model.imag, "-", lw=1, label="fit")
    axes[0].set_xlabel("Re S21")
    axes[0].set_ylabel("Im S21")
    axes[0].set_aspect("equal", adjustable="datalim")
    axes[0].legend(fontsize=8)
    axes[1].plot(f / 1e9, np.abs(trace.s21), ".", ms=3)
    axes[1].plot(f / 1e9, np.abs(model), "-", lw=1)
    axes[1].set_xlabel("f (GHz)")
    axes[1].set_ylabel("|S21|")
    axes[2].plot(f / 1e9, np.unwrap(np.angle(trace.s21)), ".", ms=3)
    axes[2].plot(f / 1e9, np.unwrap(np.angle(model)), "-", lw=1)
    axes[2].set_xlabel("f (GHz)")
    axes[2].set_ylabel("arg S21 (rad)")
    axes[1].set_title(f"fr={result.fr/1e9:.6f} GHz  Qi={result.qi:.3g}  "
                      f"Ql={result.ql:.3g}  |Qc|={result.qc_mag:.3g}", fontsize=9)
    _save(fig, path)


def plot_qi_vs_photons(records: Sequence[ResonatorSweepRecord], path) -> None:
    """Log-log internal quality factor vs photon number with fitted curves."""
    fig, ax = plt.subplots(figsize=(5.2, 4))
    for i, rec in enumerate(records):
        n = np.array([p.n_photons for p in rec.points])
        qi = np.array([p.fit.qi for p in rec.points])
        color = _color(rec.film_thickness, i)
        label = rec.label or f"{rec.film_thickness:g} nm"
        ax.loglog(n, qi, "o", ms=4, color=color, label=label)
        if rec.tls_fit is not None:
            n_fine = np.geomspace(n.min(), n.max(), 200)
            ax.loglog(n_fine, tls_qi_model(rec.tls_fit, n_fine, rec.fr),
                      "-", lw=1, color=color)
    ax.set_xlabel(r"mean photon number $\langle n\rangle$")
    ax.set_ylabel(r"$Q_i$")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_fdtls_vs_frequency(series: List[dict], summaries, path) -> None:
    """Zero-power TLS loss vs frequency; dashed lines mark thickness-group means."""
    fig, ax = plt.subplots(figsize=(5.2, 4))
    for i, row in enumerate(series):
        ax.semilogy(row["fr"] / 1e9, row["f_delta_tls"], "o", ms=5,
                    color=_color(row["film_thickness"], i))
    for s in summaries:
        ax.axhline(s.f_delta_tls_mean, ls="--", lw=1,
                   color=_color(s.film_thickness),
                   label=f"{s.film_thickness:g} nm mean")
    ax.set_xlabel("frequency (GHz)")
    ax.set_ylabel(r"$F\,\delta^0_{TLS}$")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_delta0_spectrum(spectrum: Dict[float, list], path) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 4))
    for thickness, pairs in sorted(spectrum.items()):
        if not pairs:
            continue
        f, d0 = zip(*pairs)
        ax.semilogy(np.array(f) / 1e9, d0, "o-", ms=4, lw=0.8,
                    color=_color(thickness), label=f"{thickness:g} nm")
    ax.set_xlabel("frequency (GHz)")
    ax.set_ylabel(r"residual loss $\delta_0$")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_qubit_scatter(scatter: List[dict], path) -> None:
    """Quality factor vs T1/Tp, colored by film thickness."""
    fig, ax = plt.subplots(figsize=(5.2, 4))
    seen = set()
    for row in scatter:
        t = row["film_thickness"]
        label = f"{t:g} nm" if t not in seen else None
        seen.add(t)
        ax.semilogx(row["t1_over_tp"], row["q"] / 1e6, "o", ms=5,
                    color=_color(t), label=label)
    ax.set_xlabel(r"$T_1 / T_p$")
    ax.set_ylabel(r"$Q$ ($\times 10^6$)")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_t1_histogram(counts: np.ndarray, edges: np.ndarray, path) -> None:
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    ax.bar(edges[:-1] * 1e6, counts, width=np.diff(edges) * 1e6,
           align="edge", edgecolor="k", linewidth=0.4)
    ax.set_xlabel(r"$T_1$ ($\mu$s)")
    ax.set_ylabel("counts")
    _save(fig, path)


def plot_t1_series(timestamps: Sequence[float], t1s: Sequence[float], path) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 3.2))
    t0 = timestamps[0] if len(timestamps) else 0.0
    hours = (np.asarray(timestamps) - t0) / 3600.0
    ax.plot(hours, np.asarray(t1s) * 1e6, "o", ms=3)
    ax.set_xlabel("time (h)")
    ax.set_ylabel(r"$T_1$ ($\mu$s)")
    _save(fig, path)


_REGION_STYLE = {
    "sm": ("tab:blue", "SM"),
    "ma": ("tab:green", "MA"),
    "sa": ("tab:red", "SA"),
    "corner": ("tab:gray", "corner"),
}


def plot_sm_sweep(sweep, path) -> None:
    """Interface participations vs SM thickness with the fitted extrapolations."""
    fig, ax = plt.subplots(figsize=(5.4, 4))
    t_nm = sweep.t_values * 1e9
    for region, (color, label) in _REGION_STYLE.items():
        ax.loglog(t_nm, sweep.p_series(region), "o", ms=5, color=color, label=label)
    t_fine = np.linspace(0.05e-9, sweep.t_values.max(), 200)
    ax.loglog(t_fine * 1e9, np.maximum(sweep.sm_fit(t_fine), 1e-12), "-", lw=1,
              color=_REGION_STYLE["sm"][0])
    lin, quad = sweep.corner_coeffs
    ax.loglog(t_fine * 1e9, np.maximum(lin * t_fine + quad * t_fine**2, 1e-12),
              "-", lw=1, color=_REGION_STYLE["corner"][0])
    ax2 = ax.twinx()
    q = [r.q_tls for r in sweep.results]
    ax2.loglog(t_nm, q, "s-", ms=4, lw=0.8, color="tab:orange")
    ax2.set_ylabel(r"$Q_{TLS}$", color="tab:orange")
    ax.set_xlabel("SM dielectric thickness (nm)")
    ax.set_ylabel("participation ratio")
    ax.legend(fontsize=8, loc="upper left")
    _save(fig, path)


def plot_metal_sweep(sweep, path) -> None:
    fig, ax = plt.subplots(figsize=(5.4, 4))
    t_nm = sweep.t_values * 1e9
    for region, (color, label) in _REGION_STYLE.items():
        ax.semilogy(t_nm, sweep.p_series(region), "o-", ms=5, lw=0.8,
                    color=color, label=label)
    ax2 = ax.twinx()
    ax2.semilogy(t_nm, sweep.q_series(), "s-", ms=4, lw=0.8, color="tab:orange")
    ax2.set_ylabel(r"$Q_{TLS}$", color="tab:orange")
    ax.set_xlabel("metal film thickness (nm)")
    ax.set_ylabel("participation ratio")
    ax.legend(fontsize=8, loc="center right")
    _save(fig, path)
