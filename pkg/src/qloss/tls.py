"""Photon-number calibration and power-dependent TLS loss fitting.

The internal loss of a TLS-limited resonator saturates with circulating
photon number <n> as

    1/Qi = F*delta0_tls * tanh(hbar*w_r / (2*kB*T)) / (1 + <n>/n_c)^beta + delta_0

and <n> is calibrated from the drive power via

    <n> = 2 * (Z0/Zr) * (Ql^2/Qc) * P_in / (hbar * w_r^2),   w_r = 2*pi*fr.

Fits are performed on the loss 1/Qi (linear in the model's two loss terms),
weighted by propagated resonator-fit uncertainties when available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.constants import hbar, k as k_B

from .resfit import FitError
from .types import PowerSweepPoint, ResonatorFitResult, TlsFitResult, ValidationError

#: Fit bounds: generous brackets around physically reported ranges.
BOUNDS_LO = np.array([0.0, 1e-3, 0.05, 0.0])
BOUNDS_HI = np.array([1e-3, 1e9, 1.0, 1e-3])

MIN_POINTS = 5
MIN_DECADES = 3.0


@dataclass(frozen=True)
class CalibrationContext:
    """Line and resonator impedances plus the input attenuation chain."""

    z0: float = 50.0
    zr: float = 50.0
    total_attenuation: float = 0.0
    temperature: float = 0.01

    def __post_init__(self):
        if not (self.z0 > 0 and self.zr > 0):
            raise ValidationError("impedances must be positive")
        if self.total_attenuation < 0:
            raise ValidationError("total_attenuation must be >= 0 dB")
        if not self.temperature > 0:
            raise ValidationError("temperature must be > 0 K")


@dataclass
class ResonatorSweepRecord:
    """A power sweep of one resonator, ordered by increasing photon number."""

    film_thickness: float
    points: List[PowerSweepPoint]
    tls_fit: Optional[TlsFitResult] = None
    label: str = ""

    def __post_init__(self):
        n = [p.n_photons for p in self.points]
        if any(b <= a for a, b in zip(n, n[1:])):
            raise ValidationError("sweep points must be strictly increasing in n_photons")

    @property
    def fr(self) -> float:
        """Representative resonance frequency of the sweep (median over points)."""
        return float(np.median([p.fit.fr for p in self.points]))


def dbm_to_device_watts(applied_power: float, total_attenuation: float) -> float:
    """Power delivered to the device input port, from instrument dBm and chain dB."""
    return 10.0 ** ((applied_power - total_attenuation - 30.0) / 10.0)


def photon_number(p_in: float, fr: float, ql: float, qc_mag: float,
                  ctx: CalibrationContext) -> float:
    """Mean circulating photon number for drive power p_in (W)."""
    if p_in < 0 or fr <= 0 or ql <= 0 or qc_mag <= 0:
        raise ValidationError("photon_number requires non-negative power and positive fr/Ql/Qc")
    w_r = 2.0 * math.pi * fr
    return 2.0 * (ctx.z0 / ctx.zr) * (ql * ql / qc_mag) * p_in / (hbar * w_r * w_r)


def thermal_factor(fr: float, temperature: float) -> float:
    """tanh(hbar*w_r / (2*kB*T)); ~1 well below the photon temperature."""
    return math.tanh(hbar * 2.0 * math.pi * fr / (2.0 * k_B * temperature))


def tls_loss_model(n, f_delta_tls, n_c, beta, delta0, tanh_fac):
    """Total loss 1/Qi at photon number n."""
    n = np.asarray(n, dtype=float)
    return f_delta_tls * tanh_fac / (1.0 + n / n_c) ** beta + delta0


def tls_qi_model(params: TlsFitResult, n, fr: float):
    """Qi predicted by a TLS fit at photon number n (scalar or array)."""
    tanh_fac = thermal_factor(fr, params.temperature)
    loss = tls_loss_model(n, params.f_delta_tls, params.n_c, params.beta,
                          params.delta0, tanh_fac)
    return 1.0 / loss


def _initial_guess(n: np.ndarray, loss: np.ndarray, tanh_fac: float) -> np.ndarray:
    delta0 = float(loss.min())
    f_delta = max((float(loss.max()) - delta0) / tanh_fac, 1e-12)
    n_c = math.sqrt(float(n.min()) * float(n.max()))
    return np.array([f_delta, n_c, 0.3, delta0])


def _fit_once(n, loss, weights, x0, tanh_fac):
    def residuals(p):
        return (tls_loss_model(n, *p, tanh_fac) - loss) * weights

    x0 = np.clip(x0, BOUNDS_LO + 1e-300, BOUNDS_HI)
    return optimize.least_squares(
        residuals, x0=x0, bounds=(BOUNDS_LO, BOUNDS_HI),
        x_scale=np.maximum(np.abs(x0), [1e-9, 1.0, 0.1, 1e-9]),
        xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=4000,
    )


def fit_tls(sweep: ResonatorSweepRecord, fr: float, temperature: float) -> TlsFitResult:
    """Fit the saturable-loss model to a resonator power sweep.

    Operates on the loss 1/Qi with weights 1/sigma(1/Qi) when the sweep's
    resonator fits carry Qi uncertainties, else uniform. Falls back to a
    deterministic multi-start over (n_c, beta) when the single-start residual
    exceeds three times the noise-floor estimate.
    """
    pts = sweep.points
    if len(pts) < MIN_POINTS:
        raise FitError("tls", f"too few points: {len(pts)} < {MIN_POINTS}")
    n = np.array([p.n_photons for p in pts])
    decades = math.log10(n.max() / n.min())
    if decades < MIN_DECADES:
        raise FitError("tls", f"sweep spans {decades:.2f} decades of <n>, need >= {MIN_DECADES}")
    qi = np.array([p.fit.qi for p in pts])
    loss = 1.0 / qi
    sig_qi = np.array([p.fit.uncertainties.get("qi", 0.0) for p in pts])
    if np.all(sig_qi > 0):
        weights = qi * qi / sig_qi  # 1/sigma(1/Qi)
        weights = weights / weights.max()
    else:
        weights = np.ones_like(loss)
    tanh_fac = thermal_factor(fr, temperature)

    res = _fit_once(n, loss, weights, _initial_guess(n, loss, tanh_fac), tanh_fac)
    # noise floor from second differences of the loss series (model curvature
    # is negligible between adjacent log-spaced points)
    noise = float(np.std(np.diff(loss, 2))) / math.sqrt(6.0) if len(loss) > 4 else 0.0
    rms = math.sqrt(2.0 * res.cost / len(loss))
    if noise > 0 and rms > 3.0 * noise:
        starts = []
        for nc0 in np.geomspace(n.min() * 3.0, n.max() / 3.0, 4):
            for b0 in (0.15, 0.4):
                x0 = _initial_guess(n, loss, tanh_fac)
                x0[1], x0[2] = nc0, b0
                starts.append(x0)
        for x0 in starts:
            trial = _fit_once(n, loss, weights, x0, tanh_fac)
            if trial.cost < res.cost:
                res = trial
    if res.status == 0:
        raise FitError("tls", "TLS fit did not converge")

    f_delta, n_c, beta, delta0 = res.x
    dof = max(len(loss) - 4, 1)
    unc: Dict[str, float] = {}
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * (2.0 * res.cost / dof)
        for i, key in enumerate(("f_delta_tls", "n_c", "beta", "delta0")):
            unc[key] = float(math.sqrt(max(cov[i, i], 0.0)))
    except np.linalg.LinAlgError:
        pass
    return TlsFitResult(
        f_delta_tls=float(f_delta),
        n_c=float(n_c),
        beta=float(beta),
        delta0=float(delta0),
        temperature=temperature,
        uncertainties=unc,
    )


@dataclass(frozen=True)
class ThicknessSummary:
    """Group statistics of the TLS fit parameters for one film thickness."""

    film_thickness: float
    n: int
    f_delta_tls_mean: float
    f_delta_tls_std: float
    delta0_mean: float
    delta0_std: float

    def as_dict(self) -> dict:
        return {
            "film_thickness": self.film_thickness,
            "n": self.n,
            "f_delta_tls_mean": self.f_delta_tls_mean,
            "f_delta_tls_std": self.f_delta_tls_std,
            "delta0_mean": self.delta0_mean,
            "delta0_std": self.delta0_std,
        }


def _sample_std(values: Sequence[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def aggregate_by_thickness(records: Sequence[ResonatorSweepRecord]) -> Tuple[
        List[ThicknessSummary], List[dict]]:
    """Group-mean the fitted TLS parameters by film thickness.

    Returns (summaries, series): per-thickness arithmetic means and sample
    standard deviations of F*delta0_tls and delta_0, plus the per-record
    (frequency, F*delta0_tls, delta_0) series used for plotting.
    """
    if not records:
        raise ValidationError("no sweep records to aggregate")
    groups: Dict[float, List[ResonatorSweepRecord]] = {}
    for rec in records:
        if rec.tls_fit is None:
            raise ValidationError(f"record {rec.label or '?'} has no completed TLS fit")
        groups.setdefault(rec.film_thickness, []).append(rec)
    summaries = []
    for thickness in sorted(groups):
        fdel = [r.tls_fit.f_delta_tls for r in groups[thickness]]
        d0 = [r.tls_fit.delta0 for r in groups[thickness]]
        summaries.append(ThicknessSummary(
            film_thickness=thickness,
            n=len(fdel),
            f_delta_tls_mean=float(np.mean(fdel)),
            f_delta_tls_std=_sample_std(fdel),
            delta0_mean=float(np.mean(d0)),
            delta0_std=_sample_std(d0),
        ))
    series = [
        {
            "label": r.label,
            "film_thickness": r.film_thickness,
            "fr": r.fr,
            "f_delta_tls": r.tls_fit.f_delta_tls,
            "delta0": r.tls_fit.delta0,
        }
        for r in records
    ]
    return summaries, series


def delta0_spectrum(records: Sequence[ResonatorSweepRecord]) -> Dict[float, List[Tuple[float, float]]]:
    """Frequency-sorted (fr, delta_0) series per film thickness."""
    out: Dict[float, List[Tuple[float, float]]] = {}
    for rec in records:
        if rec.tls_fit is None:
            continue
        out.setdefault(rec.film_thickness, []).append((rec.fr, rec.tls_fit.delta0))
    for thickness in out:
        out[thickness].sort()
    return out


def synthesize_sweep(
    truth: TlsFitResult,
    fr: float,
    n_values: Sequence[float],
    noise_rel: float = 0.0,
    seed: int = 0,
    film_thickness: float = 150.0,
    qc_mag: float = 2e5,
    label: str = "",
    ctx: CalibrationContext = CalibrationContext(),
) -> ResonatorSweepRecord:
    """Generate a synthetic power-sweep record from known TLS parameters.

    Each point's Qi follows the saturable-loss model with multiplicative
    Gaussian noise of relative size noise_rel; Ql is derived from Qi and the
    fixed coupling, and the drive power is back-computed from <n> so the
    record is self-consistent under re-calibration.
    """
    rng = np.random.default_rng(seed)
    points = []
    w_r = 2.0 * math.pi * fr
    for n in n_values:
        qi = float(tls_qi_model(truth, n, fr))
        if noise_rel > 0:
            qi *= 1.0 + noise_rel * rng.standard_normal()
        ql = 1.0 / (1.0 / qi + 1.0 / qc_mag)
        fit = ResonatorFitResult.from_quality_factors(
            fr, ql, qc_mag, qi,
            uncertainties={"qi": noise_rel * qi} if noise_rel > 0 else {},
        )
        p_in = n * hbar * w_r * w_r * ctx.zr / (2.0 * ctx.z0 * ql * ql / qc_mag)
        points.append(PowerSweepPoint(fit=fit, n_photons=float(n), p_in=p_in))
    return ResonatorSweepRecord(
        film_thickness=film_thickness, points=points, label=label)
