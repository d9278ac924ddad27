"""Qubit-side loss analysis: T1 extraction, Purcell decay, screening, budgets.

A qubit's quality factor is Q = w_q * T1. Spontaneous emission through the
readout resonator (Purcell decay) proceeds at

    gamma = kappa * g^2 / Delta^2,   kappa = w_r/Ql,  g = sqrt(chi*Delta),

equivalently gamma = (w_r/Ql) * chi/|Delta| in angular units, removing the
sign ambiguity of the square root for negative detuning. Dividing the
Purcell channel out of the measured loss gives the TLS-limited quality
factor Q_tls = Q / (1 - T1/Tp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .resfit import FitError
from .types import LossBudget, QubitRecord, ValidationError

#: Histogram bin width for relaxation-time statistics (us).
T1_BIN_US = 25.0

#: Purcell-ratio cuts used in the grouped quality-factor summaries.
PURCELL_CUTS = (1.0, 0.5, 0.25)


@dataclass(frozen=True)
class DecayTrace:
    """A qubit energy-relaxation measurement: populations vs readout delay."""

    delays: np.ndarray
    population: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        p = np.asarray(self.population, dtype=float)
        d.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "population", p)
        if d.size < 6:
            raise ValidationError(f"need at least 6 delay points, got {d.size}")
        if np.any(np.diff(d) <= 0):
            raise ValidationError("delays must be strictly increasing")
        if p.shape != d.shape:
            raise ValidationError("population length must match delays")
        if np.any(p < -0.2) or np.any(p > 1.2):
            raise ValidationError("population outside [-0.2, 1.2]")


@dataclass(frozen=True)
class DispersiveParams:
    """Readout-resonator parameters entering the Purcell rate."""

    f_r: float
    q_loaded: float
    chi: float
    f_q: float

    def __post_init__(self):
        if not (self.f_r > 0 and self.q_loaded > 0 and self.chi > 0 and self.f_q > 0):
            raise ValidationError("all dispersive parameters must be positive")
        if self.f_q == self.f_r:
            raise ValidationError("qubit-resonator detuning must be nonzero")


def fit_t1(trace: DecayTrace) -> Tuple[float, float, float, float]:
    """Fit p(t) = A*exp(-t/T1) + B; returns (t1, offset, amplitude, stderr).

    Raises when the fit does not converge or when the recovered T1 exceeds
    100x the delay span (the trace cannot resolve it).
    """
    t = trace.delays
    p = trace.population
    span = float(t[-1] - t[0])
    a0 = float(p[0] - p[-1])
    b0 = float(p[-1])
    if abs(a0) < 1e-12:
        a0 = max(float(p.max() - p.min()), 1e-3)
    t1_0 = span / 3.0

    def model(x, amp, t1, off):
        return amp * np.exp(-x / t1) + off

    try:
        popt, pcov = optimize.curve_fit(
            model, t, p, p0=[a0, t1_0, b0],
            bounds=([-10.0, span * 1e-6, -10.0], [10.0, span * 1e4, 10.0]),
            maxfev=10000,
        )
    except RuntimeError as exc:
        raise FitError("t1", f"exponential fit did not converge: {exc}") from exc
    amp, t1, off = popt
    if t1 > 100.0 * span:
        raise FitError("t1", f"T1 = {t1:.3g} s exceeds 100x the delay span {span:.3g} s")
    stderr = float(math.sqrt(max(pcov[1, 1], 0.0))) if np.all(np.isfinite(pcov)) else math.inf
    return float(t1), float(off), float(amp), stderr


def t1_statistics(series: Sequence[float]) -> Tuple[float, float, Tuple[np.ndarray, np.ndarray]]:
    """Mean, sample standard deviation and fixed-bin histogram of a T1 series (s)."""
    if len(series) == 0:
        raise ValidationError("empty T1 series")
    arr = np.asarray(series, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    bin_s = T1_BIN_US * 1e-6
    top = math.ceil(float(arr.max()) / bin_s) * bin_s
    edges = np.arange(0.0, top + bin_s / 2, bin_s)
    counts, edges = np.histogram(arr, bins=edges)
    return mean, std, (counts, edges)


def purcell_rate(d: DispersiveParams) -> float:
    """Purcell decay rate gamma (1/s); the decay time constant is 1/gamma."""
    w_r = 2.0 * math.pi * d.f_r
    chi_ang = 2.0 * math.pi * d.chi
    delta_ang = 2.0 * math.pi * abs(d.f_q - d.f_r)
    return (w_r / d.q_loaded) * chi_ang / delta_ang


def chi_for_purcell_time(f_r: float, q_loaded: float, f_q: float, t_p: float) -> float:
    """Dispersive shift (Hz) that yields the given Purcell time; inverse of purcell_rate."""
    w_r = 2.0 * math.pi * f_r
    delta_ang = 2.0 * math.pi * abs(f_q - f_r)
    return delta_ang / (t_p * (w_r / q_loaded)) / (2.0 * math.pi)


def quality_factor(f_q: float, t1: float) -> float:
    """Q = w_q * T1 with f_q in Hz and t1 in s."""
    if f_q < 0 or t1 < 0:
        raise ValidationError("f_q and t1 must be non-negative")
    return 2.0 * math.pi * f_q * t1


def tls_limited_q(q: float, t1: float, t_p: float) -> float:
    """Quality factor with the Purcell channel divided out: Q/(1 - T1/Tp)."""
    if not 0 <= t1 < t_p:
        raise ValidationError(
            f"need 0 <= T1 < Tp for the Purcell correction, got T1={t1:.4g}, Tp={t_p:.4g}"
        )
    return q / (1.0 - t1 / t_p)


RULE_ECHO = "T2echo > 2*T1"
RULE_PURCELL = "T1 > Tp"


def screen_qubit(record: QubitRecord) -> Tuple[bool, str]:
    """Apply the inconsistency screens; returns (included, reason)."""
    if record.t2echo_mean is not None and record.t2echo_mean > 2.0 * record.t1_mean:
        return False, RULE_ECHO
    if record.t1_mean > record.t_purcell:
        return False, RULE_PURCELL
    return True, "ok"


def loss_budget(record: QubitRecord) -> LossBudget:
    """Split a record's measured loss into TLS and Purcell channels."""
    q = quality_factor(record.f_q_hz, record.t1_s)
    q_tls = tls_limited_q(q, record.t1_s, record.t_purcell_s)
    q_p = q * record.t_purcell / record.t1_mean
    return LossBudget(q_total=q, q_tls=q_tls, q_purcell=q_p)


@dataclass(frozen=True)
class GroupMeans:
    """Mean quality factors of a qubit group at each Purcell-ratio cut."""

    group: str
    n_all: int
    q_mean_all: float
    n_half: int
    q_mean_half: Optional[float]
    n_quarter: int
    q_mean_quarter: Optional[float]

    def as_dict(self) -> dict:
        return {
            "group": self.group,
            "n_all": self.n_all,
            "q_mean_all": self.q_mean_all,
            "n_half": self.n_half,
            "q_mean_half": self.q_mean_half,
            "n_quarter": self.n_quarter,
            "q_mean_quarter": self.q_mean_quarter,
        }


def _group_means(name: str, records: Sequence[QubitRecord]) -> GroupMeans:
    if not records:
        raise ValidationError(f"empty qubit group: {name}")
    qs = np.array([quality_factor(r.f_q_hz, r.t1_s) for r in records])
    ratios = np.array([r.t1_mean / r.t_purcell for r in records])
    half = qs[ratios <= 0.5]
    quarter = qs[ratios <= 0.25]
    return GroupMeans(
        group=name,
        n_all=len(qs),
        q_mean_all=float(qs.mean()),
        n_half=len(half),
        q_mean_half=float(half.mean()) if half.size else None,
        n_quarter=len(quarter),
        q_mean_quarter=float(quarter.mean()) if quarter.size else None,
    )


def summarize_quality_factors(records: Sequence[QubitRecord]) -> Tuple[
        List[dict], Dict[str, GroupMeans]]:
    """Scatter data and grouped mean quality factors for screened records.

    Returns (scatter, means). scatter holds one point per included record:
    (label, thickness, t1/tp, Q, Q_tls). means holds per-thickness groups,
    a pooled "thick" group (>= 300 nm), and the overall group, each with the
    mean Q over all records and over the T1 <= 0.5*Tp / 0.25*Tp subsets.
    """
    included = [r for r in records if screen_qubit(r)[0]]
    if not included:
        raise ValidationError("no records pass screening")
    scatter = []
    for r in included:
        q = quality_factor(r.f_q_hz, r.t1_s)
        scatter.append({
            "label": r.label,
            "film_thickness": r.film_thickness,
            "t1_over_tp": r.t1_mean / r.t_purcell,
            "q": q,
            "q_tls": tls_limited_q(q, r.t1_s, r.t_purcell_s),
        })
    means: Dict[str, GroupMeans] = {}
    for thickness in sorted({r.film_thickness for r in included}):
        group = [r for r in included if r.film_thickness == thickness]
        means[f"{thickness:g}nm"] = _group_means(f"{thickness:g}nm", group)
    thick = [r for r in included if r.film_thickness >= 300.0]
    if thick:
        means["thick"] = _group_means("thick", thick)
    means["all"] = _group_means("all", included)
    return scatter, means
