"""Validated domain containers shared by every analysis module.

All containers are immutable value objects: arrays are copied on construction
and marked read-only, so instances are safe to share across threads and to
fan out to parallel batch workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class ValidationError(ValueError):
    """A container invariant was violated; the message names the first offense."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ComplexTrace:
    """A frequency-indexed complex S21 sweep with drive-power metadata.

    frequencies are in Hz and must be strictly increasing; s21 is the complex
    transmission at each frequency. applied_power is the instrument output in
    dBm, line_attenuation the total input-chain attenuation in dB between the
    instrument and the device port, temperature the stage temperature in K.
    """

    frequencies: np.ndarray
    s21: np.ndarray
    applied_power: float = -100.0
    line_attenuation: float = 0.0
    temperature: float = 0.01

    def __post_init__(self):
        f = _readonly(np.asarray(self.frequencies, dtype=float))
        z = _readonly(np.asarray(self.s21, dtype=complex))
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s21", z)
        if f.ndim != 1 or f.size < 8:
            raise ValidationError(f"too few points: need at least 8 frequencies, got {f.size}")
        df = np.diff(f)
        if np.any(df <= 0):
            i = int(np.argmax(df <= 0))
            raise ValidationError(
                f"frequencies not strictly increasing at index {i + 1}: "
                f"{f[i]:.6g} -> {f[i + 1]:.6g} Hz"
            )
        if z.shape != f.shape:
            raise ValidationError(f"s21 length {z.size} does not match {f.size} frequencies")
        finite = np.isfinite(z.real) & np.isfinite(z.imag)
        if not np.all(finite):
            i = int(np.argmin(finite))
            raise ValidationError(f"s21 not finite at index {i}: {z[i]}")
        if self.line_attenuation < 0:
            raise ValidationError(f"line_attenuation must be >= 0 dB, got {self.line_attenuation}")

    def __len__(self) -> int:
        return int(self.frequencies.size)

    @property
    def span(self) -> float:
        return float(self.frequencies[-1] - self.frequencies[0])


def validate_trace(trace: ComplexTrace) -> ComplexTrace:
    """Return the trace unchanged if every ComplexTrace invariant holds.

    Construction already enforces the invariants; this entry point exists so
    callers holding an instance built through other means (e.g. dataclasses
    replace) can re-check before fitting.
    """
    return ComplexTrace(
        trace.frequencies,
        trace.s21,
        trace.applied_power,
        trace.line_attenuation,
        trace.temperature,
    )


#: Relative tolerance for the diameter-correction identity check.
_IDENTITY_RTOL = 1e-9


@dataclass(frozen=True)
class ResonatorFitResult:
    """Fitted notch-resonance parameters.

    fr is the resonance frequency in Hz, Ql/Qc_mag/Qi the loaded, coupling
    (magnitude) and internal quality factors, phi the impedance-mismatch
    rotation of the resonance circle, tau the cable delay in s, and (a, alpha)
    the environment amplitude and phase. The internal loss is defined by the
    diameter-corrected identity 1/Qi = 1/Ql - cos(phi)/Qc_mag, which is
    asserted (not re-derived) at construction.
    """

    fr: float
    ql: float
    qc_mag: float
    phi: float
    qi: float
    tau: float
    a: float
    alpha: float
    uncertainties: dict = field(default_factory=dict)
    residual_rms: float = float("nan")

    def __post_init__(self):
        if not (self.ql > 0 and self.qc_mag > 0 and self.qi > 0):
            raise ValidationError(
                f"quality factors must be positive: Ql={self.ql:.4g}, "
                f"Qc_mag={self.qc_mag:.4g}, Qi={self.qi:.4g}"
            )
        if not abs(self.phi) < math.pi / 2:
            raise ValidationError(f"|phi| must be < pi/2, got {self.phi:.4g}")
        lhs = 1.0 / self.qi
        rhs = 1.0 / self.ql - math.cos(self.phi) / self.qc_mag
        if not math.isclose(lhs, rhs, rel_tol=_IDENTITY_RTOL, abs_tol=0.0):
            raise ValidationError(
                f"diameter-correction identity violated: 1/Qi={lhs:.12e} vs "
                f"1/Ql - cos(phi)/Qc = {rhs:.12e}"
            )

    def as_dict(self) -> dict:
        return {
            "fr": self.fr,
            "ql": self.ql,
            "qc_mag": self.qc_mag,
            "phi": self.phi,
            "qi": self.qi,
            "tau": self.tau,
            "a": self.a,
            "alpha": self.alpha,
            "uncertainties": dict(self.uncertainties),
            "residual_rms": self.residual_rms,
        }

    @classmethod
    def from_quality_factors(
        cls,
        fr: float,
        ql: float,
        qc_mag: float,
        qi: float,
        tau: float = 0.0,
        a: float = 1.0,
        alpha: float = 0.0,
        uncertainties: Optional[dict] = None,
    ) -> "ResonatorFitResult":
        """Build a result from pre-fitted quality factors.

        The mismatch angle is implied by the identity: cos(phi) =
        Qc_mag*(1/Ql - 1/Qi); the combination must be consistent (in (0, 1]).
        """
        c = qc_mag * (1.0 / ql - 1.0 / qi)
        # tolerate rounding from serialized quality factors
        if not 0.0 < c <= 1.0 + 1e-6:
            raise ValidationError(
                f"inconsistent quality factors: Qc_mag*(1/Ql - 1/Qi) = {c:.6g} not in (0, 1]"
            )
        phi = math.acos(min(c, 1.0))
        # re-derive qi from the rounded phi so the identity holds exactly
        qi_exact = 1.0 / (1.0 / ql - math.cos(phi) / qc_mag)
        return cls(
            fr=fr,
            ql=ql,
            qc_mag=qc_mag,
            phi=phi,
            qi=qi_exact,
            tau=tau,
            a=a,
            alpha=alpha,
            uncertainties=uncertainties or {},
        )


@dataclass(frozen=True)
class PowerSweepPoint:
    """One power level of a resonator power sweep: a fit plus its calibrated drive."""

    fit: ResonatorFitResult
    n_photons: float
    p_in: float

    def __post_init__(self):
        if not self.n_photons > 0:
            raise ValidationError(f"n_photons must be > 0, got {self.n_photons}")
        if not self.p_in > 0:
            raise ValidationError(f"p_in must be > 0 W, got {self.p_in}")


@dataclass(frozen=True)
class TlsFitResult:
    """Parameters of the power-dependent TLS loss model.

    f_delta_tls is the zero-power TLS loss (filling factor times intrinsic
    loss tangent), n_c the critical photon number, beta the saturation
    exponent, delta0 the power-independent residual loss. temperature is the
    stage temperature used for the tanh thermal factor.
    """

    f_delta_tls: float
    n_c: float
    beta: float
    delta0: float
    temperature: float
    uncertainties: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.f_delta_tls < 0:
            raise ValidationError(f"f_delta_tls must be >= 0, got {self.f_delta_tls}")
        if not self.n_c > 0:
            raise ValidationError(f"n_c must be > 0, got {self.n_c}")
        if not 0 < self.beta <= 1:
            raise ValidationError(f"beta must be in (0, 1], got {self.beta}")
        if self.delta0 < 0:
            raise ValidationError(f"delta0 must be >= 0, got {self.delta0}")

    def as_dict(self) -> dict:
        return {
            "f_delta_tls": self.f_delta_tls,
            "n_c": self.n_c,
            "beta": self.beta,
            "delta0": self.delta0,
            "temperature": self.temperature,
            "uncertainties": dict(self.uncertainties),
        }


@dataclass(frozen=True)
class QubitRecord:
    """One measured qubit, in the units of the bundled dataset.

    Frequencies are in GHz, times in us, film_thickness in nm, q_factor in
    units of 1e6. detuning is stored as the magnitude |f_q - f_r| (the sign
    never enters any formula used here). T2-echo fields are None when the
    measurement is absent, never zero.
    """

    label: str
    film_thickness: float
    f_q: float
    f_r: float
    detuning: float
    t1_mean: float
    t1_std: float
    t2echo_mean: Optional[float]
    t2echo_std: Optional[float]
    t_purcell: float
    q_factor: float
    included: bool = True

    def __post_init__(self):
        if not (self.f_q > 0 and self.f_r > 0 and self.t1_mean > 0):
            raise ValidationError(
                f"{self.label}: f_q, f_r, t1_mean must be positive "
                f"({self.f_q}, {self.f_r}, {self.t1_mean})"
            )
        if abs(self.detuning - abs(self.f_q - self.f_r)) > 0.001 + 1e-9:
            raise ValidationError(
                f"{self.label}: detuning {self.detuning} GHz is not |f_q - f_r| = "
                f"{abs(self.f_q - self.f_r):.3f} GHz within 0.001"
            )
        # q_factor column is rounded to one decimal x1e6; allow 5%
        q_check = 2.0 * math.pi * (self.f_q * 1e9) * (self.t1_mean * 1e-6) / 1e6
        if not math.isclose(self.q_factor, q_check, rel_tol=0.05):
            raise ValidationError(
                f"{self.label}: q_factor {self.q_factor}e6 inconsistent with "
                f"2*pi*f_q*T1 = {q_check:.2f}e6 (5% tolerance)"
            )

    @property
    def f_q_hz(self) -> float:
        return self.f_q * 1e9

    @property
    def f_r_hz(self) -> float:
        return self.f_r * 1e9

    @property
    def t1_s(self) -> float:
        return self.t1_mean * 1e-6

    @property
    def t_purcell_s(self) -> float:
        return self.t_purcell * 1e-6


@dataclass(frozen=True)
class LossBudget:
    """Per-qubit quality-factor attribution; absent entries are unattributed.

    Whenever all entries are present, the attributed loss cannot exceed the
    total: 1/q_total >= sum of attributed 1/q_i, up to 1e-12 absolute.
    """

    q_total: Optional[float] = None
    q_tls: Optional[float] = None
    q_purcell: Optional[float] = None
    q_other: Optional[float] = None

    def __post_init__(self):
        parts = [self.q_tls, self.q_purcell, self.q_other]
        if self.q_total is not None and all(p is not None for p in parts):
            attributed = sum(1.0 / p for p in parts)
            if 1.0 / self.q_total < attributed - 1e-12:
                raise ValidationError(
                    f"attributed loss {attributed:.6e} exceeds total 1/Q "
                    f"{1.0 / self.q_total:.6e}"
                )

    def as_dict(self) -> dict:
        return {
            "q_total": self.q_total,
            "q_tls": self.q_tls,
            "q_purcell": self.q_purcell,
            "q_other": self.q_other,
        }
