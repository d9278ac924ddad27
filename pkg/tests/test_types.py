import math

import numpy as np
import pytest

from qloss.types import (
    ComplexTrace,
    LossBudget,
    PowerSweepPoint,
    QubitRecord,
    ResonatorFitResult,
    TlsFitResult,
    ValidationError,
    validate_trace,
)


def make_trace(n=201):
    f = np.linspace(4.4e9, 4.5e9, n)
    z = np.ones(n, dtype=complex)
    return ComplexTrace(f, z)


class TestComplexTrace:
    def test_valid_trace_passes_through(self):
        tr = make_trace()
        out = validate_trace(tr)
        assert np.array_equal(out.frequencies, tr.frequencies)
        assert np.array_equal(out.s21, tr.s21)

    def test_nan_names_offending_index(self):
        f = np.linspace(4.4e9, 4.5e9, 64)
        z = np.ones(64, dtype=complex)
        z[17] = complex(float("nan"), 0.0)
        with pytest.raises(ValidationError, match="index 17"):
            ComplexTrace(f, z)

    def test_too_few_points(self):
        with pytest.raises(ValidationError, match="too few"):
            ComplexTrace(np.linspace(1e9, 2e9, 4), np.ones(4, dtype=complex))

    def test_non_monotone_frequencies(self):
        f = np.linspace(4.4e9, 4.5e9, 16)
        f[8] = f[7]
        with pytest.raises(ValidationError, match="increasing"):
            ComplexTrace(f, np.ones(16, dtype=complex))

    def test_negative_attenuation(self):
        with pytest.raises(ValidationError, match="line_attenuation"):
            ComplexTrace(np.linspace(1e9, 2e9, 16), np.ones(16, dtype=complex),
                         line_attenuation=-1.0)

    def test_arrays_are_immutable(self):
        tr = make_trace()
        with pytest.raises((ValueError, RuntimeError)):
            tr.frequencies[0] = 0.0


class TestResonatorFitResult:
    def test_identity_enforced(self):
        # Qi consistent with Ql, Qc, phi passes
        ql, qc, phi = 5e4, 1e5, 0.1
        qi = 1.0 / (1.0 / ql - math.cos(phi) / qc)
        r = ResonatorFitResult(fr=4.45e9, ql=ql, qc_mag=qc, phi=phi, qi=qi,
                               tau=0.0, a=1.0, alpha=0.0)
        assert r.qi == qi

    def test_identity_violation_rejected(self):
        with pytest.raises(ValidationError, match="identity"):
            ResonatorFitResult(fr=4.45e9, ql=5e4, qc_mag=1e5, phi=0.1, qi=2e5,
                               tau=0.0, a=1.0, alpha=0.0)

    def test_phi_bounds(self):
        with pytest.raises(ValidationError, match="phi"):
            ResonatorFitResult(fr=1e9, ql=1e4, qc_mag=1e5, phi=2.0, qi=1e4,
                               tau=0.0, a=1.0, alpha=0.0)

    def test_from_quality_factors_round_trip(self):
        r = ResonatorFitResult.from_quality_factors(fr=5e9, ql=8e4, qc_mag=2e5, qi=1.25e5)
        assert r.qi == pytest.approx(1.25e5, rel=1e-9)
        assert abs(1.0 / r.qi - (1.0 / r.ql - math.cos(r.phi) / r.qc_mag)) < 1e-18

    def test_from_quality_factors_inconsistent(self):
        with pytest.raises(ValidationError, match="inconsistent"):
            ResonatorFitResult.from_quality_factors(fr=5e9, ql=1e5, qc_mag=1e5, qi=1e5)


class TestPowerSweepPoint:
    def test_positivity(self):
        fit = ResonatorFitResult.from_quality_factors(5e9, 8e4, 2e5, 1.25e5)
        with pytest.raises(ValidationError):
            PowerSweepPoint(fit=fit, n_photons=0.0, p_in=1e-15)
        with pytest.raises(ValidationError):
            PowerSweepPoint(fit=fit, n_photons=1.0, p_in=0.0)


class TestTlsFitResult:
    def test_bounds(self):
        TlsFitResult(1e-6, 10.0, 0.3, 2e-7, 0.01)
        with pytest.raises(ValidationError):
            TlsFitResult(-1e-6, 10.0, 0.3, 2e-7, 0.01)
        with pytest.raises(ValidationError):
            TlsFitResult(1e-6, 10.0, 1.2, 2e-7, 0.01)
        with pytest.raises(ValidationError):
            TlsFitResult(1e-6, 0.0, 0.3, 2e-7, 0.01)


class TestQubitRecord:
    def test_consistent_row(self):
        r = QubitRecord("Q27", 500, 3.016, 6.386, 3.371, 270, 83, 307, 114, 1141, 5.1)
        assert r.f_q_hz == pytest.approx(3.016e9)
        assert r.t1_s == pytest.approx(270e-6)

    def test_detuning_mismatch(self):
        with pytest.raises(ValidationError, match="detuning"):
            QubitRecord("Qx", 150, 4.711, 6.035, 2.0, 51, 9, 79, 17, 64, 1.5)

    def test_q_factor_mismatch(self):
        with pytest.raises(ValidationError, match="q_factor"):
            QubitRecord("Qx", 150, 4.711, 6.035, 1.324, 51, 9, 79, 17, 64, 9.9)


class TestLossBudget:
    def test_partial_budget_allowed(self):
        LossBudget(q_total=2e6, q_tls=4e6)

    def test_overattribution_rejected(self):
        with pytest.raises(ValidationError, match="exceeds"):
            LossBudget(q_total=1e6, q_tls=4e6, q_purcell=4e6, q_other=4e6)

    def test_exact_attribution(self):
        # 1/2e6 = 1/4e6 + 1/8e6 + 1/8e6
        LossBudget(q_total=2e6, q_tls=4e6, q_purcell=8e6, q_other=8e6)
