import cmath
import math

import numpy as np
import pytest

from qloss.resfit import (
    Circle2D,
    FitError,
    NotchModelParams,
    estimate_cable_delay,
    extract_quality_factors,
    fit_circle,
    fit_phase,
    fit_resonator,
    notch_s21,
    offresonant_point,
    remove_cable_delay,
    synthesize_notch,
)
from qloss.types import ComplexTrace, ValidationError

PARAMS = NotchModelParams(fr=4.45e9, ql=5e4, qc_mag=1e5, phi=0.1,
                          a=1.0, alpha=0.0, tau=40e-9)


def grid(params, n=401, linewidths=10.0):
    lw = params.fr / params.ql
    half = 0.5 * linewidths * lw
    return np.linspace(params.fr - half, params.fr + half, n)


class TestSynthesize:
    def test_model_value_at_resonance(self):
        tr = synthesize_notch(PARAMS, grid(PARAMS), 0.0, 0)
        i = np.argmin(np.abs(tr.frequencies - PARAMS.fr))
        expected = (PARAMS.a * cmath.exp(1j * PARAMS.alpha)
                    * cmath.exp(-2j * math.pi * PARAMS.fr * PARAMS.tau)
                    * (1 - (PARAMS.ql / PARAMS.qc_mag) * cmath.exp(1j * PARAMS.phi)))
        assert tr.s21[i] == pytest.approx(expected, rel=1e-12)

    def test_no_resonator_is_flat(self):
        p = NotchModelParams(fr=4.45e9, ql=5e4, qc_mag=math.inf, phi=0.0, a=0.7)
        tr = synthesize_notch(p, np.linspace(4.4e9, 4.5e9, 64), 0.0, 0)
        assert np.allclose(np.abs(tr.s21), 0.7, rtol=1e-12)

    def test_minimum_depth_near_fr(self):
        p = NotchModelParams(fr=4.45e9, ql=5e4, qc_mag=1e5, phi=0.1,
                             a=1.0, alpha=0.0, tau=40e-9)
        f = grid(p, n=401, linewidths=10.0)
        tr = synthesize_notch(p, f, 0.0, 7)
        # delay rotates the dip; compare after removing the known delay
        z = tr.s21 * np.exp(2j * np.pi * f * p.tau)
        i_min = int(np.argmin(np.abs(z)))
        step = f[1] - f[0]
        assert abs(f[i_min] - p.fr) <= step

    def test_deterministic_given_seed(self):
        f = grid(PARAMS)
        a = synthesize_notch(PARAMS, f, 1e-3, 42)
        b = synthesize_notch(PARAMS, f, 1e-3, 42)
        assert np.array_equal(a.s21, b.s21)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValidationError):
            synthesize_notch(PARAMS, grid(PARAMS), -1.0, 0)

    def test_unphysical_params_rejected(self):
        with pytest.raises(ValidationError, match="unphysical"):
            NotchModelParams(fr=4.45e9, ql=2e5, qc_mag=1e5, phi=0.0)


class TestCableDelay:
    def test_recovers_planted_delay(self):
        tr = synthesize_notch(PARAMS, grid(PARAMS), 0.0, 0)
        _, tau = remove_cable_delay(tr)
        assert tau == pytest.approx(40e-9, rel=0.01)

    def test_zero_delay_input(self):
        p = NotchModelParams(fr=4.45e9, ql=5e4, qc_mag=1e5, phi=0.1, tau=0.0)
        tr = synthesize_notch(p, grid(p), 0.0, 0)
        _, tau = remove_cable_delay(tr)
        # slope equivalent below 0.01 rad across the span
        assert abs(tau) * 2 * math.pi * tr.span < 0.01

    def test_pure_noise_flagged(self):
        rng = np.random.default_rng(3)
        f = np.linspace(4.4e9, 4.5e9, 201)
        flagged = 0
        for seed in range(10):
            z = np.random.default_rng(seed).normal(0, 1e-3, (2, f.size))
            tr = ComplexTrace(f, z[0] + 1j * z[1])
            try:
                tau, err = estimate_cable_delay(tr)
                if err > abs(tau) or not math.isfinite(tau):
                    flagged += 1
            except FitError:
                flagged += 1
        assert flagged >= 8  # noise must not masquerade as a clean delay

    def test_too_narrow(self):
        f = np.linspace(4.4e9, 4.5e9, 8)
        tr = ComplexTrace(f, np.ones(8, dtype=complex))
        with pytest.raises(FitError, match="narrow"):
            estimate_cable_delay(tr)


class TestFitCircle:
    def test_exact_points(self):
        t = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        pts = 0.5 + 0.25 * np.exp(1j * t)
        c = fit_circle(pts)
        assert c.center == pytest.approx(0.5 + 0j, abs=1e-10)
        assert c.radius == pytest.approx(0.25, abs=1e-10)
        assert c.rms_residual < 1e-12

    def test_noisy_radius_monte_carlo(self):
        t = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        errs = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            pts = 0.5 + 0.25 * np.exp(1j * t) + rng.normal(0, 1e-3, 16) \
                + 1j * rng.normal(0, 1e-3, 16)
            errs.append(abs(fit_circle(pts).radius - 0.25) / 0.25)
        assert np.percentile(errs, 95) < 1e-2

    def test_small_arc(self):
        # 40 degrees of arc only; algebraic fit must stay sane
        t = np.linspace(0.0, 0.7, 60)
        pts = 1.0 - 0.3 * np.exp(1j * t)
        c = fit_circle(pts)
        assert c.radius == pytest.approx(0.3, rel=1e-6)

    def test_three_points_rejected(self):
        with pytest.raises(FitError, match="4 points"):
            fit_circle(np.array([0, 1, 1j]))

    def test_collinear_rejected(self):
        with pytest.raises(FitError, match="collinear"):
            fit_circle(np.linspace(0, 1, 10) + 0j)


class TestFitPhase:
    def delay_free(self, params, n=401):
        p = NotchModelParams(fr=params.fr, ql=params.ql, qc_mag=params.qc_mag,
                             phi=params.phi, a=params.a, alpha=params.alpha, tau=0.0)
        return synthesize_notch(p, grid(p, n), 0.0, 0)

    def test_recovers_ql(self):
        tr = self.delay_free(PARAMS)
        circle = fit_circle(tr.s21)
        fr, ql, theta0 = fit_phase(tr, circle)
        assert ql == pytest.approx(5e4, rel=1e-3)
        assert fr == pytest.approx(4.45e9, rel=1e-9)

    def test_mirrored_trace_reflects_theta0(self):
        # mirroring frequency about fr with complex conjugation is the
        # time-reversal image: same fr and Ql, theta0 negated
        tr = self.delay_free(PARAMS)
        circle = fit_circle(tr.s21)
        fr0, ql0, th0 = fit_phase(tr, circle)
        mirrored = ComplexTrace(tr.frequencies, np.conj(tr.s21[::-1]))
        circle_m = fit_circle(mirrored.s21)
        fr1, ql1, th1 = fit_phase(mirrored, circle_m)
        assert fr1 == pytest.approx(fr0, rel=1e-9)
        assert ql1 == pytest.approx(ql0, rel=1e-6)
        assert th1 == pytest.approx(-th0, abs=1e-6)

    def test_noise_monte_carlo_median(self):
        errs = []
        for seed in range(100):
            p = NotchModelParams(fr=PARAMS.fr, ql=PARAMS.ql, qc_mag=PARAMS.qc_mag,
                                 phi=PARAMS.phi, tau=0.0)
            tr = synthesize_notch(p, grid(p), 1e-3, seed)
            circle = fit_circle(tr.s21)
            _, ql, _ = fit_phase(tr, circle)
            errs.append(abs(ql - 5e4) / 5e4)
        assert np.median(errs) < 0.02


class TestExtract:
    def test_phi_zero_case(self):
        # Ql=5e4, normalized diameter Ql/Qc=0.5, phi=0 -> Qi = 1e5
        circle = Circle2D(center=0.75 + 0j, radius=0.25)
        theta0 = math.pi  # off-resonant point at angle 0 from center
        res = extract_quality_factors(4.45e9, 5e4, circle, theta0, a=1.0, alpha=0.0)
        assert res.qc_mag == pytest.approx(1e5, rel=1e-12)
        assert res.qi == pytest.approx(1e5, rel=1e-12)

    def test_phi_rotated_case(self):
        phi = 0.1
        r = 0.25
        center = 1.0 - r * cmath.exp(1j * phi)
        theta0 = math.pi + phi
        res = extract_quality_factors(4.45e9, 5e4, Circle2D(center, r), theta0,
                                      a=1.0, alpha=0.0)
        assert res.phi == pytest.approx(phi, abs=1e-9)
        # frozen oracle: 1/(1/5e4 - cos(0.1)/1e5)
        assert res.qi == pytest.approx(99502.8999574554, rel=1e-9)

    def test_oversized_circle_rejected(self):
        circle = Circle2D(center=0.5 + 0j, radius=0.55)
        with pytest.raises(FitError, match="non-positive"):
            extract_quality_factors(4.45e9, 5e4, circle, math.pi, a=1.0, alpha=0.0)


class TestFitResonator:
    def test_noiseless_round_trip(self):
        qi, qc, phi = 1e6, 2e5, 0.05
        ql = 1.0 / (1.0 / qi + math.cos(phi) / qc)
        p = NotchModelParams(fr=4.45e9, ql=ql, qc_mag=qc, phi=phi,
                             a=0.9, alpha=0.5, tau=40e-9)
        tr = synthesize_notch(p, grid(p, 501, 12), 0.0, 0)
        res = fit_resonator(tr)
        assert res.qi == pytest.approx(qi, rel=1e-3)
        assert res.fr == pytest.approx(p.fr, rel=1e-9)
        assert res.tau == pytest.approx(40e-9, rel=1e-2)

    def test_noisy_round_trip(self):
        qi, qc, phi = 1e6, 2e5, 0.05
        ql = 1.0 / (1.0 / qi + math.cos(phi) / qc)
        p = NotchModelParams(fr=4.45e9, ql=ql, qc_mag=qc, phi=phi, tau=40e-9)
        errs = []
        for seed in range(30):
            tr = synthesize_notch(p, grid(p, 501, 12), 1e-3, seed)
            errs.append(abs(fit_resonator(tr).qi - qi) / qi)
        assert np.percentile(errs, 95) < 0.05

    def test_two_resonances_flagged(self):
        p1 = NotchModelParams(fr=4.449e9, ql=5e4, qc_mag=1e5, phi=0.0)
        p2 = NotchModelParams(fr=4.451e9, ql=5e4, qc_mag=1e5, phi=0.0)
        f = np.linspace(4.4465e9, 4.4535e9, 801)
        z = notch_s21(p1, f) + notch_s21(p2, f) - 1.0
        tr = ComplexTrace(f, z)
        try:
            res = fit_resonator(tr)
            # a single-notch model cannot absorb two dips silently
            assert res.residual_rms > 5e-3
        except FitError:
            pass

    def test_identity_holds_in_result(self):
        tr = synthesize_notch(PARAMS, grid(PARAMS), 1e-3, 5)
        res = fit_resonator(tr)
        assert 1.0 / res.qi == pytest.approx(
            1.0 / res.ql - math.cos(res.phi) / res.qc_mag, rel=1e-9)

    def test_uncertainties_present_and_sane(self):
        tr = synthesize_notch(PARAMS, grid(PARAMS), 1e-3, 11)
        res = fit_resonator(tr)
        assert 0 < res.uncertainties["qi"] < res.qi
        assert 0 < res.uncertainties["fr"] < 1e5


class TestInvariants:
    def test_scale_invariance(self):
        tr = synthesize_notch(PARAMS, grid(PARAMS), 0.0, 0)
        base = fit_resonator(tr)
        scale = 2.5 * cmath.exp(0.7j)
        scaled = ComplexTrace(tr.frequencies, tr.s21 * scale)
        res = fit_resonator(scaled)
        assert res.qi == pytest.approx(base.qi, rel=1e-4)
        assert res.ql == pytest.approx(base.ql, rel=1e-4)
        assert res.qc_mag == pytest.approx(base.qc_mag, rel=1e-4)
        assert res.phi == pytest.approx(base.phi, abs=1e-4)
        assert res.a == pytest.approx(base.a * 2.5, rel=1e-4)

    def test_frequency_shift_covariance(self):
        tr = synthesize_notch(PARAMS, grid(PARAMS), 0.0, 0)
        base = fit_resonator(tr)
        df = 3e6
        shifted_params = NotchModelParams(fr=PARAMS.fr + df, ql=PARAMS.ql,
                                          qc_mag=PARAMS.qc_mag, phi=PARAMS.phi,
                                          a=PARAMS.a, alpha=PARAMS.alpha, tau=PARAMS.tau)
        shifted = synthesize_notch(shifted_params, grid(PARAMS) + df, 0.0, 0)
        res = fit_resonator(shifted)
        assert res.fr - base.fr == pytest.approx(df, rel=1e-6)
        assert res.qi == pytest.approx(base.qi, rel=1e-4)

    def test_round_trip_all_parameters_noiseless(self):
        rng = np.random.default_rng(99)
        for _ in range(5):
            qi = 10 ** rng.uniform(5, 6.5)
            qc = 10 ** rng.uniform(4.8, 6)
            phi = rng.uniform(-0.3, 0.3)
            ql = 1.0 / (1.0 / qi + math.cos(phi) / qc)
            p = NotchModelParams(fr=5e9, ql=ql, qc_mag=qc, phi=phi,
                                 a=1.2, alpha=-0.8, tau=25e-9)
            tr = synthesize_notch(p, grid(p, 501, 12), 0.0, 0)
            res = fit_resonator(tr)
            assert res.qi == pytest.approx(qi, rel=1e-3)
            assert res.ql == pytest.approx(ql, rel=1e-3)
            assert res.qc_mag == pytest.approx(qc, rel=1e-3)
            assert res.phi == pytest.approx(phi, abs=1e-3)
