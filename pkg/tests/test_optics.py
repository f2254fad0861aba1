import math

import numpy as np
import pytest
from scipy.integrate import quad

from tiltsim.optics import (
    BeamParams,
    DarkPortError,
    Geometry,
    OperatingPoint,
    darkport_intensity,
    darkport_power,
    detected_fraction,
    differential_displacement,
    mean_shift_approx,
    mean_shift_exact,
    misalignment_angle,
    misalignment_from_power_ratio,
    phase_from_tilt,
    tilt_from_phase,
)

BEAM = BeamParams(sigma=0.25e-3, lam=780e-9)
GEOM = Geometry(L=0.02, k=0.2 / BEAM.sigma)


def oracle_intensity(z, phi, k, sigma):
    """Independent route: squared complex field magnitude on the envelope."""
    return (np.abs(1.0 - np.exp(1j * (phi + k * z))) ** 2
            * np.exp(-z * z / (2.0 * sigma ** 2)))


def oracle_mean_shift(phi, k, sigma):
    """Adaptive quadrature of z*I/I over the +-8 sigma window."""
    num, _ = quad(lambda z: z * oracle_intensity(z, phi, k, sigma),
                  -8 * sigma, 8 * sigma, epsabs=1e-15, epsrel=1e-13, limit=400)
    den, _ = quad(lambda z: oracle_intensity(z, phi, k, sigma),
                  -8 * sigma, 8 * sigma, epsabs=1e-15, epsrel=1e-13, limit=400)
    return num / den


class TestPhaseFromTilt:
    def test_zero(self):
        assert phase_from_tilt(0.0, GEOM, BEAM) == 0.0

    def test_reference_tilt(self):
        # sqrt(2)*(2 pi/780e-9)*0.02*0.8e-9, independent arithmetic
        expected = math.sqrt(2.0) * (2.0 * math.pi / 780e-9) * 0.02 * 0.8e-9
        assert phase_from_tilt(0.8e-9, GEOM, BEAM) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(1.823e-4, rel=1e-3)

    def test_linear(self):
        assert phase_from_tilt(3e-9, GEOM, BEAM) == pytest.approx(
            3.0 * phase_from_tilt(1e-9, GEOM, BEAM), rel=1e-14)

    @pytest.mark.parametrize("theta", [1e-15, 2.2e-9, -4.5e-7, 0.1])
    def test_round_trip(self, theta):
        phi = phase_from_tilt(theta, GEOM, BEAM)
        assert tilt_from_phase(phi, GEOM, BEAM) == pytest.approx(theta, rel=1e-12)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            phase_from_tilt(math.nan, GEOM, BEAM)
        with pytest.raises(ValueError):
            tilt_from_phase(math.inf, GEOM, BEAM)


class TestDarkportIntensity:
    def test_dark_fringe_at_center(self):
        assert darkport_intensity(0.0, 0.0, GEOM, BEAM) == 0.0

    def test_even_at_zero_phase(self):
        z = np.linspace(0.1, 4.0, 40) * BEAM.sigma
        left = darkport_intensity(-z, 0.0, GEOM, BEAM)
        right = darkport_intensity(z, 0.0, GEOM, BEAM)
        np.testing.assert_allclose(left, right, rtol=1e-13)

    def test_two_routes_agree(self):
        sigma = BEAM.sigma
        v = darkport_intensity(sigma, 0.05, GEOM, BEAM)
        w = oracle_intensity(sigma, 0.05, 0.2 / sigma, sigma)
        assert v == pytest.approx(w, abs=1e-12)

    def test_zero_on_null_locus(self):
        # phi + k z = 2 pi up to float rounding of z
        k = GEOM.k
        z = (2.0 * math.pi - 0.05) / k
        assert darkport_intensity(z, 0.05, GEOM, BEAM) < 1e-30

    def test_nonnegative(self):
        z = np.linspace(-6, 6, 500) * BEAM.sigma
        assert np.all(darkport_intensity(z, 0.3, GEOM, BEAM) >= 0.0)


class TestMeanShift:
    def test_balanced_at_zero_phase(self):
        assert mean_shift_exact(0.0, 0.2, 1.0) == 0.0

    def test_against_quadrature_oracle(self):
        # frozen from the quadrature oracle (phi=0.05, k sigma=0.2, sigma=1)
        assert mean_shift_exact(0.05, 0.2, 1.0) == pytest.approx(
            0.46598278621475014, rel=1e-8)

    def test_gap_to_linear_approx(self):
        exact = oracle_mean_shift(0.05, 0.2, 1.0)
        approx = mean_shift_approx(0.05, 0.2)
        assert approx == 0.5
        assert (approx - exact) / approx == pytest.approx(0.068, abs=0.002)

    @pytest.mark.parametrize("phi", [0.0, 1e-3, 0.01, 0.05, 0.1])
    @pytest.mark.parametrize("ksigma", [0.05, 0.1, 0.2, 0.4])
    def test_quadrature_grid(self, phi, ksigma):
        sigma = 1.0
        got = mean_shift_exact(phi, ksigma / sigma, sigma)
        want = oracle_mean_shift(phi, ksigma / sigma, sigma)
        if phi == 0.0:
            assert got == 0.0
            assert abs(want) < 1e-12
        else:
            assert got == pytest.approx(want, rel=1e-8)

    @pytest.mark.parametrize("phi", [1e-3, 0.05, 0.1])
    @pytest.mark.parametrize("ksigma", [0.05, 0.2, 0.4])
    def test_odd_in_phi_and_k(self, phi, ksigma):
        assert mean_shift_exact(-phi, ksigma, 1.0) == -mean_shift_exact(phi, ksigma, 1.0)
        assert mean_shift_exact(phi, -ksigma, 1.0) == -mean_shift_exact(phi, ksigma, 1.0)

    def test_degenerate_dark_port(self):
        with pytest.raises(DarkPortError):
            mean_shift_exact(0.0, 0.0, 1.0)

    def test_amplification_grows_as_k_shrinks(self):
        # fixed small phase inside the inverse-amplification window
        phi = 1e-3 * 0.4
        shifts = [abs(mean_shift_approx(phi, ks)) for ks in (0.4, 0.2, 0.1, 0.05)]
        assert all(b > a for a, b in zip(shifts, shifts[1:]))

    def test_approx_trivials(self):
        assert mean_shift_approx(0.0, 0.2) == 0.0
        assert mean_shift_approx(0.01, 0.2) == pytest.approx(0.1, rel=1e-14)
        with pytest.raises(ValueError):
            mean_shift_approx(0.1, 0.0)

    @pytest.mark.parametrize("ksigma", [0.05, 0.1, 0.2])
    @pytest.mark.parametrize("ratio", [10.0, 20.0, 100.0])
    def test_approx_matches_exact_in_window(self, ksigma, ratio):
        # leading-order gap is (k sigma)^2/4 + (phi/(k sigma))^2
        phi = ksigma / ratio
        exact = mean_shift_exact(phi, ksigma, 1.0)
        gap = abs(mean_shift_approx(phi, ksigma) - exact) / abs(exact)
        bound = ksigma ** 2 / 4.0 + (phi / ksigma) ** 2
        assert gap <= 1.2 * bound
        if bound < 0.008:
            assert gap < 0.01


class TestNormalizationConsistency:
    @pytest.mark.parametrize("phi", [0.0, 0.01, 0.05])
    @pytest.mark.parametrize("ksigma", [0.05, 0.1, 0.2])
    def test_power_matches_probability(self, phi, ksigma):
        sigma = 1.0
        total, _ = quad(lambda z: oracle_intensity(z, phi, ksigma, sigma),
                        -8, 8, epsabs=1e-15, epsrel=1e-13, limit=400)
        p_weak = math.sin(phi / 2) ** 2 + (ksigma / 2) ** 2 * math.cos(phi)
        # difference is cos(phi)*(k sigma)^4/16 plus higher orders
        assert abs(total / (math.sqrt(2 * math.pi) * sigma) - 4 * p_weak) \
            <= 0.5 * ksigma ** 4

    def test_closed_form_power(self):
        got = darkport_power(0.05, 0.2, 1.0)
        want, _ = quad(lambda z: oracle_intensity(z, 0.05, 0.2, 1.0),
                       -8, 8, epsabs=1e-15, epsrel=1e-13, limit=400)
        assert got == pytest.approx(want, rel=1e-10)


class TestDetectedFraction:
    def test_perfect_dark_port(self):
        assert detected_fraction(0.0, 1.0) == 0.0

    def test_reference_power_ratio(self):
        assert detected_fraction(0.674 / 1.0, 1.0) == pytest.approx(1 / 8.8, rel=1e-3)

    def test_square_law(self):
        assert detected_fraction(0.2, 1.0) == pytest.approx(0.01, rel=1e-14)

    def test_guard_warns(self):
        with pytest.warns(UserWarning):
            detected_fraction(0.9, 1.0)


class TestMisalignment:
    def test_from_reference_ratio(self):
        k = misalignment_from_power_ratio(8.8, 0.25e-3)
        assert k == pytest.approx(2696.7994498529683, rel=1e-12)
        assert k * 0.25e-3 == pytest.approx(0.674, rel=1e-3)

    def test_inverse_square(self):
        assert misalignment_from_power_ratio(400.0, 1.0) == pytest.approx(0.1, rel=1e-12)

    @pytest.mark.parametrize("ratio", [2.0, 10.0, 100.0])
    def test_round_trip(self, ratio):
        sigma = 0.25e-3
        k = misalignment_from_power_ratio(ratio, sigma)
        assert detected_fraction(k, sigma) == pytest.approx(1.0 / ratio, rel=1e-12)

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            misalignment_from_power_ratio(1.0, 1.0)

    def test_angle(self):
        assert misalignment_angle(0.0, BEAM) == 0.0
        k = misalignment_from_power_ratio(8.8, BEAM.sigma)
        angle = misalignment_angle(k, BEAM)
        assert angle == pytest.approx(3.35e-4, rel=5e-3)
        assert abs(angle - 0.3e-3) / 0.3e-3 < 0.15
        assert misalignment_angle(2 * k, BEAM) == pytest.approx(2 * angle, rel=1e-14)


class TestDifferentialDisplacement:
    def test_reference_values(self):
        assert differential_displacement(200e-15, GEOM) == pytest.approx(4.0e-15, rel=1e-12)
        assert differential_displacement(56e-15, GEOM) == pytest.approx(1.1e-15, rel=0.02)
        assert differential_displacement(0.0, GEOM) == 0.0


class TestDomainTypes:
    def test_beam_invariants(self):
        assert BEAM.k0 * BEAM.lam == pytest.approx(2.0 * math.pi, rel=1e-15)
        with pytest.raises(ValueError):
            BeamParams(sigma=-1.0, lam=780e-9)
        with pytest.raises(ValueError):
            BeamParams(sigma=1.0, lam=0.0)

    def test_geometry_invariants(self):
        Geometry(L=0.02, k=-5.0)  # negative kick allowed
        with pytest.raises(ValueError):
            Geometry(L=0.0, k=1.0)

    def test_operating_point_consistency(self):
        op = OperatingPoint.from_tilt(0.8e-9, GEOM, BEAM)
        assert op.phi == pytest.approx(1.823e-4, rel=1e-3)
        back = OperatingPoint.from_phase(op.phi, GEOM, BEAM)
        assert back.theta == pytest.approx(op.theta, rel=1e-12)
        assert op.k_sigma == pytest.approx(0.2, rel=1e-12)
        with pytest.raises(ValueError):
            OperatingPoint(beam=BEAM, geom=GEOM, theta=1e-9, phi=1.0)
