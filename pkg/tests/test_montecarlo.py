import math

import numpy as np
import pytest
from scipy.integrate import quad

from tiltsim.montecarlo import (
    MonteCarloConfig,
    MonteCarloReport,
    collinear_penalty,
    estimate_phase,
    estimate_tilt,
    photons_per_second,
    read_report_csv,
    run_trials,
    sample_darkport_positions,
    shot_noise_phase,
    shot_noise_tilt,
    split_detector_asymmetry,
    trial_rng,
    write_report_csv,
)
from tiltsim.optics import BeamParams, DarkPortError, Geometry, OperatingPoint

from test_optics import oracle_intensity, oracle_mean_shift

BEAM = BeamParams(sigma=0.25e-3, lam=780e-9)


def op_at(phi, ksigma):
    geom = Geometry(L=0.02, k=ksigma / BEAM.sigma)
    return OperatingPoint.from_phase(phi, geom, BEAM)


def oracle_asymmetry(phi, ksigma):
    """Sign asymmetry of the dark-port density by quadrature."""
    upper, _ = quad(lambda z: oracle_intensity(z, phi, ksigma, 1.0), 0, 8,
                    epsabs=1e-16, epsrel=1e-13, limit=400)
    lower, _ = quad(lambda z: oracle_intensity(z, phi, ksigma, 1.0), -8, 0,
                    epsabs=1e-16, epsrel=1e-13, limit=400)
    return (upper - lower) / (upper + lower)


class TestPhotonsPerSecond:
    def test_zero_power(self):
        assert photons_per_second(0.0, 780e-9) == 0.0

    def test_reference_rate(self):
        # 1.2e-3 * 780e-9 / (6.62607015e-34 * 2.99792458e8)
        got = photons_per_second(1.2e-3, 780e-9)
        assert got == pytest.approx(4.711933107219976e15, rel=1e-12)
        assert got == pytest.approx(4.71e15, rel=1e-3)

    def test_linear_in_power(self):
        assert photons_per_second(2.4e-3, 780e-9) == pytest.approx(
            2.0 * photons_per_second(1.2e-3, 780e-9), rel=1e-14)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            photons_per_second(-1.0, 780e-9)


class TestTrialRng:
    def test_deterministic(self):
        a = trial_rng(123, 7).standard_normal(5)
        b = trial_rng(123, 7).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_seeds_give_distinct_streams(self):
        a = trial_rng(1, 0).standard_normal(8)
        b = trial_rng(2, 0).standard_normal(8)
        c = trial_rng(1, 1).standard_normal(8)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestSampling:
    def test_symmetric_at_zero_phase(self):
        m = 1_000_000
        z = sample_darkport_positions(m, 0.0, 0.2, 1.0, seed=11)
        bound = 5.0 * z.std() / math.sqrt(m)
        assert abs(z.mean()) < bound

    def test_mean_matches_quadrature(self):
        m = 1_000_000
        z = sample_darkport_positions(m, 0.05, 0.2, 1.0, seed=12)
        want = oracle_mean_shift(0.05, 0.2, 1.0)
        assert want == pytest.approx(0.46598, abs=1e-5)
        se = z.std() / math.sqrt(m)
        assert abs(z.mean() - want) < 3.0 * se

    def test_empirical_cdf_matches_quadrature(self):
        m = 100_000
        z = np.sort(sample_darkport_positions(m, 0.05, 0.2, 1.0, seed=13))
        grid = np.linspace(-8.0, 8.0, 20001)
        density = oracle_intensity(grid, 0.05, 0.2, 1.0)
        cdf = np.concatenate([[0.0], np.cumsum(
            (density[1:] + density[:-1]) / 2.0 * np.diff(grid))])
        cdf /= cdf[-1]
        f_at = np.interp(z, grid, cdf)
        emp_hi = np.arange(1, m + 1) / m
        emp_lo = np.arange(0, m) / m
        ks = max(np.max(np.abs(emp_hi - f_at)), np.max(np.abs(f_at - emp_lo)))
        assert ks < 2.0 / math.sqrt(m)

    def test_deterministic(self):
        a = sample_darkport_positions(500, 0.05, 0.2, 1.0, seed=3)
        b = sample_darkport_positions(500, 0.05, 0.2, 1.0, seed=3)
        np.testing.assert_array_equal(a, b)

    def test_degenerate_dark_port(self):
        with pytest.raises(DarkPortError):
            sample_darkport_positions(10, 0.0, 0.0, 1.0, seed=1)

    def test_rejection_budget_exhausted(self):
        with pytest.raises(RuntimeError):
            sample_darkport_positions(1, 1e-10, 1e-10, 1.0, seed=1)


class TestSplitDetector:
    def test_all_positive(self):
        assert split_detector_asymmetry([0.5, 1.0, 2.0]) == 1.0

    def test_zero_counts_up(self):
        assert split_detector_asymmetry([0.0]) == 1.0

    def test_balanced(self):
        assert split_detector_asymmetry([-1.0, 1.0, -2.0, 2.0]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            split_detector_asymmetry([])

    def test_small_signal_expectation(self):
        # E[A] ~= 4 phi/(sqrt(2 pi) k sigma) = 7.98e-3 at phi=1e-3, ks=0.2
        want = oracle_asymmetry(1e-3, 0.2)
        assert want == pytest.approx(7.98e-3, abs=5e-5)
        m = 1_000_000
        z = sample_darkport_positions(m, 1e-3, 0.2, 1.0, seed=21)
        got = split_detector_asymmetry(z)
        assert abs(got - want) < 3.0 / math.sqrt(m)


class TestEstimatePhase:
    def test_zero(self):
        assert estimate_phase(0.0, 0.2, 1.0) == 0.0

    def test_inverts_expected_asymmetry(self):
        assert estimate_phase(7.98e-3, 0.2, 1.0) == pytest.approx(1.0e-3, rel=2e-3)

    def test_quadrature_bias_in_linear_regime(self):
        # estimator bias at (phi=1e-3, k sigma=0.2) is the calibration gap
        phi_hat = estimate_phase(oracle_asymmetry(1e-3, 0.2), 0.2, 1.0)
        assert abs(phi_hat - 1e-3) / 1e-3 < 0.02

    def test_tilt_round_trip(self):
        geom = Geometry(L=0.02, k=0.2 / BEAM.sigma)
        phi = 1.823e-4
        asym = 4.0 * phi / (math.sqrt(2.0 * math.pi) * 0.2)
        theta = estimate_tilt(asym, geom, BEAM)
        assert theta == pytest.approx(0.8e-9, rel=2e-3)

    def test_warns_outside_linear_range(self):
        with pytest.warns(UserWarning):
            estimate_phase(0.5, 0.2, 1.0)


class TestShotNoiseFormulas:
    def test_phase_noise_value(self):
        assert shot_noise_phase(1_000_000) == pytest.approx(
            math.sqrt(math.pi / 2.0) / 1000.0, rel=1e-14)
        assert shot_noise_phase(1_000_000) == pytest.approx(1.2533e-3, rel=1e-4)

    def test_phase_noise_scaling(self):
        assert shot_noise_phase(4_000_000) == pytest.approx(
            shot_noise_phase(1_000_000) / 2.0, rel=1e-12)

    def test_phase_noise_at_reference_rate(self):
        got = shot_noise_phase(photons_per_second(1.2e-3, 780e-9))
        assert got == pytest.approx(1.83e-8, rel=2e-3)
        # quoted reference is 13 nrad/sqrt(Hz); the closed form sits ~sqrt(2) higher
        assert got / 13e-9 == pytest.approx(math.sqrt(2.0), rel=0.01)

    def test_tilt_noise_value(self):
        got = shot_noise_tilt(4.711933107219976e15, 780e-9, 0.02)
        assert got == pytest.approx(8.013645399357993e-14, rel=1e-12)
        assert got == pytest.approx(8.0e-14, rel=2e-3)

    def test_tilt_noise_scaling(self):
        base = shot_noise_tilt(1e15, 780e-9, 0.02)
        assert shot_noise_tilt(4e15, 780e-9, 0.02) == pytest.approx(base / 2.0, rel=1e-12)

    def test_positivity_required(self):
        with pytest.raises(ValueError):
            shot_noise_tilt(0.0, 780e-9, 0.02)
        with pytest.raises(ValueError):
            shot_noise_phase(0)

    def test_collinear_penalty(self):
        assert collinear_penalty(0.25e-3, 0.02) == pytest.approx(0.0177, abs=1e-4)
        assert collinear_penalty(0.02 / math.sqrt(2.0), 0.02) == pytest.approx(1.0, rel=1e-12)
        assert collinear_penalty(0.125e-3, 0.02) == pytest.approx(
            collinear_penalty(0.25e-3, 0.02) / 2.0, rel=1e-12)


class TestRunTrials:
    def test_deterministic(self):
        cfg = MonteCarloConfig(op=op_at(1e-3, 0.2), photons_per_trial=2000,
                               trials=5, seed=77)
        a = run_trials(cfg)
        b = run_trials(cfg)
        np.testing.assert_array_equal(a.phi_hat, b.phi_hat)
        np.testing.assert_array_equal(a.theta_hat, b.theta_hat)
        np.testing.assert_array_equal(a.detected, b.detected)

    def test_unbiased_at_null(self):
        cfg = MonteCarloConfig(op=op_at(0.0, 0.2), photons_per_trial=50_000,
                               trials=100, seed=31)
        rep = run_trials(cfg)
        assert abs(rep.phi_mean) < 3.0 * rep.phi_std / math.sqrt(cfg.trials)

    def test_variance_matches_closed_form(self):
        cfg = MonteCarloConfig(op=op_at(1e-3, 0.2), photons_per_trial=200_000,
                               trials=60, seed=5)
        rep = run_trials(cfg)
        assert 0.85 < rep.noise_ratio < 1.15
        se = rep.phi_std / math.sqrt(cfg.trials)
        assert abs(rep.phi_mean - 1e-3) < 3.5 * se

    def test_zero_detection_trials(self):
        cfg = MonteCarloConfig(op=op_at(1e-3, 0.2), photons_per_trial=1,
                               trials=10, seed=9)
        rep = run_trials(cfg)
        assert np.all(np.isfinite(rep.phi_hat))
        assert np.any(rep.detected == 0)
        assert np.all(rep.phi_hat[rep.detected == 0] == 0.0)

    def test_degenerate_dark_port(self):
        cfg = MonteCarloConfig(op=op_at(0.0, 0.0), photons_per_trial=100,
                               trials=2, seed=1)
        with pytest.raises(DarkPortError):
            run_trials(cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MonteCarloConfig(op=op_at(1e-3, 0.2), photons_per_trial=0,
                             trials=1, seed=0)
        with pytest.raises(ValueError):
            MonteCarloConfig(op=op_at(1e-3, 0.2), photons_per_trial=10,
                             trials=0, seed=0)

    def test_report_csv_round_trip(self, tmp_path):
        cfg = MonteCarloConfig(op=op_at(1e-3, 0.2), photons_per_trial=5000,
                               trials=8, seed=14)
        rep = run_trials(cfg)
        path = tmp_path / "report.csv"
        write_report_csv(path, rep)
        trials, phis, thetas = read_report_csv(path)
        np.testing.assert_array_equal(trials, np.arange(8))
        np.testing.assert_array_equal(phis, rep.phi_hat)
        np.testing.assert_array_equal(thetas, rep.theta_hat)

    def test_summary_mentions_ratio(self):
        cfg = MonteCarloConfig(op=op_at(1e-3, 0.2), photons_per_trial=5000,
                               trials=8, seed=14)
        text = run_trials(cfg).summary()
        assert "empirical/theory" in text
        assert "seed" in text
