"""Simulator and analysis toolkit for an inverse-weak-value Sagnac tilt meter.

Closed-form dark-port optics, the equivalent qubit-meter weak-measurement
description, photon-counting Monte Carlo of split detection, time-domain
signal synthesis, and amplitude-spectral-density estimation, each
cross-validated against the others.
"""

from .optics import (
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
from .quantum import (
    MeterState,
    OrthogonalSelectionError,
    QubitSelection,
    RegimeReport,
    meter_pdf,
    postselection_probability,
    postselection_probability_exact,
    quantum_mean_shift,
    regime_classify,
    weak_value,
    weak_value_from_states,
    wva_predictions,
)
from .montecarlo import (
    MonteCarloConfig,
    MonteCarloReport,
    collinear_penalty,
    estimate_phase,
    estimate_tilt,
    photons_per_second,
    run_trials,
    sample_darkport_positions,
    shot_noise_phase,
    shot_noise_tilt,
    split_detector_asymmetry,
)
from .signals import (
    FilterSpec,
    NoiseSpec,
    TimeSeries,
    apply_filter,
    colored_noise,
    simulate_detector_series,
    sine_tilt,
)
from .spectra import (
    SpectrumEstimate,
    averaged_asd,
    moving_average_smooth,
    noise_floor,
    peak_amplitude,
    periodogram_asd,
    phase_scale,
)

__version__ = "0.1.0"
