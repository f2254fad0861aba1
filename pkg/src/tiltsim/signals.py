"""Time-domain synthesis of the tilt meter's detector record.

Builds tilt waveforms, colored tilt-equivalent noise with a configurable
piecewise power-law spectral density, per-sample shot noise at the detector,
and the first-order band-pass filter/gain chain of the readout electronics.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter, lfilter_zi

from .montecarlo import shot_noise_tilt, trial_rng
from .optics import OperatingPoint, phase_from_tilt
from .quantum import postselection_probability_exact

__all__ = [
    "NoiseSpec",
    "TimeSeries",
    "FilterSpec",
    "sine_tilt",
    "colored_noise",
    "simulate_detector_series",
    "apply_filter",
    "filter_sections",
    "write_timeseries_csv",
    "read_timeseries_csv",
]

# Detected photons per sample below which the Gaussian shot-noise model is
# refused (use the photon-counting Monte Carlo instead).
MIN_PHOTONS_PER_SAMPLE = 100

# Linear-regime guard: warn when the instantaneous phase exceeds this
# fraction of k*sigma.
LINEAR_PHASE_FRACTION = 0.1


@dataclass(frozen=True)
class NoiseSpec:
    """One-sided tilt-equivalent amplitude spectral density, in rad/sqrt(Hz).

    Anchor points (frequency, ASD) define a piecewise power law: log-log
    linear interpolation between anchors, flat extrapolation beyond the
    ends.  A single anchor is a white floor; :meth:`white` builds one.  The
    degenerate all-zero spec (silent) is allowed so noiseless synthesis has
    a natural spelling.
    """

    anchors: tuple

    def __post_init__(self):
        anchors = tuple((float(f), float(a)) for f, a in self.anchors)
        object.__setattr__(self, "anchors", anchors)
        if not anchors:
            raise ValueError("NoiseSpec needs at least one anchor")
        freqs = [f for f, _ in anchors]
        asds = [a for _, a in anchors]
        if any(f <= 0 or not math.isfinite(f) for f in freqs):
            raise ValueError(f"anchor frequencies must be positive, got {freqs}")
        if any(f2 <= f1 for f1, f2 in zip(freqs, freqs[1:])):
            raise ValueError(f"anchor frequencies must be strictly increasing: {freqs}")
        if any(a < 0 or not math.isfinite(a) for a in asds):
            raise ValueError(f"ASD values must be >= 0, got {asds}")
        if any(a == 0 for a in asds) and any(a > 0 for a in asds):
            raise ValueError("zero ASD anchors cannot mix with positive ones")

    @classmethod
    def white(cls, asd: float) -> "NoiseSpec":
        """Flat spectrum at the given ASD (the anchor frequency is moot)."""
        return cls(anchors=((1.0, asd),))

    @property
    def silent(self) -> bool:
        return all(a == 0 for _, a in self.anchors)

    def asd_at(self, freqs) -> np.ndarray:
        """Evaluate the ASD on an array of frequencies (Hz)."""
        freqs = np.asarray(freqs, dtype=float)
        if self.silent:
            return np.zeros_like(freqs)
        fk = np.array([f for f, _ in self.anchors])
        ak = np.array([a for _, a in self.anchors])
        # log-log interpolation; np.interp clamps at the ends, which is the
        # flat extrapolation we want.  f <= 0 maps to the first anchor.
        safe = np.where(freqs > 0, freqs, fk[0])
        out = np.exp(np.interp(np.log(safe), np.log(fk), np.log(ak)))
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled record with rate and seed provenance.

    samples are tilt-equivalent radians unless `unit` says otherwise.
    """

    samples: np.ndarray
    fs: float
    t0: float = 0.0
    seed: int | None = None
    unit: str = "rad"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("a time series needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("time series samples must be finite")
        if not (math.isfinite(self.fs) and self.fs > 0):
            raise ValueError(f"sample rate must be positive, got {self.fs}")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n / self.fs

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n) / self.fs


@dataclass(frozen=True)
class FilterSpec:
    """First-order band-pass: optional high-pass corner, optional low-pass
    corner, overall linear gain.  Corners are checked against Nyquist when
    the filter is applied."""

    f_low: float | None = None
    f_high: float | None = None
    gain: float = 1.0

    def __post_init__(self):
        if self.f_low is not None and self.f_low <= 0:
            raise ValueError(f"high-pass corner must be positive, got {self.f_low}")
        if self.f_high is not None and self.f_high <= 0:
            raise ValueError(f"low-pass corner must be positive, got {self.f_high}")
        if (self.f_low is not None and self.f_high is not None
                and not self.f_low < self.f_high):
            raise ValueError(
                f"corners must satisfy f_low < f_high, got {self.f_low}, {self.f_high}"
            )
        if not self.gain > 0:
            raise ValueError(f"gain must be positive, got {self.gain}")


def sine_tilt(amplitude, frequency, fs, duration, t0: float = 0.0) -> TimeSeries:
    """Sinusoidal tilt a*sin(2 pi f t); peak-to-peak is 2a."""
    if not frequency < fs / 2:
        raise ValueError(
            f"tone at {frequency} Hz aliases at sample rate {fs} Hz"
        )
    if frequency < 0:
        raise ValueError(f"frequency must be >= 0, got {frequency}")
    n = int(round(duration * fs))
    if n < 2:
        raise ValueError(f"duration {duration} s gives fewer than 2 samples")
    t = t0 + np.arange(n) / fs
    return TimeSeries(samples=amplitude * np.sin(2.0 * math.pi * frequency * t),
                      fs=fs, t0=t0)


def colored_noise(spec: NoiseSpec, n, fs, seed) -> TimeSeries:
    """Gaussian noise with one-sided PSD ASD(f)^2 shaped by `spec`.

    Frequency-domain synthesis: white Gaussian noise is transformed, each
    positive-frequency bin (an independent circular-Gaussian coefficient) is
    scaled so its expected one-sided PSD equals ASD(f)^2, and the result is
    transformed back to a real series.  The DC bin is zeroed.
    """
    n = int(n)
    if n < 16:
        raise ValueError(f"need n >= 16 samples, got {n}")
    if not fs > 0:
        raise ValueError(f"sample rate must be positive, got {fs}")
    rng = trial_rng(int(seed))
    white = rng.standard_normal(n)
    weights = spec.asd_at(np.fft.rfftfreq(n, 1.0 / fs)) * math.sqrt(fs / 2.0)
    weights[0] = 0.0
    samples = np.fft.irfft(np.fft.rfft(white) * weights, n)
    return TimeSeries(samples=samples, fs=fs, seed=int(seed))


def simulate_detector_series(tilt: TimeSeries, op: OperatingPoint,
                             photon_rate, seed) -> TimeSeries:
    """Detector output: the tilt record plus per-sample shot noise.

    The photon-counting estimator is approximated as Gaussian with
    tilt-equivalent ASD lam/(4 sqrt(pi) L sqrt(N)), i.e. per-sample standard
    deviation ASD*sqrt(fs/2).  Valid when many photons land in each sample;
    refuses below MIN_PHOTONS_PER_SAMPLE detected per sample (use the
    photon-counting Monte Carlo for exact statistics there).  photon_rate =
    inf is the noiseless limit and returns the input samples unchanged.
    """
    if not photon_rate > 0:
        raise ValueError(f"photon rate must be positive, got {photon_rate}")
    peak_phi = float(np.max(np.abs(
        phase_from_tilt(tilt.samples, op.geom, op.beam))))
    if peak_phi > LINEAR_PHASE_FRACTION * abs(op.k_sigma):
        warnings.warn(
            f"peak |phi| = {peak_phi:.3g} is not small against k*sigma = "
            f"{op.k_sigma:.3g}; the linear detector model is strained",
            stacklevel=2,
        )
    if math.isinf(photon_rate):
        return TimeSeries(samples=tilt.samples.copy(), fs=tilt.fs, t0=tilt.t0,
                          seed=int(seed), unit="rad")
    prob = postselection_probability_exact(op.phi, op.geom.k, op.beam.sigma)
    per_sample = photon_rate * prob / tilt.fs
    if per_sample < MIN_PHOTONS_PER_SAMPLE:
        raise ValueError(
            f"only {per_sample:.3g} detected photons per sample; the Gaussian "
            "shot-noise model needs >= 100 - use tiltsim.montecarlo for "
            "exact photon counting"
        )
    std = shot_noise_tilt(photon_rate, op.beam.lam, op.geom.L) * math.sqrt(tilt.fs / 2.0)
    rng = trial_rng(int(seed))
    noise = rng.standard_normal(tilt.n) * std
    return TimeSeries(samples=tilt.samples + noise, fs=tilt.fs, t0=tilt.t0,
                      seed=int(seed), unit="rad")


def _prewarped_alpha(corner, fs) -> float:
    # bilinear transform with frequency prewarping pins the corner exactly
    return math.tan(math.pi * corner / fs)


def filter_sections(filt: FilterSpec, fs):
    """First-order digital sections (b, a) for the spec at sample rate fs."""
    sections = []
    for corner, kind in ((filt.f_low, "highpass"), (filt.f_high, "lowpass")):
        if corner is None:
            continue
        if not corner < fs / 2:
            raise ValueError(
                f"{kind} corner {corner} Hz is at or above Nyquist ({fs / 2} Hz)"
            )
        alpha = _prewarped_alpha(corner, fs)
        a = np.array([1.0, (alpha - 1.0) / (alpha + 1.0)])
        if kind == "highpass":
            b = np.array([1.0, -1.0]) / (1.0 + alpha)
        else:
            b = np.array([alpha, alpha]) / (1.0 + alpha)
        sections.append((b, a))
    return sections


def apply_filter(series: TimeSeries, filt: FilterSpec) -> TimeSeries:
    """Run the series through the first-order sections and apply the gain.

    Each section starts from the steady state of the first sample's DC
    level, suppressing startup transients on offset data.
    """
    x = series.samples
    for b, a in filter_sections(filt, series.fs):
        zi = lfilter_zi(b, a) * x[0]
        x, _ = lfilter(b, a, x, zi=zi)
    return replace(series, samples=x * filt.gain)


def write_timeseries_csv(path, series: TimeSeries, spec: NoiseSpec | None = None) -> None:
    """Write `time_s,tilt_rad` rows with commented metadata lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# fs_hz={series.fs!r}\n")
        fh.write(f"# t0_s={series.t0!r}\n")
        fh.write(f"# seed={series.seed if series.seed is not None else 'none'}\n")
        fh.write(f"# unit={series.unit}\n")
        if spec is not None:
            pairs = ";".join(f"{f!r}:{a!r}" for f, a in spec.anchors)
            fh.write(f"# noise_anchors={pairs}\n")
        fh.write("time_s,tilt_rad\n")
        for t, v in zip(series.times, series.samples):
            fh.write(f"{float(t)!r},{float(v)!r}\n")


def read_timeseries_csv(path) -> TimeSeries:
    """Read a series written by :func:`write_timeseries_csv`."""
    meta = {}
    times, values = [], []
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                if line != "time_s,tilt_rad":
                    raise ValueError(f"unexpected time-series header: {line!r}")
                header_seen = True
                continue
            t, v = line.split(",")
            times.append(float(t))
            values.append(float(v))
    if not header_seen:
        raise ValueError(f"{path} is not a time-series CSV")
    seed = meta.get("seed", "none")
    return TimeSeries(
        samples=np.array(values),
        fs=float(meta["fs_hz"]),
        t0=float(meta.get("t0_s", times[0] if times else 0.0)),
        seed=None if seed == "none" else int(seed),
        unit=meta.get("unit", "rad"),
    )
