"""Amplitude-spectral-density estimation for tilt records.

One-sided ASD in rad/sqrt(Hz) from single periodograms or averaged
(Welch-style) segment periodograms, with moving-average display smoothing,
robust noise-floor extraction, sinusoid amplitude recovery, and the
tilt-to-phase rescaling sqrt(2)*k0*L.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import get_window

from .optics import BeamParams, Geometry
from .signals import TimeSeries

__all__ = [
    "SpectrumEstimate",
    "periodogram_asd",
    "averaged_asd",
    "moving_average_smooth",
    "noise_floor",
    "peak_amplitude",
    "phase_scale",
    "write_spectrum_csv",
    "read_spectrum_csv",
]

WINDOWS = ("rectangular", "hann")

MIN_SAMPLES = 16


@dataclass(frozen=True)
class SpectrumEstimate:
    """One-sided ASD on a uniform frequency grid (DC excluded).

    `averages` counts averaged segment periodograms (1 for a plain
    periodogram); `smooth_w` is the moving-average width applied to the ASD
    (1 = none).  `kind` is "tilt" (rad of mirror tilt) or "phase" (rad of
    interferometer phase).
    """

    freqs: np.ndarray
    asd: np.ndarray
    df: float
    fs: float
    window: str
    averages: int = 1
    smooth_w: int = 1
    kind: str = "tilt"

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        asd = np.asarray(self.asd, dtype=float)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "asd", asd)
        if freqs.shape != asd.shape or freqs.ndim != 1:
            raise ValueError("frequency grid and ASD must be 1-d and match")
        if np.any(asd < 0):
            raise ValueError("ASD values must be nonnegative")

    @property
    def psd(self) -> np.ndarray:
        return self.asd ** 2


def _window_values(name, n) -> np.ndarray:
    if name == "rectangular":
        return np.ones(n)
    if name == "hann":
        return get_window("hann", n)
    raise ValueError(f"window must be one of {WINDOWS}, got {name!r}")


def _segment_psd(x, fs, win) -> np.ndarray:
    # One-sided PSD 2|X|^2/(fs * sum w^2); DC and (even-n) Nyquist bins are
    # not doubled, which keeps Parseval exact.
    n = x.size
    spec = np.abs(np.fft.rfft(x * win)) ** 2
    psd = 2.0 * spec / (fs * np.sum(win ** 2))
    psd[0] /= 2.0
    if n % 2 == 0:
        psd[-1] /= 2.0
    return psd


def periodogram_asd(series: TimeSeries, window: str = "rectangular") -> SpectrumEstimate:
    """Single-record one-sided ASD.

    With the rectangular window the one-sided PSD bins (DC excluded)
    satisfy sum(PSD)*df = var(series) exactly.
    """
    n = series.n
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    win = _window_values(window, n)
    psd = _segment_psd(series.samples, series.fs, win)
    df = series.fs / n
    freqs = np.arange(1, psd.size) * df
    return SpectrumEstimate(freqs=freqs, asd=np.sqrt(psd[1:]), df=df,
                            fs=series.fs, window=window)


def averaged_asd(series: TimeSeries, segment_length, overlap: float = 0.5,
                 window: str = "hann") -> SpectrumEstimate:
    """Welch-style estimate: mean of windowed segment PSDs, square-rooted.

    `overlap` is the fractional overlap between consecutive segments.  With
    a single segment this reduces to :func:`periodogram_asd` at the same
    window.
    """
    seg = int(segment_length)
    n = series.n
    if seg < MIN_SAMPLES:
        raise ValueError(f"segment length must be >= {MIN_SAMPLES}, got {seg}")
    if seg > n:
        raise ValueError(f"segment length {seg} exceeds series length {n}")
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    hop = max(1, int(round(seg * (1.0 - overlap))))
    starts = range(0, n - seg + 1, hop)
    win = _window_values(window, seg)
    acc = np.zeros(seg // 2 + 1)
    count = 0
    for s in starts:
        acc += _segment_psd(series.samples[s:s + seg], series.fs, win)
        count += 1
    psd = acc / count
    df = series.fs / seg
    freqs = np.arange(1, psd.size) * df
    return SpectrumEstimate(freqs=freqs, asd=np.sqrt(psd[1:]), df=df,
                            fs=series.fs, window=window, averages=count)


def moving_average_smooth(spectrum: SpectrumEstimate, w: int) -> SpectrumEstimate:
    """Centered moving average of the ASD over w bins (w odd).

    At the ends the window shrinks symmetrically (1, 3, 5, ... points) so
    the output length equals the input length; w = 1 is the identity.  An
    isolated single-bin peak of height h becomes h/w.
    """
    w = int(w)
    if w < 1 or w % 2 == 0:
        raise ValueError(f"smoothing width must be odd and >= 1, got {w}")
    if w == 1:
        return spectrum
    x = spectrum.asd
    n = x.size
    if w > n:
        raise ValueError(f"smoothing width {w} exceeds {n} bins")
    half = w // 2
    y = np.convolve(x, np.ones(w) / w, mode="same")
    for i in range(half):
        y[i] = x[: 2 * i + 1].mean()
        y[n - 1 - i] = x[n - 2 * i - 1:].mean()
    return replace(spectrum, asd=y, smooth_w=spectrum.smooth_w * w)


def _median_bias(averages: int, smooth_w: int) -> float:
    """Center of the per-bin ASD statistic relative to the true ASD.

    Raw periodogram PSD bins are chi^2 with 2 degrees of freedom, so the
    band median of the ASD sits at sqrt(ln 2) ~= 0.8326 of truth; a
    moving-average-smoothed bin is a mean of ASDs centered instead at
    E[sqrt(chi2_2/2)] = sqrt(pi)/2 ~= 0.8862.  Segment-averaged estimates
    are left uncorrected (their residual median bias is O(1/K) and they are
    not raw periodograms).
    """
    if averages > 1:
        return 1.0
    if smooth_w == 1:
        return math.sqrt(math.log(2.0))
    return math.sqrt(math.pi) / 2.0


def noise_floor(spectrum: SpectrumEstimate, f_min, f_max) -> float:
    """Median ASD over the band [f_min, f_max], bias-corrected when raw.

    The median is robust against tones in the band.  For unaveraged
    periodograms the chi^2 median bias (see :func:`_median_bias`) is
    divided out; spectra built from averaged segments are taken as-is.
    """
    if not f_min < f_max:
        raise ValueError(f"need f_min < f_max, got {f_min}, {f_max}")
    mask = (spectrum.freqs >= f_min) & (spectrum.freqs <= f_max)
    n_bins = int(np.count_nonzero(mask))
    if n_bins < 8:
        raise ValueError(
            f"band [{f_min}, {f_max}] Hz contains only {n_bins} bins (need >= 8)"
        )
    return float(np.median(spectrum.asd[mask])
                 / _median_bias(spectrum.averages, spectrum.smooth_w))


def peak_amplitude(spectrum: SpectrumEstimate, f0, half_width_bins: int = 2) -> float:
    """Sinusoid amplitude from the power in bins around f0.

    a_hat = sqrt(2 * (sum of peak-bin PSD - background) * df); exact (up to
    noise) for bin-centered tones under a rectangular window.  The
    background PSD is the median over sideband bins adjacent to the peak
    window and is subtracted bin-for-bin.
    """
    half_width_bins = int(half_width_bins)
    if half_width_bins < 0:
        raise ValueError("half_width_bins must be >= 0")
    freqs = spectrum.freqs
    if not freqs[0] <= f0 <= freqs[-1]:
        raise ValueError(f"f0 = {f0} Hz is outside the grid "
                         f"[{freqs[0]}, {freqs[-1]}] Hz")
    center = int(np.argmin(np.abs(freqs - f0)))
    lo = center - half_width_bins
    hi = center + half_width_bins
    if lo < 0 or hi >= freqs.size:
        raise ValueError("peak window extends beyond the grid")
    psd = spectrum.psd
    peak_power = float(np.sum(psd[lo:hi + 1])) * spectrum.df
    side = np.r_[psd[max(lo - 20, 0):lo], psd[hi + 1:hi + 21]]
    background = float(np.median(side)) if side.size else 0.0
    n_peak = 2 * half_width_bins + 1
    power = max(peak_power - n_peak * background * spectrum.df, 0.0)
    return math.sqrt(2.0 * power)


def phase_scale(spectrum: SpectrumEstimate, geom: Geometry, beam: BeamParams) -> SpectrumEstimate:
    """Rescale a tilt ASD to interferometer-phase units by sqrt(2)*k0*L."""
    factor = math.sqrt(2.0) * beam.k0 * geom.L
    return replace(spectrum, asd=spectrum.asd * factor, kind="phase")


def write_spectrum_csv(path, spectrum: SpectrumEstimate, geom: Geometry,
                       beam: BeamParams) -> None:
    """Write `freq_hz,tilt_asd_rad_rthz,phase_asd_rad_rthz` rows.

    The phase column is the tilt column rescaled by sqrt(2)*k0*L.
    """
    if spectrum.kind != "tilt":
        raise ValueError("spectrum CSV expects a tilt-unit spectrum")
    factor = math.sqrt(2.0) * beam.k0 * geom.L
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# window={spectrum.window}, w={spectrum.smooth_w}, "
                 f"segments={spectrum.averages}\n")
        fh.write(f"# df_hz={spectrum.df!r}, fs_hz={spectrum.fs!r}\n")
        fh.write(f"# phase_scale={factor!r}\n")
        fh.write("freq_hz,tilt_asd_rad_rthz,phase_asd_rad_rthz\n")
        for f, a in zip(spectrum.freqs, spectrum.asd):
            fh.write(f"{float(f)!r},{float(a)!r},{float(a * factor)!r}\n")


def read_spectrum_csv(path) -> SpectrumEstimate:
    """Read a spectrum written by :func:`write_spectrum_csv` (tilt column)."""
    meta = {}
    freqs, asds = [], []
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for item in line[1:].split(","):
                    key, _, val = item.partition("=")
                    if val:
                        meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                if line != "freq_hz,tilt_asd_rad_rthz,phase_asd_rad_rthz":
                    raise ValueError(f"unexpected spectrum header: {line!r}")
                header_seen = True
                continue
            f, a, _ = line.split(",")
            freqs.append(float(f))
            asds.append(float(a))
    if not header_seen:
        raise ValueError(f"{path} is not a spectrum CSV")
    return SpectrumEstimate(
        freqs=np.array(freqs),
        asd=np.array(asds),
        df=float(meta["df_hz"]),
        fs=float(meta["fs_hz"]),
        window=meta.get("window", "rectangular"),
        averages=int(meta.get("segments", 1)),
        smooth_w=int(meta.get("w", 1)),
    )
