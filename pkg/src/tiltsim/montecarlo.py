"""Photon-counting Monte Carlo of split detection at the dark port.

Each trial sends a fixed number of photons into the interferometer; a
photon survives post-selection with the exact dark-port probability P and
lands at a transverse position drawn from the normalized dark-port density.
The split detector only records which half it hit, giving the asymmetry
A = (N+ - N-) / N_detected, which is inverted to a phase estimate.

Calibration of the inversion (bimodal density, phi << k*sigma << 1):

    E[A] = 4 phi / (sqrt(2 pi) k sigma)   so   phi_hat = sqrt(2 pi) k sigma A / 4.

Each detected photon contributes +-1 with unit variance, so per trial

    std(phi_hat) = (sqrt(2 pi)/4) k sigma / sqrt(M_det),   M_det = N (k sigma/2)^2
                 = sqrt(pi/2) / sqrt(N),

independent of k and sigma: the misalignment amplifies the shift by exactly
as much as it costs in detected photons.  sqrt(pi/2) is the usual
split-detection penalty over an ideal mean estimator; the same constant
emerges here for the bimodal density.

All randomness comes from the counter-based Philox PRNG with the 128-bit
key (seed, trial index), so trials are independent substreams that can be
evaluated in any order and reproduce bit-exactly for a given seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .optics import (
    BeamParams,
    DarkPortError,
    Geometry,
    OperatingPoint,
    _require_finite,
    tilt_from_phase,
)
from .quantum import postselection_probability_exact

__all__ = [
    "PLANCK_CONSTANT",
    "SPEED_OF_LIGHT",
    "MonteCarloConfig",
    "MonteCarloReport",
    "photons_per_second",
    "trial_rng",
    "sample_darkport_positions",
    "split_detector_asymmetry",
    "estimate_phase",
    "estimate_tilt",
    "shot_noise_phase",
    "shot_noise_tilt",
    "collinear_penalty",
    "run_trials",
    "write_report_csv",
    "read_report_csv",
]

# CODATA / SI exact values
PLANCK_CONSTANT = 6.62607015e-34  # J s
SPEED_OF_LIGHT = 299792458.0  # m / s

# Abort rejection sampling if it consumes more than this many proposals per
# requested draw (would indicate a nearly dark port).
MAX_PROPOSALS_PER_DRAW = 10_000

_CHUNK_LIMIT = 1 << 22  # proposals per vectorized batch, bounds memory


def photons_per_second(optical_power, lam) -> float:
    """Photon rate P*lam/(h*c) of a monochromatic beam of power P watts."""
    _require_finite(optical_power=optical_power, lam=lam)
    if optical_power < 0:
        raise ValueError(f"optical power must be >= 0, got {optical_power}")
    if lam <= 0:
        raise ValueError(f"wavelength must be positive, got {lam}")
    return optical_power * lam / (PLANCK_CONSTANT * SPEED_OF_LIGHT)


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Philox generator for one trial substream.

    The 128-bit Philox key holds (seed, trial) in its two 64-bit words, so
    substreams are independent across trials of one run and across runs
    with different seeds.
    """
    key = ((seed & (2**64 - 1)) << 64) | (trial & (2**64 - 1))
    return np.random.Generator(np.random.Philox(key=key))


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return trial_rng(int(seed_or_rng))


def sample_darkport_positions(n, phi, k, sigma, seed) -> np.ndarray:
    """Draw n positions from the normalized dark-port density.

    Rejection sampling against the Gaussian envelope 4*exp(-z^2/2 sigma^2),
    which bounds the intensity everywhere; a proposal z ~ N(0, sigma) is
    accepted with probability sin^2((phi + k z)/2).  `seed` may be an int or
    a numpy Generator.  Deterministic for a given seed.
    """
    _require_finite(phi=phi, k=k, sigma=sigma)
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one draw, got n={n}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    acceptance = 0.5 * postselection_probability_exact(phi, k, sigma)
    if acceptance <= 0.0:
        raise DarkPortError(
            "degenerate dark port (phi = 0 mod 2*pi and k = 0): the density "
            "vanishes identically"
        )
    rng = _as_rng(seed)
    out = np.empty(n, dtype=float)
    filled = 0
    proposals = 0
    budget = MAX_PROPOSALS_PER_DRAW * n
    while filled < n:
        want = n - filled
        # enough proposals to finish in one pass with ~4 sigma to spare
        batch = int((want + 4.0 * math.sqrt(want) + 16.0) / acceptance)
        batch = min(batch, _CHUNK_LIMIT)
        z = rng.standard_normal(batch) * sigma
        u = rng.random(batch)
        # u < sin^2((phi + k z)/2), written via the half-angle identity
        accepted = z[np.cos(phi + k * z) < 1.0 - 2.0 * u]
        take = min(accepted.size, want)
        out[filled:filled + take] = accepted[:take]
        filled += take
        proposals += batch
        if filled < n and proposals >= budget:
            raise RuntimeError(
                f"rejection sampling exhausted {proposals} proposals for "
                f"{n} draws (acceptance ~ {acceptance:.3g})"
            )
    return out


def split_detector_asymmetry(positions) -> float:
    """Split-detector asymmetry A = (N+ - N-)/N of a set of positions.

    z = 0 counts to the upper half (a measure-zero tie under the continuous
    density).  A is in [-1, 1].
    """
    positions = np.asarray(positions)
    if positions.size == 0:
        raise ValueError("split_detector_asymmetry needs at least one position")
    n_plus = int(np.count_nonzero(positions >= 0.0))
    return (2.0 * n_plus - positions.size) / positions.size


def estimate_phase(asymmetry, k, sigma) -> float:
    """Phase estimate phi_hat = sqrt(2 pi) k sigma A / 4.

    Small-signal inverse of E[A] = 4 phi/(sqrt(2 pi) k sigma); equivalent to
    reading the mean through z_hat = sqrt(pi/2) sigma A and phi_hat =
    k z_hat / 2.  Warns outside the linear range |A| <= 0.3.
    """
    _require_finite(asymmetry=asymmetry, k=k, sigma=sigma)
    if abs(asymmetry) > 0.3:
        import warnings

        warnings.warn(
            f"|A| = {abs(asymmetry):.3g} is outside the linear inversion "
            "range (|A| <= 0.3); the estimate is biased",
            stacklevel=2,
        )
    return math.sqrt(2.0 * math.pi) / 4.0 * k * sigma * asymmetry


def estimate_tilt(asymmetry, geom: Geometry, beam: BeamParams) -> float:
    """Tilt estimate from a split-detector asymmetry."""
    phi_hat = estimate_phase(asymmetry, geom.k, beam.sigma)
    return tilt_from_phase(phi_hat, geom, beam)


def shot_noise_phase(n_photons) -> float:
    """Split-detection phase noise sqrt(pi/2)/sqrt(N) for N photons sent.

    Independent of k and sigma (see module docstring for the derivation);
    per second of integration N is the input photon rate and the value is a
    spectral density in rad/sqrt(Hz).
    """
    if n_photons < 1:
        raise ValueError(f"need at least one photon, got {n_photons}")
    return math.sqrt(math.pi / 2.0) / math.sqrt(n_photons)


def shot_noise_tilt(photon_rate, lam, L) -> float:
    """Tilt-equivalent shot noise lam/(4 sqrt(pi) L sqrt(N)) in rad/sqrt(Hz).

    N is the photon rate entering the interferometer per second.
    """
    _require_finite(photon_rate=photon_rate, lam=lam, L=L)
    if photon_rate <= 0 or lam <= 0 or L <= 0:
        raise ValueError("photon_rate, lam and L must all be positive")
    return lam / (4.0 * math.sqrt(math.pi) * L * math.sqrt(photon_rate))


def collinear_penalty(sigma, L) -> float:
    """Shot-noise ratio sqrt(2) sigma / L of this layout vs a collinear one.

    Below 1 means the separated-path layout wins; equals 1 when the path
    separation matches the beam size (sigma = L/sqrt(2)).
    """
    _require_finite(sigma=sigma, L=L)
    if sigma <= 0 or L <= 0:
        raise ValueError("sigma and L must be positive")
    return math.sqrt(2.0) * sigma / L


@dataclass(frozen=True)
class MonteCarloConfig:
    """One Monte Carlo run: operating point, photon budget, trials, seed.

    photons_per_trial counts photons sent into the interferometer per
    trial; the detected number fluctuates binomially with the dark-port
    probability.
    """

    op: OperatingPoint
    photons_per_trial: int
    trials: int
    seed: int

    def __post_init__(self):
        if self.photons_per_trial < 1:
            raise ValueError(
                f"photons_per_trial must be >= 1, got {self.photons_per_trial}"
            )
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class MonteCarloReport:
    """Per-trial estimates plus theory comparison for one config."""

    config: MonteCarloConfig
    phi_hat: np.ndarray
    theta_hat: np.ndarray
    detected: np.ndarray
    theory_phase_noise: float = field(init=False, default=0.0)

    def __post_init__(self):
        object.__setattr__(
            self, "theory_phase_noise",
            shot_noise_phase(self.config.photons_per_trial),
        )

    @property
    def phi_mean(self) -> float:
        return float(np.mean(self.phi_hat))

    @property
    def phi_std(self) -> float:
        return float(np.std(self.phi_hat, ddof=1))

    @property
    def noise_ratio(self) -> float:
        """Empirical std(phi_hat) over the closed-form shot noise."""
        return self.phi_std / self.theory_phase_noise

    def summary(self) -> str:
        cfg = self.config
        lines = [
            f"trials             : {cfg.trials}",
            f"photons per trial  : {cfg.photons_per_trial}",
            f"seed               : {cfg.seed}",
            f"phi (true)         : {cfg.op.phi!r} rad",
            f"k*sigma            : {cfg.op.k_sigma!r}",
            f"mean detected/trial: {float(np.mean(self.detected))!r}",
            f"mean phi_hat       : {self.phi_mean!r} rad",
            f"std phi_hat        : {self.phi_std!r} rad",
            f"shot-noise theory  : {self.theory_phase_noise!r} rad",
            f"empirical/theory   : {self.noise_ratio!r}",
        ]
        return "\n".join(lines)


def run_trials(config: MonteCarloConfig) -> MonteCarloReport:
    """Run the configured trials and collect phase/tilt estimates.

    Trial t uses the Philox substream keyed seed XOR t, so results do not
    depend on evaluation order.  A trial with zero detected photons (only
    possible at tiny photon budgets) records phi_hat = 0.
    """
    op = config.op
    k = op.geom.k
    sigma = op.beam.sigma
    prob = postselection_probability_exact(op.phi, k, sigma)
    if prob <= 0.0:
        raise DarkPortError("degenerate dark port: no photons are detected")
    phi_hat = np.empty(config.trials, dtype=float)
    detected = np.empty(config.trials, dtype=np.int64)
    for t in range(config.trials):
        rng = trial_rng(config.seed, t)
        n_det = int(rng.binomial(config.photons_per_trial, prob))
        detected[t] = n_det
        if n_det == 0:
            phi_hat[t] = 0.0
            continue
        positions = sample_darkport_positions(n_det, op.phi, k, sigma, rng)
        asym = split_detector_asymmetry(positions)
        phi_hat[t] = math.sqrt(2.0 * math.pi) / 4.0 * k * sigma * asym
    theta_hat = phi_hat / (math.sqrt(2.0) * op.beam.k0 * op.geom.L)
    return MonteCarloReport(
        config=config, phi_hat=phi_hat, theta_hat=theta_hat, detected=detected
    )


def write_report_csv(path, report: MonteCarloReport) -> None:
    """Write per-trial estimates as CSV: trial,phi_hat,theta_hat."""
    cfg = report.config
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# photons_per_trial={cfg.photons_per_trial}, "
                 f"trials={cfg.trials}, seed={cfg.seed}\n")
        fh.write(f"# phi={cfg.op.phi!r}, k_sigma={cfg.op.k_sigma!r}\n")
        fh.write("trial,phi_hat,theta_hat\n")
        for t in range(cfg.trials):
            fh.write(f"{t},{float(report.phi_hat[t])!r},"
                     f"{float(report.theta_hat[t])!r}\n")


def read_report_csv(path):
    """Read a report CSV back as (trial, phi_hat, theta_hat) arrays."""
    trials, phis, thetas = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != "trial,phi_hat,theta_hat":
                    raise ValueError(f"unexpected report header: {line!r}")
                header_seen = True
                continue
            t, p, th = line.split(",")
            trials.append(int(t))
            phis.append(float(p))
            thetas.append(float(th))
    if not header_seen:
        raise ValueError(f"{path} is not a trial report CSV")
    return np.array(trials), np.array(phis), np.array(thetas)
