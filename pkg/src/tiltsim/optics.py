"""Closed-form optics of the misaligned Sagnac dark port.

A mirror tilt theta maps linearly onto the relative phase between the two
counter-propagating beams, phi = sqrt(2)*k0*L*theta.  A small transverse
misalignment kick k turns the dark port into a two-lobe ("bimodal") fringe
pattern whose transverse intensity is

    I_out(z) = 4 sin^2((phi + k z)/2) exp(-z^2 / 2 sigma^2)

up to an overall constant that cancels in every observable (all quantities
of interest are ratios).  The mean of this distribution,

    <z> = k sigma^2 sin(phi) / (exp(k^2 sigma^2 / 2) - cos(phi)) ~= 2 phi / k,

amplifies the phase: the smaller the misalignment k, the larger the shift.

Sign convention (fixed here, arbitrary physically): positive tilt gives
positive phase gives positive mean shift.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BeamParams",
    "Geometry",
    "OperatingPoint",
    "DarkPortError",
    "phase_from_tilt",
    "tilt_from_phase",
    "darkport_intensity",
    "darkport_power",
    "mean_shift_exact",
    "mean_shift_approx",
    "detected_fraction",
    "misalignment_from_power_ratio",
    "misalignment_angle",
    "differential_displacement",
]

# Above this the small-misalignment approximations degrade; the exact
# formulas stay valid, so the guard warns instead of raising.
KSIGMA_GUARD = 0.8


class DarkPortError(ValueError):
    """The dark port is exactly dark: no light reaches the detector."""


def _require_finite(**values):
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class BeamParams:
    """Gaussian meter beam.

    sigma is half the 1/e^2 intensity radius (so the paper-style beam
    "diameter" is 4*sigma); lam is the vacuum wavelength in meters.
    """

    sigma: float
    lam: float

    def __post_init__(self):
        _require_finite(sigma=self.sigma, lam=self.lam)
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")

    @property
    def k0(self) -> float:
        """Optical wavenumber 2*pi/lam in rad/m."""
        return 2.0 * math.pi / self.lam


@dataclass(frozen=True)
class Geometry:
    """Interferometer geometry.

    L is the beam-separation parameter at the tilted mirror (meters) as it
    enters phi = sqrt(2)*k0*L*theta.  k is the transverse misalignment kick
    in rad/m; its sign encodes the misalignment direction.
    """

    L: float
    k: float

    def __post_init__(self):
        _require_finite(L=self.L, k=self.k)
        if self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")


@dataclass(frozen=True)
class OperatingPoint:
    """Interferometer state: tilt, phase, beam and geometry together.

    theta and phi always satisfy phi = sqrt(2)*k0*L*theta; build instances
    through :meth:`from_tilt` or :meth:`from_phase` to keep them in sync.
    """

    beam: BeamParams
    geom: Geometry
    theta: float
    phi: float

    def __post_init__(self):
        _require_finite(theta=self.theta, phi=self.phi)
        expected = phase_from_tilt(self.theta, self.geom, self.beam)
        scale = max(abs(expected), abs(self.phi), 1e-300)
        if abs(expected - self.phi) > 1e-9 * scale:
            raise ValueError(
                f"inconsistent operating point: phi={self.phi} but "
                f"sqrt(2)*k0*L*theta={expected}"
            )

    @classmethod
    def from_tilt(cls, theta, geom, beam):
        return cls(beam=beam, geom=geom, theta=theta,
                   phi=phase_from_tilt(theta, geom, beam))

    @classmethod
    def from_phase(cls, phi, geom, beam):
        return cls(beam=beam, geom=geom, theta=tilt_from_phase(phi, geom, beam),
                   phi=phi)

    @property
    def k_sigma(self) -> float:
        """Dimensionless misalignment k*sigma (fringes per beam width)."""
        return self.geom.k * self.beam.sigma


def phase_from_tilt(theta, geom: Geometry, beam: BeamParams):
    """Relative phase phi = sqrt(2)*k0*L*theta induced by a mirror tilt."""
    _require_finite(theta=theta)
    return math.sqrt(2.0) * beam.k0 * geom.L * theta


def tilt_from_phase(phi, geom: Geometry, beam: BeamParams):
    """Inverse of :func:`phase_from_tilt`: theta = phi / (sqrt(2)*k0*L)."""
    _require_finite(phi=phi)
    return phi / (math.sqrt(2.0) * beam.k0 * geom.L)


def darkport_intensity(z, phi, geom: Geometry, beam: BeamParams):
    """Transverse intensity at the dark port (arbitrary units).

    Evaluates 4*sin^2((phi + k z)/2) * exp(-z^2 / 2 sigma^2), the squared
    interference of the two counter-propagating fields |1 - e^{i(phi+kz)}|^2
    on the Gaussian envelope.  Accepts scalar or array z.
    """
    _require_finite(z=z, phi=phi)
    z = np.asarray(z, dtype=float)
    arg = 0.5 * (phi + geom.k * z)
    out = 4.0 * np.sin(arg) ** 2 * np.exp(-z * z / (2.0 * beam.sigma ** 2))
    return out if out.ndim else float(out)


def darkport_power(phi, k, sigma) -> float:
    """Integral of :func:`darkport_intensity` over z, in closed form.

    integral I_out dz = 2*sqrt(2 pi)*sigma * (1 - cos(phi) e^{-k^2 sigma^2/2}).
    """
    _require_finite(phi=phi, k=k, sigma=sigma)
    return (2.0 * math.sqrt(2.0 * math.pi) * sigma
            * (1.0 - math.cos(phi) * math.exp(-0.5 * k * k * sigma * sigma)))


def mean_shift_exact(phi, k, sigma) -> float:
    """Mean transverse position of the dark-port distribution.

    <z> = k sigma^2 sin(phi) / (exp(k^2 sigma^2 / 2) - cos(phi)).

    Odd in phi and odd in k.  Raises :class:`DarkPortError` at the
    degenerate point phi = 0, k = 0 where the port is exactly dark and the
    mean is undefined (0/0), rather than returning 0.
    """
    _require_finite(phi=phi, k=k, sigma=sigma)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    denom = math.exp(0.5 * k * k * sigma * sigma) - math.cos(phi)
    if denom == 0.0:
        raise DarkPortError(
            "degenerate dark port (phi = 0 mod 2*pi and k = 0): no light "
            "reaches the detector, mean shift undefined"
        )
    return k * sigma * sigma * math.sin(phi) / denom


def mean_shift_approx(phi, k) -> float:
    """Small-signal mean shift <z> ~= 2*phi/k.

    Valid for phi << k*sigma << 1 (the amplification regime); the full
    expression is :func:`mean_shift_exact`.
    """
    _require_finite(phi=phi, k=k)
    if k == 0:
        raise ValueError("mean_shift_approx requires k != 0")
    return 2.0 * phi / k


def detected_fraction(k, sigma) -> float:
    """Fraction (k*sigma/2)^2 of the input power reaching the dark port.

    Leading order in the misalignment; warns above k*sigma = 0.8 where the
    weak-misalignment expansion degrades.
    """
    _require_finite(k=k, sigma=sigma)
    ks = abs(k) * sigma
    if ks > KSIGMA_GUARD:
        warnings.warn(
            f"k*sigma = {ks:.3g} exceeds the weak-misalignment guard "
            f"{KSIGMA_GUARD}; (k sigma/2)^2 is a leading-order estimate",
            stacklevel=2,
        )
    return (ks / 2.0) ** 2


def misalignment_from_power_ratio(ratio, sigma) -> float:
    """Misalignment kick k recovered from a bright/dark power ratio.

    Inverts :func:`detected_fraction`: k = (2/sigma)/sqrt(ratio) for a dark
    port ratio times weaker than the bright port.
    """
    _require_finite(ratio=ratio, sigma=sigma)
    if ratio <= 1:
        raise ValueError(f"power ratio must exceed 1, got {ratio}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return (2.0 / sigma) / math.sqrt(ratio)


def misalignment_angle(k, beam: BeamParams) -> float:
    """Misalignment angle k/k0 between the recombined beams, in rad."""
    _require_finite(k=k)
    return k / beam.k0


def differential_displacement(theta, geom: Geometry) -> float:
    """Differential mirror-edge displacement theta*L for a tilt theta."""
    _require_finite(theta=theta)
    return theta * geom.L
