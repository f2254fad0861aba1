"""Qubit-meter description of the dark-port measurement.

The which-path degree of freedom is a qubit prepared in
|i> = (|cw> + |ccw>)/sqrt(2), coupled weakly to the transverse coordinate z
of the Gaussian meter through exp(i g sigma_3 z) with 2g = k, and
post-selected onto |f> = (|cw> - e^{i phi}|ccw>)/sqrt(2) (the dark port).
The normalized matrix element

    sigma_w = <f|sigma_3|i> / <f|i> = -i cot(phi/2)

is purely imaginary here.  The surviving meter density reproduces the
classical dark-port intensity exactly; both routes are exposed so they can
be checked against each other.

The sign of the coupling exponent is a convention (it fixes which path gets
the positive kick); it is chosen so that positive phi shifts the meter mean
toward positive z, matching the classical intensity in :mod:`.optics`.
"""

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .optics import DarkPortError, Geometry, KSIGMA_GUARD, _require_finite

__all__ = [
    "QubitSelection",
    "MeterState",
    "RegimeReport",
    "OrthogonalSelectionError",
    "IWVA",
    "WVA",
    "INTERMEDIATE",
    "weak_value",
    "weak_value_from_states",
    "meter_pdf",
    "postselection_probability",
    "postselection_probability_exact",
    "quantum_mean_shift",
    "regime_classify",
    "wva_predictions",
]

SIGMA_3 = np.diag([1.0, -1.0]).astype(complex)

IWVA = "IWVA"
WVA = "WVA"
INTERMEDIATE = "INTERMEDIATE"

# Regime thresholds on kappa = k sigma |sigma_w|; "much greater/less than 1"
# rendered as a configurable factor-of-3 band.
KAPPA_LO = 0.3
KAPPA_HI = 3.0


class OrthogonalSelectionError(ValueError):
    """Pre- and post-selected states are orthogonal; weak value diverges."""


@dataclass(frozen=True)
class QubitSelection:
    """Pre/post-selected which-path qubit for a post-selection phase phi.

    Basis order is (|cw>, |ccw>).  Only |<f|.>|^2 is observable, so the
    global phase written into |f> is a bookkeeping choice.
    """

    phi: float

    def __post_init__(self):
        _require_finite(phi=self.phi)

    @property
    def pre(self) -> np.ndarray:
        return np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)

    @property
    def post(self) -> np.ndarray:
        return np.array([1.0, -cmath.exp(1j * self.phi)], dtype=complex) / math.sqrt(2.0)

    @property
    def overlap(self) -> complex:
        """<f|i> = (1 - e^{-i phi})/2."""
        return complex(np.vdot(self.post, self.pre))


@dataclass(frozen=True)
class MeterState:
    """Gaussian meter of width sigma coupled with strength g = k/2."""

    sigma: float
    g: float

    def __post_init__(self):
        _require_finite(sigma=self.sigma, g=self.g)
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def k(self) -> float:
        """Beam misalignment k = 2g."""
        return 2.0 * self.g

    @classmethod
    def from_geometry(cls, geom: Geometry, sigma: float) -> "MeterState":
        return cls(sigma=sigma, g=geom.k / 2.0)


@dataclass(frozen=True)
class RegimeReport:
    """Classification of the operating regime from kappa = k sigma |sigma_w|."""

    kappa: float
    label: str
    lo: float
    hi: float


def weak_value(phi) -> complex:
    """Weak value -i*cot(phi/2) of the path operator.

    Purely imaginary; diverges as phi -> 0 (orthogonal selection), where an
    :class:`OrthogonalSelectionError` is raised.
    """
    _require_finite(phi=phi)
    s = math.sin(phi / 2.0)
    if s == 0.0:
        raise OrthogonalSelectionError(
            f"phi = {phi} is a multiple of 2*pi: post-selection is orthogonal "
            "to pre-selection and the weak value diverges"
        )
    return -1j * (math.cos(phi / 2.0) / s)


def weak_value_from_states(selection: QubitSelection) -> complex:
    """Weak value computed from the explicit state vectors.

    <f|sigma_3|i> / <f|i>; independent of the cotangent form and used to
    cross-check it.
    """
    overlap = selection.overlap
    # |<f|i>| = |sin(phi/2)|; below float resolution the states are orthogonal
    if abs(overlap) < 1e-12:
        raise OrthogonalSelectionError(
            "post-selection is orthogonal to pre-selection"
        )
    return complex(np.vdot(selection.post, SIGMA_3 @ selection.pre)) / overlap


def _postselected_amplitude(z, phi, k):
    """<f| exp(i (k/2) sigma_3 z) |i> for scalar or array z."""
    half = 0.5 * k * np.asarray(z, dtype=float)
    # (e^{i k z/2} - e^{-i phi} e^{-i k z/2}) / 2 in the (cw, ccw) basis
    return 0.5 * (np.exp(1j * half) - cmath.exp(-1j * phi) * np.exp(-1j * half))


def postselection_probability_exact(phi, k, sigma) -> float:
    """Exact post-selection probability (dark-port power fraction).

    P = (1 - cos(phi) e^{-k^2 sigma^2 / 2}) / 2, valid at any k*sigma.
    """
    _require_finite(phi=phi, k=k, sigma=sigma)
    return 0.5 * (1.0 - math.cos(phi) * math.exp(-0.5 * k * k * sigma * sigma))


def postselection_probability(phi, k, sigma) -> float:
    """Weak-interaction post-selection probability.

    P ~= sin^2(phi/2) + (k sigma / 2)^2 cos(phi), the leading order of
    :func:`postselection_probability_exact` for k*sigma << 1.  In the
    inverse-amplification limit phi -> 0 this reduces to (k sigma / 2)^2.
    """
    _require_finite(phi=phi, k=k, sigma=sigma)
    ks = abs(k) * sigma
    if ks > KSIGMA_GUARD:
        warnings.warn(
            f"k*sigma = {ks:.3g} exceeds the weak-interaction guard "
            f"{KSIGMA_GUARD}; use postselection_probability_exact",
            stacklevel=2,
        )
    return math.sin(phi / 2.0) ** 2 + (ks / 2.0) ** 2 * math.cos(phi)


def meter_pdf(z, phi, k, sigma):
    """Normalized position density of the post-selected meter, in 1/m.

    |<z|Psi_f>|^2 computed from the post-selected coupling amplitude on the
    Gaussian meter, normalized by the exact post-selection probability.
    Identical (analytically) to the classical dark-port intensity divided by
    its integral.  Accepts scalar or array z.
    """
    _require_finite(z=z, phi=phi, k=k, sigma=sigma)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    prob = postselection_probability_exact(phi, k, sigma)
    if prob <= 0.0:
        raise DarkPortError(
            "post-selection probability is zero: no meter events survive"
        )
    z = np.asarray(z, dtype=float)
    amp2 = np.abs(_postselected_amplitude(z, phi, k)) ** 2
    gauss = np.exp(-z * z / (2.0 * sigma * sigma)) / (math.sqrt(2.0 * math.pi) * sigma)
    out = amp2 * gauss / prob
    return out if out.ndim else float(out)


def quantum_mean_shift(phi, k, sigma) -> float:
    """Meter mean after post-selection, weak-interaction form.

    <z> ~= 2 k sigma^2 sin(phi) / (4 sin^2(phi/2) + k^2 sigma^2 cos(phi)),
    the qubit-meter counterpart of the exact classical mean shift; the two
    agree to relative order (k sigma)^2 + phi^2.
    """
    _require_finite(phi=phi, k=k, sigma=sigma)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    denom = 4.0 * math.sin(phi / 2.0) ** 2 + k * k * sigma * sigma * math.cos(phi)
    if denom == 0.0:
        raise DarkPortError(
            "degenerate dark port (phi = 0 mod 2*pi and k = 0): no meter "
            "events survive post-selection"
        )
    return 2.0 * k * sigma * sigma * math.sin(phi) / denom


def regime_classify(phi, k, sigma, lo: float = KAPPA_LO, hi: float = KAPPA_HI) -> RegimeReport:
    """Classify the operating regime from kappa = k sigma |cot(phi/2)|.

    kappa >= hi is the inverse regime (selection backaction dominates, the
    meter goes bimodal); kappa <= lo is the conventional amplification
    regime (meter stays Gaussian); in between is INTERMEDIATE.  phi = 0 mod
    2*pi classifies as the inverse regime by continuity (kappa -> inf).
    """
    _require_finite(phi=phi, k=k, sigma=sigma)
    if not 0 < lo < hi:
        raise ValueError(f"thresholds must satisfy 0 < lo < hi, got {lo}, {hi}")
    ks = abs(k) * sigma
    try:
        kappa = ks * abs(weak_value(phi))
    except OrthogonalSelectionError:
        if ks == 0.0:
            raise DarkPortError(
                "degenerate dark port (phi = 0 mod 2*pi and k = 0)"
            ) from None
        kappa = math.inf
    if kappa >= hi:
        label = IWVA
    elif kappa <= lo:
        label = WVA
    else:
        label = INTERMEDIATE
    return RegimeReport(kappa=kappa, label=label, lo=lo, hi=hi)


def wva_predictions(phi, k, sigma):
    """Conventional-amplification predictions (shift, probability).

    <z> ~= 2 k sigma^2 / phi and P ~= sin^2(phi/2), valid when
    k sigma |sigma_w| << 1.  Warns when evaluated outside that regime.
    """
    _require_finite(phi=phi, k=k, sigma=sigma)
    if math.sin(phi / 2.0) == 0.0:
        raise ValueError("wva_predictions requires phi != 0 mod 2*pi")
    report = regime_classify(phi, k, sigma)
    if report.label != WVA:
        warnings.warn(
            f"kappa = {report.kappa:.3g} is outside the conventional "
            f"amplification regime (label {report.label}); predictions are "
            "extrapolated",
            stacklevel=2,
        )
    return 2.0 * k * sigma * sigma / phi, math.sin(phi / 2.0) ** 2
