"""Physical quantities derived from recorded phase jets

Density and current at the fixed trajectory position, the cumulative
tunneling probability, the algebraic ground-state energy estimator, and the
detectors that decide when a series has settled.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from zevca.models import Diagnostic, GaussianParams, OrderResult, ThresholdConfig
from zevca.phase_jet import InvalidJetError, PhaseJet, TimeMode
from zevca.potentials import PotentialSpec, derivative_stack, harmonic_frequency
from zevca.propagator import TrajectoryRecord

logger = logging.getLogger(__name__)

# Below this density the current is reported as zero (nodal region)
NODAL_DENSITY = 1e-300
_LOG_FLOAT_MAX = math.log(float(np.finfo(float).max))
_DETECTION_FLOOR = 1e-12


class TimeModeError(ValueError):
    """Raised when an observable is applied to a record of the wrong time mode."""

    pass


@dataclass
class TunnelingSeries:
    """Density, current and cumulative tunneling probability T(t) at x0."""

    times: np.ndarray
    density: np.ndarray
    current: np.ndarray
    cumulative: np.ndarray
    saturated: np.ndarray
    asymptote: Optional[float] = None
    converged: bool = False

    @property
    def terminal(self) -> float:
        return float(self.cumulative[-1])


@dataclass
class EnergySeries:
    """Energy estimates E(tau) from an imaginary-time record."""

    taus: np.ndarray
    estimates: np.ndarray
    plateau: Optional[float] = None
    converged: bool = False
    window: float = 0.2
    valid: Optional[np.ndarray] = None

    @property
    def terminal(self) -> float:
        return float(self.estimates[-1])


def _density_from_imag(imag_s0, hbar: float):
    exponent = -2.0 * np.asarray(imag_s0, dtype=float) / hbar
    overflow = exponent > _LOG_FLOAT_MAX
    density = np.exp(np.minimum(exponent, _LOG_FLOAT_MAX))
    return density, overflow


def probability_density(jet: PhaseJet, hbar: float = 1.0) -> float:
    """|psi(x0, t)|^2 = exp(-2 Im S_0 / hbar); capped at the float maximum."""
    if not jet.valid:
        raise InvalidJetError("Cannot evaluate the density of a non-finite jet")
    density, overflow = _density_from_imag(jet.s(0).imag, hbar)
    if overflow:
        logger.warning("Density overflow at x=%s, t=%s", jet.position, jet.time)
    return float(density)


def probability_current(jet: PhaseJet, mass: float, hbar: float = 1.0) -> float:
    """J = |psi|^2 Re(S_1) / m, zero inside nodal regions."""
    if mass <= 0:
        raise ValueError(f"mass must be positive, got {mass}")
    density = probability_density(jet, hbar)
    if density < NODAL_DENSITY:
        return 0.0
    return density * jet.s(1).real / mass


def accumulate_tunneling(
    rec: TrajectoryRecord, mass: float, hbar: float = 1.0
) -> TunnelingSeries:
    """Trapezoidal running integral of the current over the recorded times.

    Raises:
        TimeModeError: If the record comes from an imaginary-time run.
    """
    if rec.mode is not TimeMode.REAL:
        raise TimeModeError(
            f"Tunneling probability needs a real-time record, got {rec.mode}"
        )
    if mass <= 0:
        raise ValueError(f"mass must be positive, got {mass}")
    density, overflow = _density_from_imag(rec.coeffs[:, 0].imag, hbar)
    nodal = density < NODAL_DENSITY
    s1 = rec.coeffs[:, 1].real if rec.order >= 1 else np.zeros(len(rec))
    current = np.where(nodal, 0.0, density * s1 / mass)
    if len(rec) > 1:
        cumulative = cumulative_trapezoid(current, rec.times, initial=0.0)
    else:
        cumulative = np.zeros(len(rec))
    saturated = overflow | nodal
    if np.any(overflow):
        logger.warning(
            "Density saturated in %s of %s samples at x0=%s",
            int(np.count_nonzero(overflow)),
            len(rec),
            rec.x0,
        )
    return TunnelingSeries(
        times=rec.times.copy(),
        density=density,
        current=current,
        cumulative=cumulative,
        saturated=saturated,
    )


def _trailing(times: np.ndarray, values: np.ndarray, window: float) -> np.ndarray:
    if not 0 < window <= 1:
        raise ValueError(f"window must be a fraction in (0, 1], got {window}")
    start = times[-1] - window * (times[-1] - times[0])
    return values[times >= start]


def flux_detected(series: TunnelingSeries, floor: float = _DETECTION_FLOOR) -> bool:
    """Whether |T| rises to ``floor`` anywhere in the series."""
    cumulative = np.abs(series.cumulative)
    return bool(np.any(cumulative[np.isfinite(cumulative)] >= floor))


def detect_asymptote(
    series: TunnelingSeries,
    window: float = 0.2,
    tol: float = 1e-3,
    floor: float = _DETECTION_FLOOR,
) -> Optional[float]:
    """T at the last time if T varies by less than ``tol`` (relative) over the
    trailing ``window`` fraction of the run, else None.

    A series whose |T| never reaches ``floor`` has no asymptote.
    """
    if series.cumulative.size == 0:
        raise ValueError("Cannot detect an asymptote on an empty series")
    if not flux_detected(series, floor):
        return None
    tail = _trailing(series.times, series.cumulative, window)
    if tail.size < 2:
        return None
    last = float(series.cumulative[-1])
    if np.ptp(tail) < tol * max(abs(last), floor):
        return last
    return None


def energy_estimate(jet: PhaseJet, v0: float, mass: float, hbar: float = 1.0) -> float:
    """E = -Re[(i hbar/2m) S_2 - S_1^2/(2m) - V(x0)]

    This is the estimator whose value on the harmonic ground-state jet is
    hbar omega / 2.
    """
    if not jet.valid or not math.isfinite(v0):
        raise InvalidJetError("energy_estimate received non-finite input")
    value = (0.5j * hbar / mass) * jet.s(2) - jet.s(1) ** 2 / (2.0 * mass) - v0
    return -value.real


def energy_series(
    rec: TrajectoryRecord, mass: float, hbar: float = 1.0
) -> EnergySeries:
    """Energy estimates for every recorded jet of an imaginary-time run.

    Raises:
        TimeModeError: If the record comes from a real-time run.
    """
    if rec.mode is not TimeMode.IMAGINARY:
        raise TimeModeError(
            f"Energy estimates need an imaginary-time record, got {rec.mode}"
        )
    n = len(rec)
    s1 = rec.coeffs[:, 1] if rec.order >= 1 else np.zeros(n, dtype=complex)
    s2 = rec.coeffs[:, 2] if rec.order >= 2 else np.zeros(n, dtype=complex)
    v0 = rec.vstack[0]
    estimates = -((0.5j * hbar / mass) * s2 - s1**2 / (2.0 * mass) - v0).real
    return EnergySeries(
        taus=rec.times.copy(), estimates=estimates, valid=np.isfinite(estimates)
    )


def detect_plateau(
    series: EnergySeries,
    window: float = 0.2,
    tol: float = 1e-3,
    floor: float = _DETECTION_FLOOR,
) -> Optional[float]:
    if series.estimates.size == 0:
        raise ValueError("Cannot detect a plateau on an empty series")
    tail = _trailing(series.taus, series.estimates, window)
    if tail.size < 2 or not np.all(np.isfinite(tail)):
        return None
    last = float(series.estimates[-1])
    if np.ptp(tail) < tol * max(abs(last), floor):
        return last
    return None


def validate_setup(
    p: PotentialSpec,
    g: GaussianParams,
    x0: float,
    N: int,
    thresholds: Optional[ThresholdConfig] = None,
    hbar: float = 1.0,
) -> List[Diagnostic]:
    """Check the two preconditions of a fixed-position run.

    The potential must have at least one non-negligible derivative V_n(x0),
    n = 1..N, and the initial density at x0 must not be negligible. Problems
    are reported as diagnostics and never block a run.
    """
    thresholds = thresholds or ThresholdConfig()
    diagnostics: List[Diagnostic] = []

    vstack = derivative_stack(p, x0, max(N, 0))
    largest = float(np.max(np.abs(vstack[1:]))) if N >= 1 else 0.0
    if largest < thresholds.potential_derivative:
        diagnostics.append(
            Diagnostic(
                code="flat_potential",
                message=(
                    f"All potential derivatives V_1..V_{N} at x0={x0} are below "
                    f"{thresholds.potential_derivative:g}"
                ),
                value=largest,
            )
        )

    density = float(abs(g.wavefunction(x0, hbar)) ** 2)
    if density < thresholds.density:
        diagnostics.append(
            Diagnostic(
                code="low_density",
                message=(
                    f"Initial density |psi(x0,0)|^2 = {density:.3e} at x0={x0} is "
                    f"below {thresholds.density:g}"
                ),
                value=density,
            )
        )

    for d in diagnostics:
        logger.warning("Setup diagnostic %s: %s", d.code, d.message)
    return diagnostics


def harmonic_approximation_energy(
    p: PotentialSpec, x0: float, mass: float, hbar: float = 1.0
) -> Optional[float]:
    """hbar omega_loc / 2 from the local curvature; None where V_2(x0) <= 0."""
    omega = harmonic_frequency(p, x0, mass)
    if omega is None:
        return None
    return 0.5 * hbar * omega


def relative_error(
    approx: Optional[float], reference: Optional[float]
) -> Optional[float]:
    """|approx - reference| / |reference|, or None when undefined."""
    if approx is None or reference is None or reference == 0:
        return None
    if not math.isfinite(approx):
        return None
    return abs(approx - reference) / abs(reference)


def optimal_order(results: Iterable[OrderResult]) -> Optional[int]:
    """The truncation order with the smallest relative error; ties go to the
    lower order."""
    scored = [
        (r.relative_error, r.n)
        for r in results
        if r.relative_error is not None and not r.blew_up
    ]
    if not scored:
        return None
    return min(scored)[1]
