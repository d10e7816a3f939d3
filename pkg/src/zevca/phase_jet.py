"""Truncated complex-phase hierarchy at a fixed position

A phase jet holds S_0..S_N, the complex action and its spatial derivatives at
one position x(0) and one time. Indices above N read as zero, which is the
closure S_{N+1} = S_{N+2} = 0 of the hierarchy

    dS_n/dt = (i hbar/2m) S_{n+2} - (1/2m) (S_1^2)_n - V_n,   n = 0..N.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy.special import factorial

from zevca.models import GaussianParams

logger = logging.getLogger(__name__)

_FLOAT_MAX = float(np.finfo(float).max)
_LOG_FLOAT_MAX = math.log(_FLOAT_MAX)


class InvalidJetError(ValueError):
    """Raised when a phase jet or its inputs contain NaN or Inf."""

    pass


class TimeMode(StrEnum):
    REAL = "real"
    IMAGINARY = "imaginary"


@dataclass(frozen=True)
class PhaseJet:
    """Complex derivative values S_0..S_N at ``position`` and ``time``.

    Coefficients are derivative values S_n, not Taylor coefficients S_n/n!.
    """

    coeffs: np.ndarray
    position: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise ValueError("PhaseJet needs a non-empty 1-D coefficient array")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_user(cls, coeffs, position: float, time: float = 0.0) -> "PhaseJet":
        """Accept user-supplied initial data; rejects non-finite values."""
        jet = cls(coeffs, position, time)
        if not jet.valid:
            raise InvalidJetError(f"User-supplied jet is not finite: {jet.coeffs}")
        return jet

    @classmethod
    def zeros(cls, order: int, position: float = 0.0) -> "PhaseJet":
        return cls(np.zeros(order + 1, dtype=complex), position)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def valid(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def s(self, n: int) -> complex:
        """S_n with the truncation contract: zero above the order."""
        if n < 0:
            raise ValueError(f"Derivative index must be non-negative, got {n}")
        if n > self.order:
            return 0j
        return complex(self.coeffs[n])


@dataclass(frozen=True)
class Amplitude:
    """psi = exp(i S_0/hbar) at the jet position and its gradient psi_x."""

    psi: complex
    psi_x: complex
    saturated: bool = False


def leibniz_square(jet: PhaseJet, n: int) -> complex:
    """n-th spatial derivative of S_1^2 from the jet.

    (S_1^2)_n = sum_j C(n, j) S_{j+1} S_{n-j+1}
    """
    if n < 0:
        raise ValueError(f"Derivative index must be non-negative, got {n}")
    return sum(math.comb(n, j) * jet.s(j + 1) * jet.s(n - j + 1) for j in range(n + 1))


def leibniz_square_all(coeffs: np.ndarray, fact: np.ndarray = None) -> np.ndarray:
    """(S_1^2)_n for n = 0..N at once, via a Taylor-basis Cauchy product."""
    order = coeffs.size - 1
    if fact is None:
        fact = factorial(np.arange(order + 1))
    s1 = np.zeros(order + 1, dtype=complex)
    s1[:order] = coeffs[1:]
    taylor = s1 / fact
    return np.convolve(taylor, taylor)[: order + 1] * fact


def time_factor(mode: TimeMode, hbar: float) -> complex:
    """Chain-rule factor dt/dparameter: 1 in real time, -i hbar/2 in imaginary
    time where t = -(i hbar/2) tau."""
    if TimeMode(mode) is TimeMode.IMAGINARY:
        return -0.5j * hbar
    return 1.0 + 0j


def rhs_vector(
    coeffs: np.ndarray,
    vstack: np.ndarray,
    mass: float,
    hbar: float,
    factor: complex = 1.0,
    fact: np.ndarray = None,
) -> np.ndarray:
    """Array-level hierarchy right-hand side without validation."""
    order = coeffs.size - 1
    s_plus2 = np.zeros(order + 1, dtype=complex)
    if order >= 2:
        s_plus2[: order - 1] = coeffs[2:]
    rhs = (
        (0.5j * hbar / mass) * s_plus2
        - leibniz_square_all(coeffs, fact) / (2.0 * mass)
        - vstack
    )
    return factor * rhs


def hierarchy_rhs(
    jet: PhaseJet,
    vjet: np.ndarray,
    mass: float,
    hbar: float = 1.0,
    mode: TimeMode = TimeMode.REAL,
) -> np.ndarray:
    """d/dparameter of S_0..S_N along the zero-velocity characteristic.

    In imaginary time the result is the derivative with respect to the real
    progress variable tau.

    Raises:
        ValueError: If vjet length differs from the jet, or mass/hbar <= 0.
        InvalidJetError: If the jet or vjet contains non-finite values.
    """
    vjet = np.asarray(vjet, dtype=float)
    if vjet.shape != jet.coeffs.shape:
        raise ValueError(
            f"Potential stack has {vjet.size} entries, jet order {jet.order} "
            f"needs {jet.order + 1}"
        )
    if mass <= 0 or hbar <= 0:
        raise ValueError(f"mass and hbar must be positive, got {mass}, {hbar}")
    if not jet.valid or not np.all(np.isfinite(vjet)):
        raise InvalidJetError("hierarchy_rhs received non-finite input")
    return rhs_vector(jet.coeffs, vjet, mass, hbar, time_factor(mode, hbar))


def gaussian_phase_jet(
    g: GaussianParams, x0: float, N: int, hbar: float = 1.0
) -> PhaseJet:
    """Exact initial jet of a Gaussian wavepacket at ``x0``.

    S_0 = i alpha0 hbar d^2 + pc d + gamma0, S_1 = 2 i alpha0 hbar d + pc,
    S_2 = 2 i alpha0 hbar and S_n = 0 for n >= 3, with d = x0 - xc.
    """
    if N < 0:
        raise ValueError(f"Truncation order must be non-negative, got {N}")
    d = x0 - g.xc
    full = np.array(
        [
            1j * g.alpha0 * hbar * d**2 + g.pc * d + g.phase_constant(hbar),
            2j * g.alpha0 * hbar * d + g.pc,
            2j * g.alpha0 * hbar,
        ],
        dtype=complex,
    )
    coeffs = np.zeros(N + 1, dtype=complex)
    coeffs[: min(N + 1, 3)] = full[: N + 1]
    return PhaseJet(coeffs, position=x0, time=0.0)


def reconstruct_amplitude(jet: PhaseJet, hbar: float = 1.0) -> Amplitude:
    """psi[x(0), t] = exp(i S_0/hbar) and psi_x = (i S_1/hbar) psi.

    A magnitude beyond the float range is capped and flagged as saturated.
    """
    if not jet.valid:
        raise InvalidJetError("Cannot reconstruct the amplitude of a non-finite jet")
    s0, s1 = jet.s(0), jet.s(1)
    log_magnitude = -s0.imag / hbar
    if log_magnitude > _LOG_FLOAT_MAX:
        logger.warning(
            "Amplitude overflow at x=%s (log|psi|=%s)", jet.position, log_magnitude
        )
        psi = cmath.rect(_FLOAT_MAX, s0.real / hbar)
        return Amplitude(psi=psi, psi_x=_capped(1j * s1, psi), saturated=True)
    psi = cmath.exp(1j * s0 / hbar)
    psi_x = 1j * s1 / hbar * psi
    if not cmath.isfinite(psi_x):
        return Amplitude(psi=psi, psi_x=_capped(1j * s1, psi), saturated=True)
    return Amplitude(psi=psi, psi_x=psi_x)


def _capped(factor: complex, psi: complex) -> complex:
    if factor == 0:
        return 0j
    return cmath.rect(_FLOAT_MAX, cmath.phase(factor) + cmath.phase(psi))
