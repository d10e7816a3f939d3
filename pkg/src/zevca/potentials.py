"""One-dimensional potentials and their exact derivative stacks

Derivatives V_0..V_N at a point are produced by truncated Taylor-series (jet)
arithmetic: each potential is composed from a handful of jet primitives, and
the derivative stack is read off as V_n = n! * c_n.
"""

import logging
import math
from dataclasses import dataclass
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, FiniteFloat
from scipy.special import factorial

logger = logging.getLogger(__name__)

JET_OPERATIONS = ("add", "sub", "mul", "exp", "cosh", "reciprocal", "square")


class SingularJetError(ZeroDivisionError):
    """Raised when a jet with vanishing constant term is inverted."""

    pass


@dataclass(frozen=True)
class RealJet:
    """Truncated Taylor expansion c_0..c_N of a real function about ``point``."""

    coeffs: np.ndarray
    point: float = 0.0

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise ValueError("RealJet needs a non-empty 1-D coefficient array")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError(f"RealJet coefficients must be finite: {coeffs}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @classmethod
    def variable(cls, point: float, order: int) -> "RealJet":
        """The jet of f(x) = x about ``point``."""
        coeffs = np.zeros(order + 1)
        coeffs[0] = point
        if order >= 1:
            coeffs[1] = 1.0
        return cls(coeffs, point)

    @classmethod
    def constant(cls, value: float, point: float, order: int) -> "RealJet":
        coeffs = np.zeros(order + 1)
        coeffs[0] = value
        return cls(coeffs, point)

    def _check_compatible(self, other: "RealJet") -> None:
        if other.order != self.order or other.point != self.point:
            raise ValueError(
                f"Incompatible jets: order {self.order} at {self.point} vs "
                f"order {other.order} at {other.point}"
            )

    def __add__(self, other):
        if isinstance(other, RealJet):
            self._check_compatible(other)
            return RealJet(self.coeffs + other.coeffs, self.point)
        coeffs = self.coeffs.copy()
        coeffs[0] += other
        return RealJet(coeffs, self.point)

    __radd__ = __add__

    def __neg__(self):
        return RealJet(-self.coeffs, self.point)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, RealJet):
            self._check_compatible(other)
            product = np.convolve(self.coeffs, other.coeffs)[: self.order + 1]
            return RealJet(product, self.point)
        return RealJet(self.coeffs * other, self.point)

    __rmul__ = __mul__

    def exp(self) -> "RealJet":
        # e' = a' e  =>  k e_k = sum_j j a_j e_{k-j}
        a = self.coeffs
        out = np.zeros_like(a)
        out[0] = math.exp(a[0])
        for k in range(1, a.size):
            j = np.arange(1, k + 1)
            out[k] = np.dot(j * a[j], out[k - j]) / k
        return RealJet(out, self.point)

    def cosh(self) -> "RealJet":
        # c' = a' s, s' = a' c
        a = self.coeffs
        c = np.zeros_like(a)
        s = np.zeros_like(a)
        c[0] = math.cosh(a[0])
        s[0] = math.sinh(a[0])
        for k in range(1, a.size):
            j = np.arange(1, k + 1)
            c[k] = np.dot(j * a[j], s[k - j]) / k
            s[k] = np.dot(j * a[j], c[k - j]) / k
        return RealJet(c, self.point)

    def reciprocal(self) -> "RealJet":
        a = self.coeffs
        if a[0] == 0.0:
            raise SingularJetError(
                f"Cannot invert a jet with zero constant term at x={self.point}"
            )
        out = np.zeros_like(a)
        out[0] = 1.0 / a[0]
        for k in range(1, a.size):
            out[k] = -np.dot(a[1 : k + 1], out[k - 1 :: -1][:k]) / a[0]
        return RealJet(out, self.point)

    def square(self) -> "RealJet":
        return self * self

    def derivatives(self) -> np.ndarray:
        """Derivative values f^(n)(point) = n! c_n."""
        return self.coeffs * factorial(np.arange(self.order + 1))


def jet_arithmetic(
    a: RealJet, b: Union[RealJet, float, None] = None, op: str = "add"
) -> RealJet:
    """Apply one jet primitive.

    Binary operations (add, sub, mul) accept a jet or a scalar as ``b``; the
    unary ones (exp, cosh, reciprocal, square) ignore it.

    Raises:
        ValueError: unknown operation, missing operand, or incompatible jets.
        SingularJetError: reciprocal of a jet with c_0 = 0.
    """
    if op not in JET_OPERATIONS:
        raise ValueError(
            f"Unknown jet operation '{op}', expected one of {JET_OPERATIONS}"
        )
    if op in ("add", "sub", "mul"):
        if b is None:
            raise ValueError(f"Jet operation '{op}' needs a second operand")
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        return a * b
    return getattr(a, op)()


class _PotentialBase(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    def value(self, x):
        raise NotImplementedError

    def taylor_jet(self, x0: float, order: int) -> RealJet:
        raise NotImplementedError


class EckartPotential(_PotentialBase):
    """V(x) = D / cosh(beta x)^2"""

    kind: Literal["eckart"] = "eckart"
    height: float = Field(gt=0, description="Barrier height D (hartree)")
    beta: float = Field(gt=0, description="Inverse barrier width (1/bohr)")

    def value(self, x):
        return self.height / np.cosh(self.beta * x) ** 2

    def taylor_jet(self, x0: float, order: int) -> RealJet:
        x = RealJet.variable(x0, order)
        return self.height * (self.beta * x).cosh().reciprocal().square()


class QuarticPotential(_PotentialBase):
    """V(x) = a x^2 + b x^4"""

    kind: Literal["quartic"] = "quartic"
    a: float = Field(description="Quadratic coefficient")
    b: float = Field(description="Quartic coefficient")

    def value(self, x):
        return self.a * x**2 + self.b * x**4

    def taylor_jet(self, x0: float, order: int) -> RealJet:
        x2 = RealJet.variable(x0, order).square()
        return self.a * x2 + self.b * x2.square()


class MorsePotential(_PotentialBase):
    """V(x) = D [1 - exp(-alpha x)]^2"""

    kind: Literal["morse"] = "morse"
    depth: float = Field(gt=0, description="Well depth D (hartree)")
    alpha: float = Field(gt=0, description="Range parameter (1/bohr)")

    def value(self, x):
        return self.depth * (1.0 - np.exp(-self.alpha * x)) ** 2

    def taylor_jet(self, x0: float, order: int) -> RealJet:
        x = RealJet.variable(x0, order)
        return self.depth * (1.0 - (-self.alpha * x).exp()).square()


class HarmonicPotential(_PotentialBase):
    """V(x) = m omega^2 x^2 / 2"""

    kind: Literal["harmonic"] = "harmonic"
    mass: float = Field(gt=0, description="Oscillator mass (a.u.)")
    omega: float = Field(gt=0, description="Angular frequency (a.u.)")

    def value(self, x):
        return 0.5 * self.mass * self.omega**2 * x**2

    def taylor_jet(self, x0: float, order: int) -> RealJet:
        x = RealJet.variable(x0, order)
        return (0.5 * self.mass * self.omega**2) * x.square()


class PolynomialPotential(_PotentialBase):
    """V(x) = sum_k coeffs[k] x^k; ``coeffs=[0]`` is the free particle."""

    kind: Literal["polynomial"] = "polynomial"
    coeffs: list[FiniteFloat] = Field(
        min_length=1, description="Power-basis coefficients, lowest order first"
    )

    def value(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def taylor_jet(self, x0: float, order: int) -> RealJet:
        x = RealJet.variable(x0, order)
        jet = RealJet.constant(self.coeffs[-1], x0, order)
        for c in reversed(self.coeffs[:-1]):
            jet = jet * x + c
        return jet


PotentialSpec = Annotated[
    Union[
        EckartPotential,
        QuarticPotential,
        MorsePotential,
        HarmonicPotential,
        PolynomialPotential,
    ],
    Field(discriminator="kind"),
]


def value(p: PotentialSpec, x):
    """Pointwise potential value; accepts scalars or arrays."""
    return p.value(x)


def derivative_stack(p: PotentialSpec, x0: float, N: int) -> np.ndarray:
    """Return V_0..V_N = d^nV/dx^n at ``x0``.

    Raises:
        ValueError: If N < 0 or x0 is not finite.
    """
    if N < 0:
        raise ValueError(f"Truncation order must be non-negative, got {N}")
    if not math.isfinite(x0):
        raise ValueError(f"Expansion point must be finite, got {x0}")
    vstack = p.taylor_jet(float(x0), N).derivatives()
    logger.debug("derivative_stack(%s, x0=%s, N=%s) = %s", p.kind, x0, N, vstack)
    return vstack


def harmonic_frequency(p: PotentialSpec, x0: float, mass: float) -> Optional[float]:
    """Local harmonic frequency sqrt(V_2(x0)/m), or None where V_2 <= 0."""
    v2 = derivative_stack(p, x0, 2)[2]
    if v2 <= 0:
        return None
    return math.sqrt(v2 / mass)


def morse_level(p: MorsePotential, mass: float, hbar: float = 1.0, n: int = 0) -> float:
    """Analytic Morse eigenvalue hbar w (n+1/2) - [hbar w (n+1/2)]^2 / (4D)."""
    omega = p.alpha * math.sqrt(2.0 * p.depth / mass)
    quantum = hbar * omega * (n + 0.5)
    return quantum - quantum**2 / (4.0 * p.depth)
