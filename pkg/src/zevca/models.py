import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

from zevca.potentials import PotentialSpec

SCHEMA_VERSION = 1
DEFAULT_N_LIST = [2, 4, 6, 8, 10]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class GaussianParams(_Strict):
    """Model for the initial Gaussian wavepacket
    psi = exp[-alpha0 (x-xc)^2 + i pc (x-xc)/hbar + i gamma0/hbar]"""

    alpha0: float = Field(gt=0, description="Width parameter (1/bohr^2)")
    xc: float = Field(default=0.0, description="Mean position (bohr)")
    pc: float = Field(default=0.0, description="Mean momentum (a.u.)")
    gamma0: Optional[complex] = Field(
        default=None,
        description="Complex phase constant; None selects the normalization "
        "convention gamma0 = -(i hbar/4) ln(2 alpha0/pi)",
    )

    @classmethod
    def normalized(
        cls, alpha0: float, xc: float = 0.0, pc: float = 0.0, hbar: float = 1.0
    ) -> "GaussianParams":
        return cls(
            alpha0=alpha0, xc=xc, pc=pc, gamma0=normalization_phase(alpha0, hbar)
        )

    def phase_constant(self, hbar: float = 1.0) -> complex:
        if self.gamma0 is None:
            return normalization_phase(self.alpha0, hbar)
        return self.gamma0

    def wavefunction(self, x, hbar: float = 1.0):
        """Evaluate the wavepacket at ``x`` (scalar or array)."""
        dx = x - self.xc
        exponent = (
            -self.alpha0 * dx**2
            + 1j * self.pc * dx / hbar
            + 1j * self.phase_constant(hbar) / hbar
        )
        return np.exp(exponent)


def normalization_phase(alpha0: float, hbar: float = 1.0) -> complex:
    return -0.25j * hbar * math.log(2.0 * alpha0 / math.pi)


class IntegrationConfig(_Strict):
    """Model for the ZEVCA time-stepping settings"""

    dt: float = Field(default=1e-3, gt=0, description="Step in t (or tau)")
    t_final: float = Field(gt=0, description="Final time (or tau)")
    scheme: Literal["rk4", "rk45"] = Field(
        default="rk4", description="Fixed-step RK4 or adaptive RK45"
    )
    rtol: float = Field(default=1e-10, gt=0, description="RK45 relative tolerance")
    atol: float = Field(default=1e-12, gt=0, description="RK45 absolute tolerance")
    record_stride: int = Field(default=1, ge=1, description="Steps between records")

    @model_validator(mode="after")
    def _check_span(self):
        if self.dt >= self.t_final:
            raise ValueError(
                f"dt ({self.dt}) must be smaller than t_final ({self.t_final})"
            )
        return self


class OracleConfig(_Strict):
    """Model for the split-operator reference run"""

    xmin: float = Field(description="Left grid edge (bohr)")
    xmax: float = Field(description="Right grid edge, exclusive (bohr)")
    npoints: int = Field(default=2048, description="Grid size, power of two >= 256")
    dt: float = Field(default=5e-4, gt=0, description="Step in t (or tau)")
    t_final: float = Field(gt=0, description="Maximum time (or tau)")
    record_stride: int = Field(default=1, ge=1, description="Steps between records")
    stop_tol: Optional[float] = Field(
        default=None,
        gt=0,
        description="Stop early once the watched quantity varies less than this "
        "(relative) over the trailing window",
    )
    stop_window: float = Field(
        default=0.2, gt=0, le=1, description="Trailing window as a run fraction"
    )

    @field_validator("npoints")
    @classmethod
    def _power_of_two(cls, v: int) -> int:
        if v < 256 or v & (v - 1):
            raise ValueError(f"npoints must be a power of two >= 256, got {v}")
        return v

    @model_validator(mode="after")
    def _check_box(self):
        if self.xmax <= self.xmin:
            raise ValueError(f"xmax ({self.xmax}) must exceed xmin ({self.xmin})")
        return self


class DetectionConfig(_Strict):
    """Model for asymptote / plateau detection"""

    window: float = Field(
        default=0.2, gt=0, le=1, description="Trailing window as a run fraction"
    )
    tol: float = Field(default=1e-3, gt=0, description="Relative variation bound")


class ThresholdConfig(_Strict):
    """Model for setup-validity thresholds"""

    potential_derivative: float = Field(
        default=1e-8, ge=0, description="Minimum |V_n(x0)|, n=1..N"
    )
    density: float = Field(default=1e-8, ge=0, description="Minimum |psi(x0,0)|^2")


class ExperimentConfig(_Strict):
    """Model for a complete experiment description"""

    experiment: Literal["tunnel", "eigen", "compare"]
    potential: PotentialSpec
    gaussian: GaussianParams
    x0: float = Field(default=0.0, description="Fixed trajectory position (bohr)")
    n_list: List[int] = Field(
        default_factory=lambda: list(DEFAULT_N_LIST),
        min_length=1,
        description="Truncation orders to sweep",
    )
    integration: IntegrationConfig
    oracle: OracleConfig
    detection: DetectionConfig = Field(default_factory=DetectionConfig)
    thresholds: ThresholdConfig = Field(default_factory=ThresholdConfig)
    output_dir: Optional[Path] = Field(default=None, description="Output directory")
    hbar: float = Field(default=1.0, gt=0, description="Reduced Planck constant")
    mass: float = Field(default=1.0, gt=0, description="Particle mass (a.u.)")
    max_workers: Optional[int] = Field(
        default=None, ge=1, description="Parallel N-sweep workers"
    )

    @field_validator("n_list")
    @classmethod
    def _non_negative_orders(cls, v: List[int]) -> List[int]:
        bad = [n for n in v if n < 0]
        if bad:
            raise ValueError(f"truncation orders must be >= 0, got {bad}")
        return v


class OrderResult(BaseModel):
    """Model for the outcome of one truncation order"""

    n: int = Field(description="Truncation order N")
    terminal_value: Optional[float] = Field(
        default=None, description="T_final (tunnel) or E1 plateau (eigen)"
    )
    relative_error: Optional[float] = Field(
        default=None, description="|approx - oracle| / |oracle|"
    )
    converged: bool = Field(default=False, description="Asymptote/plateau detected")
    blew_up: bool = Field(default=False, description="Jet became non-finite")
    blowup_time: Optional[float] = Field(
        default=None, description="Time of the first non-finite jet"
    )
    max_deviation: Optional[float] = Field(
        default=None, description="Max |density - oracle density| (compare)"
    )
    rms_deviation: Optional[float] = Field(
        default=None, description="RMS |density - oracle density| (compare)"
    )
    wall_clock_s: float = Field(default=0.0, description="Propagation wall time")
    csv_file: Optional[str] = Field(default=None, description="Time-series file")


class Diagnostic(BaseModel):
    """Model for a structured setup or run warning"""

    code: str = Field(description="Machine-readable diagnostic code")
    message: str = Field(description="Human-readable explanation")
    value: Optional[float] = Field(default=None, description="Offending value")


class RunSummary(BaseModel):
    """Model for the JSON summary of one experiment run"""

    schema_version: Literal[1] = SCHEMA_VERSION
    experiment: str = Field(description="tunnel, eigen or compare")
    preset: Optional[str] = Field(default=None, description="Preset name, if any")
    reference_value: Optional[float] = Field(
        default=None, description="Oracle T_exact or Rayleigh energy"
    )
    reference_kind: Optional[str] = Field(default=None, description="Reference label")
    extra_references: Dict[str, float] = Field(
        default_factory=dict, description="Analytic cross-checks"
    )
    results: List[OrderResult] = Field(default_factory=list)
    optimal_n: Optional[int] = Field(
        default=None, description="Order with the smallest relative error"
    )
    interpolated: bool = Field(
        default=False, description="Oracle series interpolated onto ZEVCA times"
    )
    diagnostics: List[Diagnostic] = Field(default_factory=list)
    oracle_wall_clock_s: float = Field(default=0.0)
    oracle_csv_file: Optional[str] = Field(default=None)
    deterministic: bool = Field(default=False)
    config: Dict[str, Any] = Field(description="Echo of the validated configuration")
