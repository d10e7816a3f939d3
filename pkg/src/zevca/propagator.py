"""Time stepping of a phase jet along the zero-velocity characteristic

The potential derivative stack is evaluated once at x(0) and reused for every
step. A jet that turns non-finite ends the record with a blow-up flag instead
of raising, since divergent high-order runs are expected behaviour.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import factorial

from zevca.models import IntegrationConfig
from zevca.phase_jet import (
    InvalidJetError,
    PhaseJet,
    TimeMode,
    rhs_vector,
    time_factor,
)
from zevca.potentials import PotentialSpec, derivative_stack

logger = logging.getLogger(__name__)

__all__ = [
    "StepRejectionError",
    "TimeMode",
    "TrajectoryRecord",
    "propagate",
    "step",
]


class StepRejectionError(RuntimeError):
    """Raised when the adaptive integrator cannot continue.

    ``last_good_time`` is the last time the solver reached.
    """

    def __init__(self, message: str, last_good_time: float):
        super().__init__(message)
        self.last_good_time = last_good_time


@dataclass
class TrajectoryRecord:
    """Recorded jets S_0..S_N along one fixed-position trajectory."""

    mode: TimeMode
    x0: float
    times: np.ndarray
    coeffs: np.ndarray
    vstack: np.ndarray
    blew_up: bool = False
    blowup_index: Optional[int] = None
    blowup_time: Optional[float] = None
    diagnostic: Optional[str] = None

    @property
    def order(self) -> int:
        return self.coeffs.shape[1] - 1

    def __len__(self) -> int:
        return self.times.size

    def jet(self, i: int) -> PhaseJet:
        return PhaseJet(self.coeffs[i], position=self.x0, time=float(self.times[i]))

    @property
    def jets(self) -> List[PhaseJet]:
        return [self.jet(i) for i in range(len(self))]

    @property
    def final(self) -> PhaseJet:
        return self.jet(len(self) - 1)


def _rk4(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _vector_field(
    vstack: np.ndarray, mass: float, hbar: float, mode: TimeMode
) -> Callable[[np.ndarray], np.ndarray]:
    fact = factorial(np.arange(vstack.size))
    factor = time_factor(mode, hbar)

    def f(y: np.ndarray) -> np.ndarray:
        return rhs_vector(y, vstack, mass, hbar, factor, fact)

    return f


def step(
    jet: PhaseJet,
    vstack: np.ndarray,
    cfg: IntegrationConfig,
    mode: TimeMode = TimeMode.REAL,
    mass: float = 1.0,
    hbar: float = 1.0,
) -> PhaseJet:
    """Advance ``jet`` by one step of size ``cfg.dt``.

    Raises:
        ValueError: If vstack does not match the jet order.
        InvalidJetError: If the input or the result is non-finite.
    """
    vstack = np.asarray(vstack, dtype=float)
    if vstack.shape != jet.coeffs.shape:
        raise ValueError(
            f"Potential stack has {vstack.size} entries, jet needs {jet.order + 1}"
        )
    if not jet.valid:
        raise InvalidJetError("Cannot step a non-finite jet")
    f = _vector_field(vstack, mass, hbar, mode)
    if cfg.scheme == "rk4":
        y = _rk4(f, jet.coeffs, cfg.dt)
    else:
        sol = solve_ivp(
            lambda t, y: f(y),
            (0.0, cfg.dt),
            jet.coeffs,
            method="RK45",
            rtol=cfg.rtol,
            atol=cfg.atol,
        )
        if sol.status < 0:
            raise StepRejectionError(sol.message, last_good_time=jet.time)
        y = sol.y[:, -1]
    if not np.all(np.isfinite(y)):
        raise InvalidJetError(f"Step from t={jet.time} produced a non-finite jet")
    return PhaseJet(y, position=jet.position, time=jet.time + cfg.dt)


def _record_grid(cfg: IntegrationConfig, t0: float) -> tuple[int, np.ndarray]:
    n_steps = max(1, math.ceil(cfg.t_final / cfg.dt - 1e-9))
    ks = np.arange(n_steps + 1)
    keep = (ks % cfg.record_stride == 0) | (ks == n_steps)
    times = t0 + np.where(ks == n_steps, cfg.t_final, ks * cfg.dt)
    return n_steps, times[keep]


def propagate(
    initial: PhaseJet,
    p: PotentialSpec,
    x0: float,
    cfg: IntegrationConfig,
    mode: TimeMode = TimeMode.REAL,
    mass: float = 1.0,
    hbar: float = 1.0,
) -> TrajectoryRecord:
    """Integrate the truncated hierarchy from ``initial`` over ``cfg.t_final``.

    Records the jet at the start, at every ``record_stride`` steps and at the
    end. Blow-up truncates the record; adaptive step exhaustion raises
    StepRejectionError.
    """
    if not math.isclose(initial.position, x0, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(
            f"Initial jet lives at x={initial.position}, trajectory is at x0={x0}"
        )
    if not initial.valid:
        raise InvalidJetError("Initial jet is not finite")
    mode = TimeMode(mode)
    vstack = derivative_stack(p, x0, initial.order)
    f = _vector_field(vstack, mass, hbar, mode)
    t0 = initial.time
    n_steps, record_times = _record_grid(cfg, t0)
    logger.debug(
        "Propagating N=%s at x0=%s (%s, %s, %s steps)",
        initial.order,
        x0,
        mode,
        cfg.scheme,
        n_steps,
    )

    if cfg.scheme == "rk45":
        return _propagate_adaptive(initial, f, x0, cfg, mode, vstack, record_times)

    rows = [initial.coeffs.copy()]
    times = [t0]
    y = initial.coeffs.copy()
    t_prev = t0
    for k in range(1, n_steps + 1):
        t_k = t0 + (cfg.t_final if k == n_steps else k * cfg.dt)
        y = _rk4(f, y, t_k - t_prev)
        if not np.all(np.isfinite(y)):
            return _blown_up(mode, x0, times, rows, vstack, k, t_k)
        if k % cfg.record_stride == 0 or k == n_steps:
            rows.append(y.copy())
            times.append(t_k)
        t_prev = t_k

    return TrajectoryRecord(
        mode=mode,
        x0=x0,
        times=np.array(times),
        coeffs=np.array(rows),
        vstack=vstack,
    )


def _blown_up(mode, x0, times, rows, vstack, index, t) -> TrajectoryRecord:
    message = f"jet became non-finite at step {index} (t={t:.6g})"
    logger.warning("Blow-up for N=%s at x0=%s: %s", vstack.size - 1, x0, message)
    return TrajectoryRecord(
        mode=mode,
        x0=x0,
        times=np.array(times),
        coeffs=np.array(rows),
        vstack=vstack,
        blew_up=True,
        blowup_index=index,
        blowup_time=t,
        diagnostic=message,
    )


def _propagate_adaptive(
    initial: PhaseJet,
    f: Callable[[np.ndarray], np.ndarray],
    x0: float,
    cfg: IntegrationConfig,
    mode: TimeMode,
    vstack: np.ndarray,
    record_times: np.ndarray,
) -> TrajectoryRecord:
    sol = solve_ivp(
        lambda t, y: f(y),
        (record_times[0], record_times[-1]),
        initial.coeffs,
        method="RK45",
        t_eval=record_times,
        rtol=cfg.rtol,
        atol=cfg.atol,
    )
    coeffs = sol.y.T
    finite = np.all(np.isfinite(coeffs), axis=1)
    if not np.all(finite):
        bad = int(np.argmin(finite))
        return _blown_up(
            mode,
            x0,
            list(sol.t[:bad]),
            list(coeffs[:bad]),
            vstack,
            bad,
            float(sol.t[bad]),
        )
    if sol.status < 0:
        last = float(sol.t[-1]) if sol.t.size else float(record_times[0])
        raise StepRejectionError(
            f"RK45 gave up for N={initial.order}: {sol.message}", last_good_time=last
        )
    return TrajectoryRecord(
        mode=mode, x0=x0, times=sol.t, coeffs=coeffs, vstack=vstack
    )
