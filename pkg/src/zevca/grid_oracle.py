"""Split-operator Fourier reference solver on a uniform periodic grid

Real-time steps solve the time-dependent Schroedinger equation; imaginary-time
steps use the same progress variable as the phase-jet propagator, a step
d tau being the complex time step -i hbar d tau / 2, so both relax with the
same rate. Imaginary steps renormalize the state.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import fft

from zevca.models import GaussianParams, OracleConfig
from zevca.phase_jet import TimeMode
from zevca.potentials import PotentialSpec

logger = logging.getLogger(__name__)

MIN_POINTS = 256
CONTAINMENT_RATIO = 1e-12
EDGE_DENSITY_LIMIT = 1e-10
# Grid points per side watched by the edge-density monitor
EDGE_FRACTION = 1 / 32


class OracleError(RuntimeError):
    """Raised when a reference run cannot proceed."""

    pass


class OracleSetupError(OracleError):
    """Raised for unusable grids: containment, size or Nyquist violations."""

    pass


def _check_npoints(npoints: int) -> None:
    if npoints < MIN_POINTS or npoints & (npoints - 1):
        raise OracleSetupError(
            f"npoints must be a power of two >= {MIN_POINTS}, got {npoints}"
        )


@dataclass(frozen=True)
class GridState:
    """Wavefunction samples at x_j = xmin + j dx, j = 0..npoints-1."""

    xmin: float
    xmax: float
    npoints: int
    psi: np.ndarray
    mass: float = 1.0
    hbar: float = 1.0
    time: float = 0.0

    def __post_init__(self):
        _check_npoints(self.npoints)
        if self.xmax <= self.xmin:
            raise OracleSetupError(f"Empty grid [{self.xmin}, {self.xmax})")
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != (self.npoints,):
            raise OracleSetupError(
                f"psi has shape {psi.shape}, expected ({self.npoints},)"
            )
        if not np.all(np.isfinite(psi)):
            raise OracleError(f"Non-finite wavefunction at t={self.time}")
        object.__setattr__(self, "psi", psi)

    @property
    def dx(self) -> float:
        return (self.xmax - self.xmin) / self.npoints

    @property
    def x(self) -> np.ndarray:
        return self.xmin + self.dx * np.arange(self.npoints)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * fft.fftfreq(self.npoints, d=self.dx)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2


def initialize_gaussian(
    xmin: float,
    xmax: float,
    npoints: int,
    g: GaussianParams,
    mass: float = 1.0,
    hbar: float = 1.0,
) -> GridState:
    """Sample and normalize the Gaussian wavepacket on the grid.

    Raises:
        OracleSetupError: If |psi| at either edge exceeds 1e-12 of its peak.
    """
    _check_npoints(npoints)
    x = xmin + (xmax - xmin) / npoints * np.arange(npoints)
    psi = g.wavefunction(x, hbar)
    magnitude = np.abs(psi)
    peak = magnitude.max()
    edge = max(magnitude[0], magnitude[-1], abs(g.wavefunction(xmax, hbar)))
    if peak == 0 or edge > CONTAINMENT_RATIO * peak:
        raise OracleSetupError(
            f"Gaussian (xc={g.xc}, alpha0={g.alpha0}) is not contained in "
            f"[{xmin}, {xmax}): edge/peak = {edge / peak if peak else math.inf:.3e}"
        )
    dx = (xmax - xmin) / npoints
    psi = psi / math.sqrt(np.sum(magnitude**2) * dx)
    return GridState(xmin, xmax, npoints, psi, mass=mass, hbar=hbar)


class SplitOperatorPropagator:
    """Strang splitting exp(-iV dt/2h) exp(-iT dt/h) exp(-iV dt/2h) with the
    exponentials cached for one grid, potential and step size."""

    def __init__(
        self,
        xmin: float,
        xmax: float,
        npoints: int,
        p: PotentialSpec,
        dt: float,
        mode: TimeMode = TimeMode.REAL,
        mass: float = 1.0,
        hbar: float = 1.0,
    ):
        _check_npoints(npoints)
        if dt <= 0:
            raise OracleSetupError(f"Step size must be positive, got {dt}")
        self.mode = TimeMode(mode)
        self.dt = dt
        self.hbar = hbar
        dx = (xmax - xmin) / npoints
        x = xmin + dx * np.arange(npoints)
        k = 2.0 * np.pi * fft.fftfreq(npoints, d=dx)

        if self.mode is TimeMode.REAL:
            nyquist_phase = hbar * (np.pi / dx) ** 2 * dt / (2.0 * mass)
            if nyquist_phase >= np.pi:
                raise OracleSetupError(
                    f"dt={dt} gives a kinetic phase of {nyquist_phase:.3f} rad at "
                    f"the Nyquist mode; it must stay below pi"
                )
            dt_eff = complex(dt)
        else:
            dt_eff = -0.5j * hbar * dt

        self.potential = np.asarray(p.value(x), dtype=float)
        self._half_potential = np.exp(-0.5j * self.potential * dt_eff / hbar)
        self._kinetic = np.exp(-0.5j * hbar * k**2 * dt_eff / mass)

    @classmethod
    def for_state(
        cls, state: GridState, p: PotentialSpec, dt: float, mode: TimeMode
    ) -> "SplitOperatorPropagator":
        return cls(
            state.xmin,
            state.xmax,
            state.npoints,
            p,
            dt,
            mode,
            mass=state.mass,
            hbar=state.hbar,
        )

    def __call__(self, state: GridState) -> GridState:
        psi = self._half_potential * state.psi
        psi = fft.ifft(self._kinetic * fft.fft(psi))
        psi = self._half_potential * psi
        if self.mode is TimeMode.IMAGINARY:
            psi = psi / math.sqrt(np.sum(np.abs(psi) ** 2) * state.dx)
        if not np.all(np.isfinite(psi)):
            raise OracleError(f"Split-operator step from t={state.time} diverged")
        return replace(state, psi=psi, time=state.time + self.dt)


def split_operator_step(
    s: GridState, p: PotentialSpec, dt: float, mode: TimeMode = TimeMode.REAL
) -> GridState:
    """One half-potential, full-kinetic, half-potential step of size ``dt``."""
    return SplitOperatorPropagator.for_state(s, p, dt, mode)(s)


def norm(s: GridState) -> float:
    """Total probability sum |psi|^2 dx."""
    return float(np.sum(s.density) * s.dx)


def transmitted_probability(s: GridState, xcut: float) -> float:
    """Probability beyond ``xcut``; a node exactly on the cut counts half."""
    if not s.xmin <= xcut < s.xmax:
        raise ValueError(f"xcut={xcut} lies outside the grid [{s.xmin}, {s.xmax})")
    x = s.x
    weights = (x > xcut).astype(float)
    weights[np.isclose(x, xcut, rtol=0.0, atol=1e-9 * s.dx)] = 0.5
    return float(np.sum(weights * s.density) * s.dx)


def rayleigh_energy(s: GridState, p: PotentialSpec) -> float:
    """<psi|H|psi> / <psi|psi> with the kinetic term evaluated spectrally."""
    psi_k = fft.fft(s.psi)
    weight_k = np.abs(psi_k) ** 2
    kinetic = np.sum(s.hbar**2 * s.k**2 / (2.0 * s.mass) * weight_k) / np.sum(
        weight_k
    )
    density = s.density
    potential = np.sum(np.asarray(p.value(s.x), dtype=float) * density) / np.sum(
        density
    )
    return float(kinetic + potential)


def local_density(s: GridState, x0: float) -> float:
    """|psi(x0)|^2, linearly interpolated between grid nodes."""
    if not s.xmin <= x0 < s.xmax:
        raise ValueError(f"x0={x0} lies outside the grid [{s.xmin}, {s.xmax})")
    return float(np.interp(x0, s.x, s.density))


def edge_density(s: GridState) -> float:
    """Largest |psi|^2 among the outermost grid points on either side."""
    n_edge = max(1, int(s.npoints * EDGE_FRACTION))
    density = s.density
    return float(max(density[:n_edge].max(), density[-n_edge:].max()))


@dataclass
class OracleTunnelRun:
    """Recorded reference tunneling run."""

    times: np.ndarray
    density: np.ndarray
    transmitted: np.ndarray
    final_state: GridState
    max_edge_density: float = 0.0
    max_norm_drift: float = 0.0
    stopped_early: bool = False

    @property
    def terminal(self) -> float:
        return float(self.transmitted[-1])

    @property
    def residual_density(self) -> float:
        """Final |psi(x0)|^2 relative to its peak over the run."""
        peak = float(self.density.max())
        return float(self.density[-1]) / peak if peak > 0 else 0.0


@dataclass
class OracleEigenRun:
    """Recorded reference imaginary-time relaxation."""

    taus: np.ndarray
    energies: np.ndarray
    final_state: GridState
    max_edge_density: float = 0.0
    stopped_early: bool = False

    @property
    def terminal(self) -> float:
        return float(self.energies[-1])


def _schedule(dt: float, t_final: float) -> tuple[int, float]:
    """Step count and size of the last step, which lands exactly on t_final."""
    n_steps = max(1, math.ceil(t_final / dt - 1e-9))
    return n_steps, t_final - (n_steps - 1) * dt


def _stepper(
    state: GridState, p: PotentialSpec, dt: float, last_dt: float, mode: TimeMode
):
    """Propagators for the regular steps and for the final one."""
    regular = SplitOperatorPropagator.for_state(state, p, dt, mode)
    if math.isclose(last_dt, dt, rel_tol=1e-9):
        return regular, regular
    return regular, SplitOperatorPropagator.for_state(state, p, last_dt, mode)


def _settled(values: list, times: list, window: float, tol: float) -> bool:
    start = times[-1] - window * (times[-1] - times[0])
    tail = np.asarray([v for v, t in zip(values, times) if t >= start])
    if tail.size < 10:
        return False
    return bool(np.ptp(tail) < tol * max(abs(values[-1]), 1e-12))


def _warn_edges(max_edge: float) -> None:
    if max_edge > EDGE_DENSITY_LIMIT:
        logger.warning(
            "Edge density reached %.3e (limit %.0e); the box may be too small",
            max_edge,
            EDGE_DENSITY_LIMIT,
        )


def run_oracle_tunnel(
    cfg: OracleConfig,
    p: PotentialSpec,
    g: GaussianParams,
    x0: float,
    mass: float = 1.0,
    hbar: float = 1.0,
) -> OracleTunnelRun:
    """Real-time reference run recording |psi(x0,t)|^2 and T(t) beyond x0.

    With ``cfg.stop_tol`` set, the run ends once the density at x0 has fallen
    below stop_tol of its running maximum and T has settled over the trailing
    ``cfg.stop_window`` of the elapsed time.
    """
    state = initialize_gaussian(cfg.xmin, cfg.xmax, cfg.npoints, g, mass, hbar)
    if not cfg.xmin <= x0 < cfg.xmax:
        raise OracleSetupError(f"x0={x0} lies outside the grid")
    n_steps, last_dt = _schedule(cfg.dt, cfg.t_final)
    propagate, finish = _stepper(state, p, cfg.dt, last_dt, TimeMode.REAL)
    logger.debug(
        "Oracle tunnel run: %s points on [%s, %s), dt=%s, %s steps",
        cfg.npoints,
        cfg.xmin,
        cfg.xmax,
        cfg.dt,
        n_steps,
    )

    times = [0.0]
    density = [local_density(state, x0)]
    transmitted = [transmitted_probability(state, x0)]
    peak_density = density[0]
    max_edge = edge_density(state)
    max_drift = 0.0
    stopped_early = False
    for k in range(1, n_steps + 1):
        state = finish(state) if k == n_steps else propagate(state)
        if k % cfg.record_stride and k != n_steps:
            continue
        times.append(cfg.t_final if k == n_steps else k * cfg.dt)
        density.append(local_density(state, x0))
        transmitted.append(transmitted_probability(state, x0))
        peak_density = max(peak_density, density[-1])
        max_edge = max(max_edge, edge_density(state))
        max_drift = max(max_drift, abs(norm(state) - 1.0))
        if (
            cfg.stop_tol is not None
            and density[-1] < cfg.stop_tol * peak_density
            and _settled(transmitted, times, cfg.stop_window, cfg.stop_tol)
        ):
            stopped_early = k < n_steps
            break

    _warn_edges(max_edge)
    logger.info(
        "Oracle tunnel run finished at t=%s: T=%.10g", times[-1], transmitted[-1]
    )
    return OracleTunnelRun(
        times=np.array(times),
        density=np.array(density),
        transmitted=np.array(transmitted),
        final_state=state,
        max_edge_density=max_edge,
        max_norm_drift=max_drift,
        stopped_early=stopped_early,
    )


def run_oracle_eigen(
    cfg: OracleConfig,
    p: PotentialSpec,
    g: GaussianParams,
    mass: float = 1.0,
    hbar: float = 1.0,
    initial: Optional[GridState] = None,
) -> OracleEigenRun:
    """Imaginary-time relaxation recording the Rayleigh energy.

    With ``cfg.stop_tol`` set, the run ends once the energy varies by less
    than stop_tol (relative) over the trailing ``cfg.stop_window``.
    """
    state = initial or initialize_gaussian(
        cfg.xmin, cfg.xmax, cfg.npoints, g, mass, hbar
    )
    n_steps, last_dt = _schedule(cfg.dt, cfg.t_final)
    propagate, finish = _stepper(state, p, cfg.dt, last_dt, TimeMode.IMAGINARY)

    taus = [state.time]
    energies = [rayleigh_energy(state, p)]
    max_edge = edge_density(state)
    stopped_early = False
    for k in range(1, n_steps + 1):
        state = finish(state) if k == n_steps else propagate(state)
        if k % cfg.record_stride and k != n_steps:
            continue
        taus.append(state.time)
        energies.append(rayleigh_energy(state, p))
        max_edge = max(max_edge, edge_density(state))
        if cfg.stop_tol is not None and _settled(
            energies, taus, cfg.stop_window, cfg.stop_tol
        ):
            stopped_early = k < n_steps
            break

    _warn_edges(max_edge)
    logger.info(
        "Oracle eigen run finished at tau=%s: E=%.10g", taus[-1], energies[-1]
    )
    return OracleEigenRun(
        taus=np.array(taus),
        energies=np.array(energies),
        final_state=state,
        max_edge_density=max_edge,
        stopped_early=stopped_early,
    )
