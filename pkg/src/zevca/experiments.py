"""Experiment pipelines

Each pipeline runs the grid reference once, sweeps the truncation orders of
the phase-jet propagator (one independent propagation per N, fanned out over
a thread pool and joined before anything is written), scores every order
against the reference and persists CSV series plus a JSON summary.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from zevca.grid_oracle import (
    EDGE_DENSITY_LIMIT,
    OracleTunnelRun,
    run_oracle_eigen,
    run_oracle_tunnel,
)
from zevca.models import Diagnostic, ExperimentConfig, OrderResult, RunSummary
from zevca.observables import (
    accumulate_tunneling,
    detect_asymptote,
    detect_plateau,
    energy_series,
    flux_detected,
    harmonic_approximation_energy,
    optimal_order,
    probability_density,
    relative_error,
    validate_setup,
)
from zevca.phase_jet import TimeMode, gaussian_phase_jet
from zevca.potentials import HarmonicPotential, MorsePotential, morse_level
from zevca.propagator import StepRejectionError, TrajectoryRecord, propagate
from zevca.utils import (
    COMPARE_FILE,
    EIGEN_COLUMNS,
    EIGEN_ORACLE_COLUMNS,
    EIGEN_ORACLE_FILE,
    SUMMARY_FILE,
    TUNNEL_COLUMNS,
    TUNNEL_ORACLE_COLUMNS,
    TUNNEL_ORACLE_FILE,
    compare_columns,
    eigen_file,
    output_lock,
    tunnel_file,
    write_csv,
    write_text,
)

logger = logging.getLogger(__name__)

# Reference density at x0 must fall below this fraction of its peak by the end
FLUX_DECAY_RATIO = 1e-6


@dataclass
class OrderRun:
    """Outcome of propagating one truncation order."""

    n: int
    record: Optional[TrajectoryRecord]
    wall_clock_s: float
    error: Optional[str] = None


def _propagate_order(cfg: ExperimentConfig, n: int, mode: TimeMode) -> OrderRun:
    initial = gaussian_phase_jet(cfg.gaussian, cfg.x0, n, cfg.hbar)
    start = time.perf_counter()
    try:
        record = propagate(
            initial,
            cfg.potential,
            cfg.x0,
            cfg.integration,
            mode,
            mass=cfg.mass,
            hbar=cfg.hbar,
        )
    except StepRejectionError as e:
        logger.warning("N=%s stopped at t=%s: %s", n, e.last_good_time, e)
        return OrderRun(n, None, time.perf_counter() - start, error=str(e))
    elapsed = time.perf_counter() - start
    logger.info(
        "N=%s finished in %.3fs%s",
        n,
        elapsed,
        " (blew up)" if record.blew_up else "",
    )
    return OrderRun(n, record, elapsed)


def sweep_orders(
    cfg: ExperimentConfig, mode: TimeMode, max_workers: int = 1
) -> List[OrderRun]:
    """Propagate every N in ``cfg.n_list``; results keep the n_list order.

    The RK4 loop steps short arrays from Python and holds the GIL, so threads
    give independent per-N jobs rather than a speedup.
    """
    if max_workers <= 1 or len(cfg.n_list) == 1:
        return [_propagate_order(cfg, n, mode) for n in cfg.n_list]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda n: _propagate_order(cfg, n, mode), cfg.n_list))


def _order_result(run: OrderRun) -> OrderResult:
    result = OrderResult(n=run.n, wall_clock_s=run.wall_clock_s)
    if run.record is None:
        result.blew_up = True
    elif run.record.blew_up:
        result.blew_up = True
        result.blowup_time = run.record.blowup_time
    return result


def _failure_diagnostics(runs: List[OrderRun]) -> List[Diagnostic]:
    diagnostics = []
    for run in runs:
        if run.error is not None:
            diagnostics.append(
                Diagnostic(code="step_rejected", message=f"N={run.n}: {run.error}")
            )
        elif run.record.blew_up:
            diagnostics.append(
                Diagnostic(
                    code="blow_up",
                    message=f"N={run.n}: {run.record.diagnostic}",
                    value=run.record.blowup_time,
                )
            )
    return diagnostics


def _edge_diagnostic(max_edge: float) -> List[Diagnostic]:
    if max_edge <= EDGE_DENSITY_LIMIT:
        return []
    return [
        Diagnostic(
            code="edge_density",
            message="Reference wavefunction reached the grid edges",
            value=max_edge,
        )
    ]


def _decay_diagnostic(
    cfg: ExperimentConfig, oracle: OracleTunnelRun
) -> List[Diagnostic]:
    limit = cfg.oracle.stop_tol or FLUX_DECAY_RATIO
    residual = oracle.residual_density
    if residual <= limit:
        return []
    logger.warning(
        "Reference density at x0 is still %.3e of its peak at t=%s",
        residual,
        oracle.times[-1],
    )
    return [
        Diagnostic(
            code="flux_not_decayed",
            message=f"Reference density at x0={cfg.x0} had not decayed below "
            f"{limit:g} of its peak by t={oracle.times[-1]:g}",
            value=residual,
        )
    ]


def _summary(
    cfg: ExperimentConfig,
    results: List[OrderResult],
    preset: Optional[str],
    deterministic: bool,
    **kwargs,
) -> RunSummary:
    return RunSummary(
        experiment=cfg.experiment,
        preset=preset,
        results=results,
        optimal_n=optimal_order(results),
        deterministic=deterministic,
        config=cfg.model_dump(mode="json"),
        **kwargs,
    )


def _write_summary(out_dir: Path, summary: RunSummary) -> None:
    write_text(out_dir, SUMMARY_FILE, summary.model_dump_json(indent=2))
    logger.info("Summary written to %s", out_dir / SUMMARY_FILE)


def run_tunnel(
    cfg: ExperimentConfig,
    out_dir: Path,
    preset: Optional[str] = None,
    deterministic: bool = False,
    max_workers: int = 1,
) -> RunSummary:
    """Tunneling probability through x0 for every N against the grid T_exact.

    Writes tunnel_N{N}.csv per order, tunnel_oracle.csv and summary.json.
    """
    logger.info("Starting tunnel experiment with N in %s", cfg.n_list)
    diagnostics = validate_setup(
        cfg.potential,
        cfg.gaussian,
        cfg.x0,
        max(cfg.n_list),
        cfg.thresholds,
        cfg.hbar,
    )

    start = time.perf_counter()
    oracle = run_oracle_tunnel(
        cfg.oracle, cfg.potential, cfg.gaussian, cfg.x0, cfg.mass, cfg.hbar
    )
    oracle_elapsed = time.perf_counter() - start
    reference = oracle.terminal
    diagnostics += _edge_diagnostic(oracle.max_edge_density)
    diagnostics += _decay_diagnostic(cfg, oracle)

    runs = sweep_orders(cfg, TimeMode.REAL, max_workers)
    diagnostics += _failure_diagnostics(runs)

    results = []
    series_by_n = {}
    for run in runs:
        result = _order_result(run)
        if run.record is not None:
            series = accumulate_tunneling(run.record, cfg.mass, cfg.hbar)
            series.asymptote = detect_asymptote(
                series, cfg.detection.window, cfg.detection.tol
            )
            series.converged = series.asymptote is not None
            series_by_n[run.n] = series
            if not flux_detected(series):
                diagnostics.append(
                    Diagnostic(
                        code="no_flux",
                        message=f"N={run.n}: |T| never rose above the detection "
                        "floor; the run carries no tunneling signal",
                        value=float(np.max(np.abs(series.cumulative))),
                    )
                )
            result.csv_file = tunnel_file(run.n)
            if not run.record.blew_up:
                result.terminal_value = series.terminal
                result.relative_error = relative_error(series.terminal, reference)
                result.converged = series.converged
            if np.any(series.saturated):
                diagnostics.append(
                    Diagnostic(
                        code="saturated_density",
                        message=f"N={run.n}: density overflowed or fell below the "
                        "nodal floor in some samples",
                        value=float(np.count_nonzero(series.saturated)),
                    )
                )
        results.append(result)

    summary = _summary(
        cfg,
        results,
        preset,
        deterministic,
        reference_value=reference,
        reference_kind="oracle_transmitted_probability",
        diagnostics=diagnostics,
        oracle_wall_clock_s=oracle_elapsed,
        oracle_csv_file=TUNNEL_ORACLE_FILE,
    )

    with output_lock(out_dir) as out:
        for n, series in series_by_n.items():
            write_csv(
                out,
                tunnel_file(n),
                TUNNEL_COLUMNS,
                [series.times, series.density, series.current, series.cumulative],
            )
        write_csv(
            out,
            TUNNEL_ORACLE_FILE,
            TUNNEL_ORACLE_COLUMNS,
            [oracle.times, oracle.density, oracle.transmitted],
        )
        _write_summary(out, summary)
    return summary


def _eigen_references(cfg: ExperimentConfig) -> dict[str, float]:
    refs = {}
    approx = harmonic_approximation_energy(cfg.potential, cfg.x0, cfg.mass, cfg.hbar)
    if approx is not None:
        refs["harmonic_approximation"] = approx
    if isinstance(cfg.potential, MorsePotential):
        refs["morse_analytic"] = morse_level(cfg.potential, cfg.mass, cfg.hbar)
    if isinstance(cfg.potential, HarmonicPotential):
        refs["harmonic_exact"] = 0.5 * cfg.hbar * cfg.potential.omega
    return refs


def run_eigen(
    cfg: ExperimentConfig,
    out_dir: Path,
    preset: Optional[str] = None,
    deterministic: bool = False,
    max_workers: int = 1,
) -> RunSummary:
    """Ground-state energy plateau for every N against the grid Rayleigh energy.

    Writes eigen_N{N}.csv per order, eigen_oracle.csv and summary.json.
    """
    logger.info("Starting eigen experiment with N in %s", cfg.n_list)
    diagnostics = validate_setup(
        cfg.potential,
        cfg.gaussian,
        cfg.x0,
        max(cfg.n_list),
        cfg.thresholds,
        cfg.hbar,
    )

    start = time.perf_counter()
    oracle = run_oracle_eigen(
        cfg.oracle, cfg.potential, cfg.gaussian, cfg.mass, cfg.hbar
    )
    oracle_elapsed = time.perf_counter() - start
    reference = oracle.terminal
    diagnostics += _edge_diagnostic(oracle.max_edge_density)

    runs = sweep_orders(cfg, TimeMode.IMAGINARY, max_workers)
    diagnostics += _failure_diagnostics(runs)

    results = []
    series_by_n = {}
    for run in runs:
        result = _order_result(run)
        if run.record is not None:
            series = energy_series(run.record, cfg.mass, cfg.hbar)
            series.window = cfg.detection.window
            series.plateau = detect_plateau(
                series, cfg.detection.window, cfg.detection.tol
            )
            series.converged = series.plateau is not None
            series_by_n[run.n] = series
            result.csv_file = eigen_file(run.n)
            if not run.record.blew_up:
                result.terminal_value = series.terminal
                result.relative_error = relative_error(series.terminal, reference)
                result.converged = series.converged
        results.append(result)

    summary = _summary(
        cfg,
        results,
        preset,
        deterministic,
        reference_value=reference,
        reference_kind="oracle_rayleigh_energy",
        extra_references=_eigen_references(cfg),
        diagnostics=diagnostics,
        oracle_wall_clock_s=oracle_elapsed,
        oracle_csv_file=EIGEN_ORACLE_FILE,
    )

    with output_lock(out_dir) as out:
        for n, series in series_by_n.items():
            write_csv(
                out, eigen_file(n), EIGEN_COLUMNS, [series.taus, series.estimates]
            )
        write_csv(
            out,
            EIGEN_ORACLE_FILE,
            EIGEN_ORACLE_COLUMNS,
            [oracle.taus, oracle.energies],
        )
        _write_summary(out, summary)
    return summary


def _densities_on(record: TrajectoryRecord, times: np.ndarray, hbar: float):
    """Densities of ``record`` on ``times``; NaN past the end of the record."""
    values = np.full(times.size, np.nan)
    count = min(len(record), times.size)
    values[:count] = [probability_density(record.jet(i), hbar) for i in range(count)]
    return values


def run_compare(
    cfg: ExperimentConfig,
    out_dir: Path,
    preset: Optional[str] = None,
    deterministic: bool = False,
    max_workers: int = 1,
) -> RunSummary:
    """Side-by-side local density |psi(x0,t)|^2 from every N and the grid.

    The reference series is linearly interpolated onto the propagator times
    when the two time grids differ; that is recorded in the summary.
    """
    logger.info("Starting compare experiment with N in %s", cfg.n_list)
    diagnostics = validate_setup(
        cfg.potential,
        cfg.gaussian,
        cfg.x0,
        max(cfg.n_list),
        cfg.thresholds,
        cfg.hbar,
    )

    start = time.perf_counter()
    oracle = run_oracle_tunnel(
        cfg.oracle, cfg.potential, cfg.gaussian, cfg.x0, cfg.mass, cfg.hbar
    )
    oracle_elapsed = time.perf_counter() - start
    diagnostics += _edge_diagnostic(oracle.max_edge_density)

    runs = sweep_orders(cfg, TimeMode.REAL, max_workers)
    diagnostics += _failure_diagnostics(runs)

    # All orders share one integration grid; blown-up records are prefixes of it
    longest = max(
        (run.record for run in runs if run.record is not None),
        key=len,
        default=None,
    )
    if longest is None:
        times = oracle.times
    else:
        times = longest.times[longest.times <= oracle.times[-1] * (1 + 1e-12)]
    interpolated = not (
        times.size == oracle.times.size and np.allclose(times, oracle.times)
    )
    if interpolated:
        oracle_density = np.interp(times, oracle.times, oracle.density)
    else:
        oracle_density = oracle.density
    reference = float(np.max(oracle_density))

    results = []
    columns = []
    for run in runs:
        result = _order_result(run)
        if run.record is None:
            densities = np.full(times.size, np.nan)
        else:
            densities = _densities_on(run.record, times, cfg.hbar)
            finite = np.isfinite(densities)
            if np.any(finite):
                deviation = np.abs(densities[finite] - oracle_density[finite])
                result.max_deviation = float(deviation.max())
                result.rms_deviation = float(np.sqrt(np.mean(deviation**2)))
                if reference > 0:
                    result.relative_error = result.max_deviation / reference
                result.terminal_value = float(densities[finite][-1])
            result.csv_file = COMPARE_FILE
        columns.append(densities)
        results.append(result)

    summary = _summary(
        cfg,
        results,
        preset,
        deterministic,
        reference_value=reference,
        reference_kind="oracle_peak_local_density",
        interpolated=interpolated,
        diagnostics=diagnostics,
        oracle_wall_clock_s=oracle_elapsed,
        oracle_csv_file=COMPARE_FILE,
    )

    with output_lock(out_dir) as out:
        write_csv(
            out,
            COMPARE_FILE,
            compare_columns(cfg.n_list),
            [times, *columns, oracle_density],
        )
        _write_summary(out, summary)
    return summary


PIPELINES = {
    "tunnel": run_tunnel,
    "eigen": run_eigen,
    "compare": run_compare,
}


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: Path,
    preset: Optional[str] = None,
    deterministic: bool = False,
    max_workers: int = 1,
) -> RunSummary:
    return PIPELINES[cfg.experiment](
        cfg,
        Path(out_dir),
        preset=preset,
        deterministic=deterministic,
        max_workers=max_workers,
    )
