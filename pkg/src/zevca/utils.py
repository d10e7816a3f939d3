"""Shared output helpers for zevca runs."""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from filelock import FileLock
from filelock import Timeout as FileLockTimeout

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.12e"
SUMMARY_FILE = "summary.json"
LOCK_FILE = ".zevca.lock"
# Another CLI process writing into the same directory holds the lock
LOCK_TIMEOUT = 60

TUNNEL_COLUMNS = ("t", "density", "current", "cumulative_T")
TUNNEL_ORACLE_COLUMNS = ("t", "density_at_x0", "T_exact")
EIGEN_COLUMNS = ("tau", "energy")
EIGEN_ORACLE_COLUMNS = ("tau", "rayleigh_energy")
TUNNEL_ORACLE_FILE = "tunnel_oracle.csv"
EIGEN_ORACLE_FILE = "eigen_oracle.csv"
COMPARE_FILE = "compare.csv"


def tunnel_file(n: int) -> str:
    return f"tunnel_N{n}.csv"


def eigen_file(n: int) -> str:
    return f"eigen_N{n}.csv"


def compare_columns(n_list: Sequence[int]) -> tuple[str, ...]:
    return ("t", *(f"zevca_density_N{n}" for n in n_list), "oracle_density")


def _safe_join(base: Path, *parts: str) -> Path:
    """Join path parts under *base*, raising ValueError on traversal attempts.

    Args:
        base: The resolved base directory that all results must stay within.
        *parts: Path components to append.

    Returns:
        The resolved joined path.

    Raises:
        ValueError: If the resolved path would escape *base*.
    """
    joined = base.joinpath(*parts).resolve()
    if not joined.is_relative_to(base):
        raise ValueError(
            f"Path traversal detected: resolved path '{joined}' "
            f"is outside base directory '{base}'"
        )
    return joined


def write_csv(
    out_dir: Path, name: str, columns: Sequence[str], data: Sequence[np.ndarray]
) -> Path:
    """Write equal-length columns as a headed CSV with %.12e numbers.

    Returns:
        The path written.
    """
    if len(columns) != len(data):
        raise ValueError(f"{len(columns)} column names for {len(data)} columns")
    lengths = {np.asarray(col).size for col in data}
    if len(lengths) > 1:
        raise ValueError(f"CSV columns differ in length: {sorted(lengths)}")
    path = _safe_join(out_dir.resolve(), name)
    table = np.column_stack([np.asarray(col, dtype=float) for col in data])
    np.savetxt(
        path,
        table,
        fmt=CSV_FORMAT,
        delimiter=",",
        header=",".join(columns),
        comments="",
    )
    logger.debug("Wrote %s rows to %s", table.shape[0], path)
    return path


def write_text(out_dir: Path, name: str, text: str) -> Path:
    path = _safe_join(out_dir.resolve(), name)
    path.write_text(text, encoding="utf-8")
    return path


@contextmanager
def output_lock(out_dir: Path, timeout: float = LOCK_TIMEOUT) -> Iterator[Path]:
    """Create ``out_dir`` and hold its cross-process lock while writing.

    Raises:
        RuntimeError: If the lock cannot be acquired within ``timeout``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock_path = out_dir / LOCK_FILE
    try:
        with FileLock(lock_path, timeout=timeout):
            yield out_dir.resolve()
    except FileLockTimeout as e:
        raise RuntimeError(
            f"Could not lock {out_dir} within {timeout}s; another run may be "
            f"writing there. Remove {lock_path} if it is stale."
        ) from e
