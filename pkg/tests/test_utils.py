"""Tests for CSV output, path safety and the output-directory lock."""

import tempfile
import unittest
from pathlib import Path

import numpy as np
import pytest
from filelock import FileLock

from zevca.utils import (
    LOCK_FILE,
    _safe_join,
    compare_columns,
    eigen_file,
    output_lock,
    tunnel_file,
    write_csv,
    write_text,
)

# ---------------------------------------------------------------------------
# _safe_join
# ---------------------------------------------------------------------------


class TestSafeJoin(unittest.TestCase):
    def test_normal_path_accepted(self):
        with tempfile.TemporaryDirectory() as tmp:
            base = Path(tmp).resolve()
            result = _safe_join(base, "tunnel_N2.csv")
            self.assertEqual(result.parent, base)

    def test_traversal_raises(self):
        with tempfile.TemporaryDirectory() as tmp:
            base = Path(tmp).resolve()
            with pytest.raises(ValueError, match="Path traversal detected"):
                _safe_join(base, "..", "summary.json")


# ---------------------------------------------------------------------------
# CSV and text output
# ---------------------------------------------------------------------------


class TestWriteCsv(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_header_and_format(self):
        path = write_csv(
            self.out, "eigen_N2.csv", ("tau", "energy"), [[0.0, 0.5], [1.0, 0.25]]
        )
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "tau,energy")
        self.assertEqual(lines[1], "0.000000000000e+00,1.000000000000e+00")
        self.assertEqual(len(lines), 3)

    def test_nan_is_written(self):
        path = write_csv(self.out, "compare.csv", ("t", "d"), [[0.0], [np.nan]])
        self.assertIn("nan", path.read_text().splitlines()[1])

    def test_mismatched_columns(self):
        with pytest.raises(ValueError, match="column names"):
            write_csv(self.out, "x.csv", ("a", "b"), [[1.0]])
        with pytest.raises(ValueError, match="differ in length"):
            write_csv(self.out, "x.csv", ("a", "b"), [[1.0], [1.0, 2.0]])

    def test_write_text(self):
        path = write_text(self.out, "summary.json", "{}")
        self.assertEqual(path.read_text(), "{}")

    def test_file_names(self):
        self.assertEqual(tunnel_file(6), "tunnel_N6.csv")
        self.assertEqual(eigen_file(16), "eigen_N16.csv")
        self.assertEqual(
            compare_columns([2, 4]),
            ("t", "zevca_density_N2", "zevca_density_N4", "oracle_density"),
        )


# ---------------------------------------------------------------------------
# output_lock
# ---------------------------------------------------------------------------


class TestOutputLock(unittest.TestCase):
    def test_creates_directory(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = Path(tmp) / "nested" / "run"
            with output_lock(target) as out:
                self.assertTrue(out.is_dir())
                self.assertTrue((out / LOCK_FILE).exists())

    def test_busy_directory_times_out(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = Path(tmp)
            with FileLock(target / LOCK_FILE):
                with pytest.raises(RuntimeError, match="another run"):
                    with output_lock(target, timeout=0.1):
                        pass


if __name__ == "__main__":
    unittest.main()
