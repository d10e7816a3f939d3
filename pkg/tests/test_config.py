"""
Unit tests for configuration loading, presets and user defaults
"""

import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import pytest

from zevca import config
from zevca.config import (
    DEFAULT_OUTPUT_DIR,
    ConfigError,
    list_presets,
    load_config,
    load_preset,
    load_user_defaults,
    parse_config,
    resolve_max_workers,
    resolve_output_dir,
)
from zevca.potentials import EckartPotential, QuarticPotential

VALID = """\
experiment: eigen
potential:
  kind: quartic
  a: 0.5
  b: 1.0
gaussian:
  alpha0: 0.5
  xc: 1.0
n_list: [2, 4]
integration:
  dt: 1.0e-2
  t_final: 10.0
oracle:
  xmin: -10.0
  xmax: 10.0
  npoints: 1024
  t_final: 10.0
"""


class TestParseConfig(unittest.TestCase):
    def test_valid_config_with_defaults(self):
        cfg = parse_config(VALID)
        self.assertEqual(cfg.experiment, "eigen")
        self.assertIsInstance(cfg.potential, QuarticPotential)
        self.assertEqual(cfg.n_list, [2, 4])
        self.assertEqual(cfg.x0, 0.0)
        self.assertEqual(cfg.mass, 1.0)
        self.assertEqual(cfg.integration.scheme, "rk4")
        self.assertEqual(cfg.detection.window, 0.2)
        self.assertEqual(cfg.oracle.npoints, 1024)
        self.assertIsNone(cfg.output_dir)

    def test_n_list_defaults(self):
        cfg = parse_config(VALID.replace("n_list: [2, 4]\n", ""))
        self.assertEqual(cfg.n_list, [2, 4, 6, 8, 10])

    def test_invalid_value_names_field_and_line(self):
        text = VALID.replace("alpha0: 0.5", "alpha0: -1.0")
        with pytest.raises(ConfigError) as excinfo:
            parse_config(text, source="bad.yml")
        self.assertEqual(excinfo.value.line, 7)
        self.assertIn("bad.yml:7", str(excinfo.value))
        self.assertIn("gaussian.alpha0", str(excinfo.value))

    def test_unknown_key_rejected(self):
        text = VALID + "colour: blue\n"
        with pytest.raises(ConfigError, match="colour") as excinfo:
            parse_config(text)
        self.assertEqual(excinfo.value.line, 18)

    def test_missing_union_field_points_at_potential(self):
        text = VALID.replace(
            "  kind: quartic\n  a: 0.5\n  b: 1.0\n", "  kind: eckart\n  height: 1.0\n"
        )
        with pytest.raises(ConfigError, match="beta") as excinfo:
            parse_config(text)
        self.assertEqual(excinfo.value.line, 2)

    def test_malformed_yaml(self):
        with pytest.raises(ConfigError, match="invalid YAML") as excinfo:
            parse_config("experiment: [tunnel\npotential: {}\n")
        self.assertIsNotNone(excinfo.value.line)

    def test_top_level_must_be_mapping(self):
        with pytest.raises(ConfigError, match="mapping"):
            parse_config("- 1\n- 2\n")

    def test_invalid_oracle_grid(self):
        with pytest.raises(ConfigError, match="power of two"):
            parse_config(VALID.replace("npoints: 1024", "npoints: 1000"))

    def test_negative_order(self):
        with pytest.raises(ConfigError, match="n_list"):
            parse_config(VALID.replace("[2, 4]", "[2, -4]"))

    def test_load_config_from_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "exp.yml"
            path.write_text(VALID)
            self.assertEqual(load_config(path).experiment, "eigen")
            with pytest.raises(ConfigError, match="Cannot read"):
                load_config(Path(tmp) / "missing.yml")


class TestPresets(unittest.TestCase):
    def test_bundled_presets(self):
        self.assertEqual(
            list_presets(),
            [
                "eckart_e20",
                "eckart_e20_near_top",
                "eckart_p0",
                "eckart_p0_near_top",
                "harmonic",
                "morse_h2",
                "quartic",
            ],
        )

    def test_every_preset_validates(self):
        for name in list_presets():
            cfg = load_preset(name)
            self.assertTrue(cfg.n_list, f"{name} should list truncation orders")

    def test_eckart_preset(self):
        cfg = load_preset("eckart_e20")
        self.assertEqual(cfg.experiment, "tunnel")
        self.assertIsInstance(cfg.potential, EckartPotential)
        self.assertEqual(cfg.mass, 30.0)
        # Mean kinetic energy pc^2 / 2m is half the barrier height
        self.assertAlmostEqual(cfg.gaussian.pc**2 / (2 * cfg.mass), 20.0)

    def test_near_top_variants_only_move_the_packet(self):
        for name in ("eckart_e20", "eckart_p0"):
            verbatim = load_preset(name).model_dump()
            near_top = load_preset(f"{name}_near_top").model_dump()
            self.assertEqual(verbatim["gaussian"]["xc"], -1.5)
            self.assertEqual(near_top["gaussian"]["xc"], -0.15)
            verbatim["gaussian"].pop("xc")
            near_top["gaussian"].pop("xc")
            self.assertEqual(verbatim, near_top)

    def test_tunnel_presets_stop_on_flux_decay(self):
        for name in list_presets():
            cfg = load_preset(name)
            if cfg.experiment == "tunnel":
                self.assertIsNotNone(cfg.oracle.stop_tol, name)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="Available presets: eckart_e20"):
            load_preset("nope")


class TestUserDefaults(unittest.TestCase):
    def setUp(self):
        config._cached_defaults = None
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "defaults.yml"

    def tearDown(self):
        config._cached_defaults = None
        self.tmp.cleanup()

    def test_missing_file_gives_empty_defaults(self):
        with patch.dict(os.environ, {"ZEVCA_CONFIG_FILE": str(self.path)}):
            self.assertEqual(load_user_defaults(use_cache=False), {})

    def test_reads_and_caches(self):
        self.path.write_text("output_dir: /tmp/zevca\nmax_workers: 3\n")
        with patch.dict(os.environ, {"ZEVCA_CONFIG_FILE": str(self.path)}):
            defaults = load_user_defaults()
            expected = {"output_dir": Path("/tmp/zevca"), "max_workers": 3}
            self.assertEqual(defaults, expected)
            self.path.write_text("max_workers: 5\n")
            self.assertEqual(load_user_defaults()["max_workers"], 3)
            self.assertEqual(load_user_defaults(use_cache=False)["max_workers"], 5)

    def test_invalid_defaults(self):
        self.path.write_text("threads: 4\n")
        with patch.dict(os.environ, {"ZEVCA_CONFIG_FILE": str(self.path)}):
            with pytest.raises(ConfigError, match="Failed to parse"):
                load_user_defaults(use_cache=False)


class TestResolution(unittest.TestCase):
    def setUp(self):
        self.cfg = parse_config(VALID)

    @patch("zevca.config.load_user_defaults", return_value={})
    def test_output_dir_precedence(self, _mock_defaults):
        with_dir = self.cfg.model_copy(update={"output_dir": Path("from-config")})
        with patch.dict(os.environ, {"ZEVCA_OUT": "from-env"}):
            self.assertEqual(resolve_output_dir("from-cli", with_dir), Path("from-cli"))
            self.assertEqual(resolve_output_dir(None, with_dir), Path("from-env"))
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(resolve_output_dir(None, with_dir), Path("from-config"))
            self.assertEqual(resolve_output_dir(None, self.cfg), DEFAULT_OUTPUT_DIR)

    @patch("zevca.config.load_user_defaults", return_value={"output_dir": "~/runs"})
    def test_output_dir_from_user_defaults(self, _mock_defaults):
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(
                resolve_output_dir(None, self.cfg), Path("~/runs").expanduser()
            )

    @patch("zevca.config.load_user_defaults", return_value={"max_workers": 7})
    def test_max_workers(self, _mock_defaults):
        self.assertEqual(resolve_max_workers(self.cfg, deterministic=True), 1)
        self.assertEqual(resolve_max_workers(self.cfg), 7)
        pinned = self.cfg.model_copy(update={"max_workers": 2})
        self.assertEqual(resolve_max_workers(pinned), 2)

    @patch("zevca.config.load_user_defaults", return_value={})
    def test_max_workers_bounded_by_orders(self, _mock_defaults):
        self.assertLessEqual(resolve_max_workers(self.cfg), len(self.cfg.n_list))
        self.assertGreaterEqual(resolve_max_workers(self.cfg), 1)


if __name__ == "__main__":
    unittest.main()
