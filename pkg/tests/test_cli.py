"""
Tests for the zevca command-line entry point and error reporting hooks
"""

import io
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import pytest

from zevca import before_send, cli, config, init_error_reporting
from zevca.cli import (
    EXIT_ALL_BLEW_UP,
    EXIT_CONFIG_ERROR,
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_ORACLE_FAILURE,
    main,
    parse_n_list,
)
from zevca.config import ConfigError
from zevca.grid_oracle import OracleSetupError
from zevca.models import OrderResult, RunSummary


def _summary(*results):
    return RunSummary(experiment="tunnel", results=list(results), config={})


class CliTestCase(unittest.TestCase):
    def setUp(self):
        config._cached_defaults = None
        self.tmp = tempfile.TemporaryDirectory()
        env = {
            "ZEVCA_CONFIG_FILE": str(Path(self.tmp.name) / "absent.yml"),
            "ZEVCA_LOG_LEVEL": "WARNING",
        }
        self.env = patch.dict(os.environ, env)
        self.env.start()
        os.environ.pop("ZEVCA_OUT", None)
        os.environ.pop("ZEVCA_SENTRY_DSN", None)

    def tearDown(self):
        self.env.stop()
        self.tmp.cleanup()
        config._cached_defaults = None


class TestParseNList(unittest.TestCase):
    def test_parses_orders(self):
        self.assertEqual(parse_n_list("2,4, 6"), [2, 4, 6])
        self.assertEqual(parse_n_list("8,"), [8])

    def test_rejects_bad_input(self):
        with pytest.raises(ConfigError, match="comma-separated"):
            parse_n_list("2,four")
        with pytest.raises(ConfigError, match="empty"):
            parse_n_list(" , ")


class TestMain(CliTestCase):
    def test_list_presets(self):
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            self.assertEqual(main(["run", "--list-presets"]), EXIT_OK)
        self.assertIn("eckart_e20", stdout.getvalue().split())

    def test_missing_config_is_a_config_error(self):
        with patch("sys.stderr", new_callable=io.StringIO) as stderr:
            self.assertEqual(main(["run"]), EXIT_CONFIG_ERROR)
        self.assertIn("configuration error", stderr.getvalue())

    def test_unreadable_config(self):
        missing = str(Path(self.tmp.name) / "missing.yml")
        with patch("sys.stderr", new_callable=io.StringIO):
            self.assertEqual(main(["run", missing]), EXIT_CONFIG_ERROR)

    def test_config_and_preset_together(self):
        with patch("sys.stderr", new_callable=io.StringIO):
            code = main(["run", "exp.yml", "--preset", "harmonic"])
        self.assertEqual(code, EXIT_CONFIG_ERROR)

    def test_invalid_log_level(self):
        with patch("sys.stderr", new_callable=io.StringIO):
            code = main(["run", "--list-presets", "--log-level", "chatty"])
        self.assertEqual(code, EXIT_CONFIG_ERROR)

    @patch("zevca.cli.run_experiment")
    def test_successful_run(self, mock_run):
        mock_run.return_value = _summary(OrderResult(n=2, terminal_value=0.1))
        out = str(Path(self.tmp.name) / "out")
        code = main(["run", "--preset", "harmonic", "--out", out])
        self.assertEqual(code, EXIT_OK)
        cfg, out_dir = mock_run.call_args.args
        self.assertEqual(out_dir, Path(out))
        self.assertEqual(cfg.experiment, "compare")
        self.assertEqual(mock_run.call_args.kwargs["preset"], "harmonic")

    @patch("zevca.cli.run_experiment")
    def test_flags_are_passed_through(self, mock_run):
        mock_run.return_value = _summary(OrderResult(n=2))
        code = main(
            [
                "run",
                "--preset",
                "harmonic",
                "--n-list",
                "2,6",
                "--seedless-deterministic",
            ]
        )
        self.assertEqual(code, EXIT_OK)
        cfg = mock_run.call_args.args[0]
        self.assertEqual(cfg.n_list, [2, 6])
        self.assertTrue(mock_run.call_args.kwargs["deterministic"])
        self.assertEqual(mock_run.call_args.kwargs["max_workers"], 1)

    @patch("zevca.cli.run_experiment")
    def test_invalid_n_list_override(self, mock_run):
        with patch("sys.stderr", new_callable=io.StringIO):
            code = main(["run", "--preset", "harmonic", "--n-list", "2,-1"])
        self.assertEqual(code, EXIT_CONFIG_ERROR)
        mock_run.assert_not_called()

    @patch("zevca.cli.run_experiment")
    def test_output_dir_from_environment(self, mock_run):
        mock_run.return_value = _summary(OrderResult(n=2))
        with patch.dict(os.environ, {"ZEVCA_OUT": "env-out"}):
            main(["run", "--preset", "harmonic"])
        self.assertEqual(mock_run.call_args.args[1], Path("env-out"))

    @patch("zevca.cli.run_experiment")
    def test_every_order_blew_up(self, mock_run):
        mock_run.return_value = _summary(
            OrderResult(n=2, blew_up=True), OrderResult(n=4, blew_up=True)
        )
        self.assertEqual(main(["run", "--preset", "harmonic"]), EXIT_ALL_BLEW_UP)

    @patch("zevca.cli.run_experiment")
    def test_some_orders_blew_up(self, mock_run):
        mock_run.return_value = _summary(
            OrderResult(n=2, relative_error=0.1), OrderResult(n=4, blew_up=True)
        )
        self.assertEqual(main(["run", "--preset", "harmonic"]), EXIT_OK)

    @patch("zevca.cli.run_experiment")
    def test_oracle_failure(self, mock_run):
        mock_run.side_effect = OracleSetupError("grid too small")
        self.assertEqual(main(["run", "--preset", "harmonic"]), EXIT_ORACLE_FAILURE)

    @patch("zevca.cli.run_experiment")
    def test_unexpected_failure(self, mock_run):
        mock_run.side_effect = RuntimeError("disk full")
        with self.assertLogs("zevca.cli", level="ERROR"):
            code = main(["run", "--preset", "harmonic"])
        self.assertEqual(code, EXIT_FAILURE)

    def test_version(self):
        with patch("sys.stdout", new_callable=io.StringIO):
            with pytest.raises(SystemExit) as excinfo:
                cli.build_parser().parse_args(["--version"])
        self.assertEqual(excinfo.value.code, 0)


class TestErrorReporting(unittest.TestCase):
    def test_user_input_errors_are_dropped(self):
        error = ConfigError("bad file")
        hint = {"exc_info": (ConfigError, error, None)}
        self.assertIsNone(before_send({"event_id": "1"}, hint))

    def test_defects_are_reported(self):
        error = RuntimeError("boom")
        event = {"event_id": "2"}
        hint = {"exc_info": (RuntimeError, error, None)}
        self.assertIs(before_send(event, hint), event)
        self.assertIs(before_send(event, {}), event)

    @patch("zevca.sentry_sdk.init")
    def test_disabled_without_dsn(self, mock_init):
        with patch.dict(os.environ, {}, clear=True):
            self.assertFalse(init_error_reporting())
        mock_init.assert_not_called()

    @patch("zevca.sentry_sdk.init")
    def test_enabled_with_dsn(self, mock_init):
        with patch.dict(os.environ, {"ZEVCA_SENTRY_DSN": "https://key@example.com/1"}):
            self.assertTrue(init_error_reporting())
        kwargs = mock_init.call_args.kwargs
        self.assertEqual(kwargs["dsn"], "https://key@example.com/1")
        self.assertIs(kwargs["before_send"], before_send)
        self.assertFalse(kwargs["send_default_pii"])


if __name__ == "__main__":
    unittest.main()
