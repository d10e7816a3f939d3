"""Experiment configuration files, bundled presets and user defaults"""

import logging
import os
from importlib import resources
from pathlib import Path
from typing import Any, List, Optional, Sequence

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from zevca.models import ExperimentConfig

logger = logging.getLogger(__name__)

# User defaults file location
USER_CONFIG_FILE = Path.home() / ".zevca.yml"
DEFAULT_OUTPUT_DIR = Path("zevca-out")
PRESET_SUFFIX = ".yml"

# Cached user defaults to avoid repeated file reads
_cached_defaults: dict[str, Any] | None = None


class ConfigError(ValueError):
    """Raised when a configuration cannot be read, parsed or validated.

    ``line`` is the 1-based line of the offending key when it is known.
    """

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line


class UserDefaults(BaseModel):
    """Model for the per-user defaults file"""

    model_config = ConfigDict(extra="forbid")

    output_dir: Optional[Path] = Field(default=None, description="Output directory")
    max_workers: Optional[int] = Field(
        default=None, ge=1, description="Parallel N-sweep workers"
    )
    log_level: Optional[str] = Field(default=None, description="Logging level name")


def user_config_path() -> Path:
    return Path(os.getenv("ZEVCA_CONFIG_FILE", str(USER_CONFIG_FILE))).expanduser()


def load_user_defaults(*, use_cache: bool = True) -> dict[str, Any]:
    """Load the user defaults file (~/.zevca.yml or $ZEVCA_CONFIG_FILE).

    Args:
        use_cache: If True, return cached defaults if available. Set to False
                   to force a fresh read from disk.

    Returns:
        The validated defaults as a dict without unset keys, or an empty dict
        if the file doesn't exist.

    Raises:
        ConfigError: If the file exists but cannot be parsed or validated.
    """
    global _cached_defaults

    if use_cache and _cached_defaults is not None:
        return _cached_defaults

    path = user_config_path()
    defaults: dict[str, Any] = {}
    if path.exists():
        try:
            with open(path) as f:
                raw = yaml.safe_load(f) or {}
            defaults = UserDefaults.model_validate(raw).model_dump(exclude_none=True)
        except (yaml.YAMLError, ValidationError, OSError) as e:
            raise ConfigError(f"Failed to parse {path}: {e}") from e

    if use_cache:
        _cached_defaults = defaults

    return defaults


def _line_of(node: Optional[yaml.Node], loc: Sequence[Any]) -> Optional[int]:
    """1-based line of the deepest YAML node reachable along ``loc``.

    Location parts that do not match a key (such as union tags) are skipped.
    """
    line = node.start_mark.line + 1 if node is not None else None
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                if key.value == str(part):
                    line = key.start_mark.line + 1
                    node = value
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if part < len(node.value):
                node = node.value[part]
                line = node.start_mark.line + 1
    return line


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate an experiment configuration written in YAML.

    Raises:
        ConfigError: On malformed YAML, unknown keys or invalid values; the
            message names the field and its line.
    """
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{source}:{line}: invalid YAML: {e}", line=line) from e

    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a mapping at the top level", line=1)

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        problems = []
        first_line = None
        for err in e.errors():
            line = _line_of(node, err["loc"])
            if first_line is None:
                first_line = line
            field = ".".join(str(part) for part in err["loc"])
            problems.append(f"{source}:{line}: {field}: {err['msg']}")
        raise ConfigError("\n".join(problems), line=first_line) from e


def load_config(path: Path | str) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {path}: {e}") from e
    logger.debug("Loaded configuration from %s", path)
    return parse_config(text, source=str(path))


def _preset_dir():
    return resources.files("zevca").joinpath("presets")


def list_presets() -> List[str]:
    """Names of the bundled presets."""
    return sorted(
        entry.name[: -len(PRESET_SUFFIX)]
        for entry in _preset_dir().iterdir()
        if entry.name.endswith(PRESET_SUFFIX)
    )


def load_preset(name: str) -> ExperimentConfig:
    """Load a bundled preset by name.

    Raises:
        ConfigError: If no preset of that name exists.
    """
    available = list_presets()
    if name not in available:
        raise ConfigError(
            f"Unknown preset '{name}'. Available presets: {', '.join(available)}"
        )
    text = _preset_dir().joinpath(name + PRESET_SUFFIX).read_text(encoding="utf-8")
    return parse_config(text, source=f"preset:{name}")


def resolve_output_dir(
    cli_out: Optional[Path | str], cfg: Optional[ExperimentConfig]
) -> Path:
    """--out > $ZEVCA_OUT > config output_dir > user defaults > ./zevca-out"""
    if cli_out:
        return Path(cli_out)
    env_out = os.getenv("ZEVCA_OUT")
    if env_out:
        return Path(env_out)
    if cfg is not None and cfg.output_dir is not None:
        return cfg.output_dir
    user_out = load_user_defaults().get("output_dir")
    if user_out:
        return Path(user_out).expanduser()
    return DEFAULT_OUTPUT_DIR


def resolve_max_workers(cfg: ExperimentConfig, deterministic: bool = False) -> int:
    """Worker count for the N-sweep; deterministic runs are serial."""
    if deterministic:
        return 1
    if cfg.max_workers is not None:
        return cfg.max_workers
    user_workers = load_user_defaults().get("max_workers")
    if user_workers:
        return user_workers
    return min(len(cfg.n_list), os.cpu_count() or 1)
