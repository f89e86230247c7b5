"""User configuration: config.yaml plus environment overrides."""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import yaml

logger = logging.getLogger(__name__)

CONFIG_FILE = Path("config.yaml")

# Environment variables and the RunConfig field each one sets.
ENV_KEYS = {
    "REFINE_STATE_CAP": "state_cap",
    "REFINE_WORKERS": "workers",
    "REFINE_REPORT_DIR": "report_dir",
}


def load_user_config(path: Optional[Path] = None) -> Dict[str, Any]:
    """Load user configuration from config.yaml.

    Args:
        path: Explicit config file (defaults to ./config.yaml)

    Returns:
        Configuration dictionary, empty when the file is missing or unreadable
    """
    config_path = Path(path) if path is not None else CONFIG_FILE
    if not config_path.exists():
        logger.debug("No user config found, using defaults")
        return {}

    try:
        with open(config_path, "r") as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        logger.warning(f"Failed to load config: {e}")
        return {}
    if not isinstance(data, dict):
        logger.warning(f"Ignoring {config_path}: top level is not a mapping")
        return {}
    return data


def config_defaults(user_config: Mapping[str, Any]) -> Dict[str, Any]:
    """The `defaults:` section, with `paths.reports` folded in as report_dir."""
    defaults = dict(user_config.get("defaults") or {})
    paths = user_config.get("paths") or {}
    if "reports" in paths and "report_dir" not in defaults:
        defaults["report_dir"] = paths["reports"]
    return defaults


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    """RunConfig fields set through REFINE_* environment variables."""
    environ = os.environ if environ is None else environ
    found = {}
    for var, key in ENV_KEYS.items():
        value = environ.get(var)
        if value:
            logger.debug(f"{var} overrides {key}")
            found[key] = value
    return found


def fixtures_dir(user_config: Mapping[str, Any]) -> Path:
    paths = user_config.get("paths") or {}
    return Path(paths.get("fixtures", "fixtures"))
