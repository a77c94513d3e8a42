from __future__ import annotations

from pathlib import Path
from typing import Any, Dict

import yaml

from .models import AppConfig

# Shipped calibration lives next to the package sources.
REFERENCE_CONFIG_PATH = Path(__file__).resolve().parent / "assets" / "reference.yaml"


def read_config_data(path: Path) -> Dict[str, Any]:
    config_path = path.expanduser().resolve()
    if not config_path.exists():
        raise FileNotFoundError(
            f"Config file not found at {config_path}. "
            "Run `darksim init` to write the reference calibration, "
            "or pass an existing file with `--config /path/to/platform.yaml`"
        )
    with config_path.open("r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{config_path}: top level must be a mapping, got {type(data).__name__}")
    return data


def load_config(path: Path = REFERENCE_CONFIG_PATH) -> AppConfig:
    """Load and validate a platform calibration file."""
    return AppConfig.model_validate(read_config_data(path))


def reference_config_text() -> str:
    return REFERENCE_CONFIG_PATH.read_text(encoding="utf-8")
