from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"

if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from darksim.config import REFERENCE_CONFIG_PATH, load_config  # noqa: E402
from darksim.runtime import build_platform  # noqa: E402


@pytest.fixture(scope="session")
def reference_config():
    return load_config(REFERENCE_CONFIG_PATH)


@pytest.fixture(scope="session")
def reference_platform(reference_config):
    return build_platform(reference_config)
