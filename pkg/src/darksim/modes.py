from __future__ import annotations

from enum import Enum


class PmuMode(str, Enum):
    """Fuse-selected firmware mode, fixed for a whole simulation run."""

    NORMAL = "normal"
    BYPASS = "bypass"


class Segment(str, Enum):
    MOBILE = "mobile"
    DESKTOP = "desktop"
