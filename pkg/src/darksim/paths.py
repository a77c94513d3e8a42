from __future__ import annotations

import os
import re
import shutil
import tempfile
from errno import EXDEV
from pathlib import Path

_UNSAFE_RE = re.compile(r"[^A-Za-z0-9._-]+")


def companion_path(out_path: Path, kind: str, suffix: str = ".csv") -> Path:
    """`runs/a.csv` + `residency` -> `runs/a.residency.csv`."""
    return out_path.with_name(f"{out_path.stem}.{kind}{suffix}")


def slug(text: str) -> str:
    cleaned = _UNSAFE_RE.sub("-", text.strip()).strip("-")
    return cleaned or "trace"


def atomic_write_text(path: Path, text: str) -> Path:
    """Write via a temporary file in the target directory, then rename over the target."""
    path = path.expanduser().resolve()
    path.parent.mkdir(parents=True, exist_ok=True)

    tmp_file = tempfile.NamedTemporaryFile(
        "w", dir=str(path.parent), prefix=f".{path.name}.", suffix=".tmp", delete=False, newline="", encoding="utf-8"
    )
    tmp_path = Path(tmp_file.name)
    try:
        with tmp_file:
            tmp_file.write(text)
        try:
            os.replace(str(tmp_path), str(path))
        except OSError as exc:
            if exc.errno != EXDEV:
                raise
            shutil.move(str(tmp_path), str(path))
    finally:
        if tmp_path.exists():
            tmp_path.unlink()
    return path
