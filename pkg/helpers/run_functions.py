"""Helper module for logging setup and report files written by the commands"""

import json
import logging
import os
import tempfile
from io import BytesIO
from pathlib import Path

import numpy as np
import pandas as pd

from helpers.exceptions import ValidationError
from helpers.grid import GridFunction, ProductGrid

logger = logging.getLogger(__name__)

BINARY_DTYPE = "<f8"
SIDECAR_SUFFIX = ".json"


def init_logger(level: str | int = logging.INFO):
    """Initialize the root logger."""
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(module)s.%(funcName)s:%(lineno)d — %(message)s",
        datefmt="%H:%M:%S",
    )


# --------------------------------------------------------------------
# Atomic writers
# --------------------------------------------------------------------
def write_bytes_atomic(path: Path, data: bytes) -> Path:
    """
    Write data to path through a temporary file in the same directory.

    Readers never observe a partially written report.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug("Wrote %s (%d bytes)", path, len(data))
    return path


def to_json_text(payload) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: Path, payload) -> Path:
    return write_bytes_atomic(path, to_json_text(payload).encode("utf-8"))


def read_json(path: Path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ValidationError(f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path} is not valid JSON: {e}") from e


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    text = frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    return write_bytes_atomic(path, text.encode("utf-8"))


def write_xlsx(path: Path, sheets: dict[str, pd.DataFrame]) -> Path:
    """One worksheet per frame."""
    stream = BytesIO()
    with pd.ExcelWriter(stream, engine="openpyxl") as writer:
        for sheet_name, frame in sheets.items():
            frame.to_excel(writer, index=False, sheet_name=sheet_name[:31])
    return write_bytes_atomic(path, stream.getvalue())


# --------------------------------------------------------------------
# GridFunction files
# --------------------------------------------------------------------
def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def write_grid_function(path: Path, f: GridFunction, metadata: dict | None = None) -> Path:
    """
    Flat little-endian float64 array (row-major) plus a JSON sidecar with the
    grid description and optional metadata.
    """
    path = Path(path)
    write_bytes_atomic(path, np.ascontiguousarray(f.values, dtype=BINARY_DTYPE).tobytes())
    sidecar = {"grid": f.grid.to_dict(), "dtype": BINARY_DTYPE, "count": int(f.values.size)}
    if metadata:
        sidecar["metadata"] = metadata
    write_json(sidecar_path(path), sidecar)
    return path


def read_grid_function(path: Path) -> GridFunction:
    path = Path(path)
    sidecar = read_json(sidecar_path(path))
    try:
        grid = ProductGrid.from_dict(sidecar["grid"])
    except KeyError as e:
        raise ValidationError(f"sidecar of {path.name} lacks grid field {e.args[0]!r}") from e
    if sidecar.get("dtype", BINARY_DTYPE) != BINARY_DTYPE:
        raise ValidationError(f"{path.name} has dtype {sidecar['dtype']!r}, expected {BINARY_DTYPE!r}")
    try:
        values = np.frombuffer(path.read_bytes(), dtype=BINARY_DTYPE)
    except FileNotFoundError as e:
        raise ValidationError(f"file not found: {path}") from e
    return GridFunction(grid, values)
