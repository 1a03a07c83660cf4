"""Diagnostics CSV sinks, binary field snapshots and grayscale images."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .stepper import DIAGNOSTIC_COLUMNS


class CsvDiagnosticsSink:
    """Append-only diagnostics CSV; the header row is written on open."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(DIAGNOSTIC_COLUMNS)
        self.rows = 0

    def append(self, record):
        self._writer.writerow(record.as_row())
        self.rows += 1

    def flush(self):
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_snapshot(directory, step: int, t: float, phi: np.ndarray, grid, params=None):
    """Write ``field_<step>.f64`` (little-endian float64, x fastest) plus a JSON sidecar."""
    directory = Path(directory)
    data = np.asarray(phi, dtype="<f8").ravel(order="F").tobytes()
    stem = f"field_{step:08d}"
    (directory / f"{stem}.f64").write_bytes(data)
    meta = {
        "dims": list(grid.dims),
        "lengths": list(grid.lengths),
        "t": float(t),
        "step": int(step),
        "params": params.to_dict() if params is not None else None,
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    (directory / f"{stem}.json").write_text(json.dumps(json_safe(meta), indent=2))
    return directory / f"{stem}.f64"


def json_safe(obj):
    """Replace non-finite floats by the strings ``"inf"``, ``"-inf"`` and ``"nan"``."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def read_snapshot(path):
    """Return ``(phi, meta)`` for a ``.f64`` snapshot, verifying its checksum."""
    path = Path(path)
    meta_path = path.with_suffix(".json")
    if not path.exists():
        raise ConfigurationError(f"snapshot {path} does not exist")
    if not meta_path.exists():
        raise ConfigurationError(f"missing sidecar {meta_path}")
    meta = json.loads(meta_path.read_text())
    data = path.read_bytes()
    if hashlib.sha256(data).hexdigest() != meta["sha256"]:
        raise ConfigurationError(f"checksum mismatch for {path}")
    dims = tuple(meta["dims"])
    phi = np.frombuffer(data, dtype="<f8").reshape(dims, order="F").astype(float)
    return phi, meta


def to_gray(image: np.ndarray, vmin=None, vmax=None):
    """Map a 2D field to uint8 gray levels; a degenerate range maps to mid-gray."""
    lo = float(np.min(image)) if vmin is None else float(vmin)
    hi = float(np.max(image)) if vmax is None else float(vmax)
    if not hi > lo:
        return np.full(image.shape, 128, dtype=np.uint8), lo, hi
    scaled = np.clip((image - lo) / (hi - lo), 0.0, 1.0)
    return np.rint(scaled * 255).astype(np.uint8), lo, hi


def write_pgm(path, phi: np.ndarray, vmin=None, vmax=None) -> dict:
    """Write a binary 8-bit PGM; x runs left to right, y bottom to top."""
    if phi.ndim == 3:
        phi = phi[:, :, phi.shape[2] // 2]
    if phi.ndim != 2:
        raise ConfigurationError(f"can only render 2D fields (or a 3D mid-slice), got {phi.ndim}D")
    gray, lo, hi = to_gray(phi, vmin, vmax)
    rows = gray.T[::-1]
    height, width = rows.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rows).tobytes())
    meta = {"vmin": lo, "vmax": hi, "mode": "per-frame" if vmin is None and vmax is None else "fixed",
            "width": width, "height": height}
    path.with_name(path.name + ".json").write_text(json.dumps(meta, indent=2))
    return meta


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    header = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if header is None:
        raise ConfigurationError("not a binary PGM file")
    width, height = int(header.group(1)), int(header.group(2))
    pixels = np.frombuffer(raw[header.end(): header.end() + width * height], dtype=np.uint8)
    return pixels.reshape(height, width)
