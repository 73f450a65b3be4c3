"""Deterministic output serialization: CSV, JSON, and binary field snapshots.

CSV files are RFC-4180-style (header row, '.' decimal, no comments); each
artifact gets a sidecar `<name>.meta.json` carrying the config hash and the
code version so re-runs are attributable.  Floats are written with repr-17
precision so identical runs are byte identical.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from . import __version__


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, complex):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    return str(x)


def write_meta(path: Path, config_hash: str, extra: dict | None = None):
    meta = {"config_hash": config_hash, "version": __version__}
    if extra:
        meta.update(extra)
    path.write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")


def write_csv(path: str | Path, header: list[str], rows, config_hash: str,
              extra_meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    write_meta(path.with_suffix(path.suffix + ".meta.json"), config_hash,
               extra_meta)
    return path


def write_json(path: str | Path, payload: dict, config_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"config_hash": config_hash, "version": __version__}
    body.update(payload)
    path.write_text(json.dumps(body, sort_keys=True, indent=1,
                               default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"not JSON serializable: {type(obj)}")


_SNAPSHOT_MAGIC = b"GLW1"


def write_field_snapshot(path: str | Path, field: np.ndarray, hx: float,
                         hy: float, t: float, config_hash: str,
                         label: str = "") -> Path:
    """Flat binary grid: magic, (nx, ny) int32, (hx, hy, t) float64, then
    row-major float64 data; a json sidecar carries the metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(field, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(struct.pack("<ii", arr.shape[0], arr.shape[1]))
        fh.write(struct.pack("<ddd", hx, hy, t))
        fh.write(arr.tobytes())
    write_meta(path.with_suffix(path.suffix + ".meta.json"), config_hash,
               {"label": label, "shape": list(arr.shape), "t": t})
    return path


def read_field_snapshot(path: str | Path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SNAPSHOT_MAGIC:
            raise ValueError("not a field snapshot file")
        n0, n1 = struct.unpack("<ii", fh.read(8))
        hx, hy, t = struct.unpack("<ddd", fh.read(24))
        data = np.frombuffer(fh.read(8 * n0 * n1), dtype=np.float64)
    return data.reshape(n0, n1), hx, hy, t
