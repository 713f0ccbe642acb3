"""Field and state-pair serialization.

A field is stored as ``<stem>.json`` (grid header) next to ``<stem>.bin`` (raw
little-endian float64 samples in row-major order).  A pair adds a
``manifest.json`` with the parameters and a few derived numbers.  Every file
is written to a temporary name and renamed into place.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import model
from .model import StatePair, SystemParams
from .spectral import GridSpec, RealField

__all__ = ["atomic_write", "write_field", "read_field", "save_pair", "load_pair", "dumps_json"]

DTYPE = "f64-le"


def atomic_write(path, data: bytes | str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    # JSON has no inf/nan; the string sentinel keeps files parseable
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def write_field(f: RealField, stem) -> tuple[Path, Path]:
    stem = Path(stem)
    header = {
        "dimension": f.grid.dimension,
        "points_per_axis": f.grid.points_per_axis,
        "box_length": f.grid.box_length,
        "dtype": DTYPE,
    }
    hpath, bpath = stem.with_suffix(".json"), stem.with_suffix(".bin")
    atomic_write(bpath, np.ascontiguousarray(f.samples, dtype="<f8").tobytes())
    atomic_write(hpath, dumps_json(header))
    return hpath, bpath


def read_field(stem) -> RealField:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    if header.get("dtype") != DTYPE:
        raise ValueError(f"unsupported dtype {header.get('dtype')!r}")
    grid = GridSpec(int(header["dimension"]), int(header["points_per_axis"]), float(header["box_length"]))
    raw = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8")
    if raw.size != grid.size:
        raise ValueError(f"expected {grid.size} samples, found {raw.size}")
    return RealField(grid, raw.astype(np.float64))


def save_pair(p: StatePair, params: SystemParams, directory) -> Path:
    directory = Path(directory)
    write_field(p.u, directory / "u")
    write_field(p.v, directory / "v")
    manifest = {
        "params": params.to_dict(),
        "total_mass": p.total_mass,
        "energy_I": model.energy_I(p, params),
        "lambda_estimate": model.multiplier_estimate(p, params),
        "u": "u",
        "v": "v",
    }
    path = directory / "manifest.json"
    atomic_write(path, dumps_json(manifest))
    return path


def load_pair(directory) -> tuple[StatePair, SystemParams]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    params = SystemParams(**manifest["params"])
    u = read_field(directory / manifest.get("u", "u"))
    v = read_field(directory / manifest.get("v", "v"))
    return StatePair(u, v), params
