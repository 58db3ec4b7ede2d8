"""Deterministic CSV and JSON writers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import Trajectory

FLOAT_FORMAT = "%.16e"  # 17 significant digits round-trip every double


def write_trajectory(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = traj.columns()
    header = ",".join(cols)
    # + 0.0 folds -0.0 into 0.0 so reruns diff cleanly
    data = np.column_stack([np.asarray(v, dtype=float) + 0.0 for v in cols.values()])
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=header, comments="")
    return path


def read_trajectory(path) -> dict:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.asarray(data[name], dtype=float) for name in data.dtype.names}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path
