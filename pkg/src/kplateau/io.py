"""Plain-text artifacts: curve and polyline CSV, run summaries."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

from .rod import FramedCurve
from .topology import Polyline

CURVE_HEADER = "s,x,y,z,tx,ty,tz,dx,dy,dz"
SUMMARY_KEYS = ("total_energy", "film_area", "constraint_report", "iterations", "collapse_flag")


def _g(v) -> str:
    return f"{float(v):.17g}"


def write_curve_csv(c: FramedCurve, path) -> None:
    """One row per sample, 17 significant digits."""
    cols = np.column_stack([c.s, c.x, c.t, c.d])
    lines = [CURVE_HEADER] + [",".join(_g(v) for v in row) for row in cols]
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve_csv(path) -> FramedCurve:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    s, x, t, d = data[:, 0], data[:, 1:4], data[:, 4:7], data[:, 7:10]
    R = np.stack([t, d, np.cross(t, d)], axis=-1)
    step = float(s[1] - s[0]) if len(s) > 1 else 0.0
    return FramedCurve(s, x, R, step)


def write_polyline_csv(p: Polyline, path) -> None:
    lines = ["x,y,z"] + [",".join(_g(v) for v in row) for row in p.points]
    Path(path).write_text("\n".join(lines) + "\n")


def read_polyline_csv(path, closed: bool = True) -> Polyline:
    """Header ``x,y,z``; closedness comes from the caller (the experiment config)."""
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if pts.shape[1] != 3:
        raise ValueError(f"{path}: expected three columns x,y,z")
    return Polyline(pts, closed)


def _plain(v):
    """Convert numpy scalars and non-finite floats to YAML-friendly values."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(_g(v))
    return v


def write_summary(path, total_energy, film_area, constraint_report: dict, iterations: int, collapse_flag: bool) -> None:
    """Structured text summary with exactly the keys of :data:`SUMMARY_KEYS`."""
    data = {
        "total_energy": _plain(total_energy),
        "film_area": _plain(film_area),
        "constraint_report": _plain(constraint_report),
        "iterations": int(iterations),
        "collapse_flag": bool(collapse_flag),
    }
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False, default_flow_style=False))


def read_summary(path) -> dict:
    return yaml.safe_load(Path(path).read_text())
