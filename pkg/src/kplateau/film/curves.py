"""Closed boundary curves evaluated by arc length."""
from __future__ import annotations

import numpy as np

from ..topology import Polyline


class ArcCurve:
    """Piecewise-linear closed curve parametrised by arc length (period ``length``)."""

    def __init__(self, poly: Polyline):
        if not poly.closed:
            raise ValueError("boundary curves must be closed")
        self.poly = poly
        P = poly.points
        self._pts = np.vstack([P, P[:1]])
        seg = np.linalg.norm(np.diff(self._pts, axis=0), axis=1)
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self._cum[-1])

    def __call__(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.length)
        return np.stack([np.interp(s, self._cum, self._pts[:, k]) for k in range(3)], axis=-1)

    def tangent(self, s):
        """Unit tangent of the segment containing ``s``."""
        s = np.mod(np.asarray(s, dtype=float), self.length)
        i = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._cum) - 2)
        v = self._pts[i + 1] - self._pts[i]
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def uniform(self, n: int, offset: float = 0.0) -> np.ndarray:
        """``n`` equally spaced arc-length parameters."""
        return offset + self.length * np.arange(n) / n

    @property
    def centroid(self) -> np.ndarray:
        mid = 0.5 * (self._pts[1:] + self._pts[:-1])
        seg = np.diff(self._cum)
        return (mid * seg[:, None]).sum(axis=0) / self.length
