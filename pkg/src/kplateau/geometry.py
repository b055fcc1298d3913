"""Vectorised geometric primitives: distances and orientation predicates."""
from __future__ import annotations

from fractions import Fraction

import numpy as np


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def point_segment_distance(p, a, b):
    """Distance from points ``p`` to segments ``[a, b]`` (broadcasting)."""
    ab = b - a
    denom = _dot(ab, ab)
    t = np.clip(_dot(p - a, ab) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def segment_segment_distance(p0, p1, q0, q1):
    """Minimum distance between segments ``[p0, p1]`` and ``[q0, q1]`` (broadcasting).

    Closest-point parameters follow the clamped two-step scheme: solve the
    unconstrained 2x2 system, clamp one parameter, recompute the other.
    """
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = _dot(d1, d1)
    e = _dot(d2, d2)
    f = _dot(d2, r)
    c = _dot(d1, r)
    b = _dot(d1, d2)
    denom = a * e - b * b
    a_safe = np.where(a > 0, a, 1.0)
    e_safe = np.where(e > 0, e, 1.0)
    par = denom <= 1e-14 * a * e
    s = np.where(par, 0.0, np.clip((b * f - c * e) / np.where(par, 1.0, denom), 0.0, 1.0))
    t = (b * s + f) / e_safe
    lo = t < 0
    hi = t > 1
    s = np.where(lo, np.clip(-c / a_safe, 0.0, 1.0), s)
    s = np.where(hi, np.clip((b - c) / a_safe, 0.0, 1.0), s)
    t = np.clip(t, 0.0, 1.0)
    diff = (p0 + s[..., None] * d1) - (q0 + t[..., None] * d2)
    return np.linalg.norm(diff, axis=-1)


def polyline_segments(points, closed: bool):
    P = np.asarray(points, dtype=float)
    Q = np.roll(P, -1, axis=0) if closed else P[1:]
    P = P if closed else P[:-1]
    return P, Q


def min_distance_between(p0, p1, q0, q1, chunk: int = 4096):
    """Minimum over all pairs of segments from two sets."""
    best = np.inf
    for i in range(0, len(p0), chunk):
        d = segment_segment_distance(
            p0[i:i + chunk, None, :], p1[i:i + chunk, None, :], q0[None, :, :], q1[None, :, :]
        )
        best = min(best, float(d.min()))
    return best


def pairwise_segment_distances(p0, p1, q0, q1):
    return segment_segment_distance(p0[:, None, :], p1[:, None, :], q0[None, :, :], q1[None, :, :])


# ---------------------------------------------------------------------------
# orientation predicate
# ---------------------------------------------------------------------------

_ORIENT_FILTER = 1e-12


def _orient_exact(a, b, c, d) -> int:
    A = [Fraction(float(x)) for x in a]
    B = [Fraction(float(x)) - A[i] for i, x in enumerate(b)]
    C = [Fraction(float(x)) - A[i] for i, x in enumerate(c)]
    D = [Fraction(float(x)) - A[i] for i, x in enumerate(d)]
    det = (
        B[0] * (C[1] * D[2] - C[2] * D[1])
        - B[1] * (C[0] * D[2] - C[2] * D[0])
        + B[2] * (C[0] * D[1] - C[1] * D[0])
    )
    return (det > 0) - (det < 0)


def orient3d(a, b, c, d) -> np.ndarray:
    """Sign of ``det[b - a, c - a, d - a]`` for batches of points.

    Floating point results whose magnitude is below a forward error bound are
    recomputed in exact rational arithmetic, so the returned sign is exact.
    Exact zeros are reported as 0; callers apply their own tie rule.
    """
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, d)))
    B = b - a
    C = c - a
    D = d - a
    m1 = C[..., 1] * D[..., 2] - C[..., 2] * D[..., 1]
    m2 = C[..., 0] * D[..., 2] - C[..., 2] * D[..., 0]
    m3 = C[..., 0] * D[..., 1] - C[..., 1] * D[..., 0]
    det = B[..., 0] * m1 - B[..., 1] * m2 + B[..., 2] * m3
    perm = (
        np.abs(B[..., 0]) * (np.abs(C[..., 1] * D[..., 2]) + np.abs(C[..., 2] * D[..., 1]))
        + np.abs(B[..., 1]) * (np.abs(C[..., 0] * D[..., 2]) + np.abs(C[..., 2] * D[..., 0]))
        + np.abs(B[..., 2]) * (np.abs(C[..., 0] * D[..., 1]) + np.abs(C[..., 1] * D[..., 0]))
    )
    sign = np.sign(det).astype(np.int8)
    unsure = np.abs(det) <= _ORIENT_FILTER * perm
    if np.any(unsure):
        for idx in zip(*np.nonzero(unsure)):
            sign[idx] = _orient_exact(a[idx], b[idx], c[idx], d[idx])
    return sign


def _tie_positive(sign):
    # symbolic perturbation: exact zeros are treated as lying on the positive side
    return np.where(sign == 0, 1, sign)


def segments_cross_triangles(p, q, a, b, c) -> np.ndarray:
    """Whether segments ``[p, q]`` meet triangles ``(a, b, c)`` (broadcasting).

    Uses exact orientation signs with a consistent tie rule, so a segment
    passing through a shared edge of two consistently oriented triangles is
    reported for exactly one of them.
    """
    o1 = _tie_positive(orient3d(a, b, c, p))
    o2 = _tie_positive(orient3d(a, b, c, q))
    straddle = o1 != o2
    s1 = _tie_positive(orient3d(p, q, a, b))
    s2 = _tie_positive(orient3d(p, q, b, c))
    s3 = _tie_positive(orient3d(p, q, c, a))
    return straddle & (s1 == s2) & (s2 == s3)
