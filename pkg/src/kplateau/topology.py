"""Topological constraints: linking numbers, twist and writhe, spanning loops.

Gauss integrals over pairs of straight segments are evaluated in closed form
as signed solid angles of the quadrilateral spanned by the two segments, so
the linking number of two disjoint closed polygons is an integer up to
round-off.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    min_distance_between,
    point_segment_distance,
    polyline_segments,
    segment_segment_distance,
    segments_cross_triangles,
)
from .mesh import SurfaceMesh
from .rod import FramedCurve, closure_residual


class TopologyError(ValueError):
    """Linking or writhe requested for curves where it is undefined."""


@dataclass(frozen=True)
class Polyline:
    """Ordered 3-D points; a closed polyline has an implicit closing segment.

    A trailing copy of the first point on a closed polyline is dropped.
    """

    points: np.ndarray
    closed: bool = True

    def __post_init__(self):
        P = np.array(self.points, dtype=float).reshape(-1, 3)
        if self.closed and len(P) > 1:
            scale = max(1.0, float(np.abs(P).max()))
            if np.linalg.norm(P[-1] - P[0]) <= 1e-12 * scale:
                P = P[:-1]
        if self.closed and len(P) < 3:
            raise TopologyError("closed polyline needs at least three points")
        if len(P) < 2:
            raise TopologyError("polyline needs at least two points")
        seg = np.diff(np.vstack([P, P[:1]]) if self.closed else P, axis=0)
        if np.any(np.linalg.norm(seg, axis=1) == 0):
            raise TopologyError("consecutive polyline points must be distinct")
        P.setflags(write=False)
        object.__setattr__(self, "points", P)

    def __len__(self):
        return len(self.points)

    def segments(self):
        return polyline_segments(self.points, self.closed)

    @property
    def length(self) -> float:
        p, q = self.segments()
        return float(np.sum(np.linalg.norm(q - p, axis=1)))

    def transformed(self, rotation=None, translation=None, scale=1.0) -> "Polyline":
        Q = np.eye(3) if rotation is None else np.asarray(rotation)
        a = np.zeros(3) if translation is None else np.asarray(translation)
        return Polyline(scale * self.points @ Q.T + a, self.closed)

    def reversed(self) -> "Polyline":
        return Polyline(self.points[::-1].copy(), self.closed)

    def rolled(self, k: int) -> "Polyline":
        return Polyline(np.roll(self.points, k, axis=0), self.closed)

    @classmethod
    def from_curve(cls, c: FramedCurve, closed: bool = True, n: Optional[int] = None) -> "Polyline":
        """Midline of a framed curve; for closed curves the duplicate end sample is dropped."""
        x = c.x if n is None else c.subsample(n).x
        return cls(x[:-1] if closed else x, closed)

    @classmethod
    def circle(cls, radius=1.0, n=128, center=(0, 0, 0), normal=(0, 0, 1), phase=0.0):
        normal = np.asarray(normal, dtype=float)
        normal = normal / np.linalg.norm(normal)
        u = np.cross(normal, [1.0, 0.0, 0.0])
        if np.linalg.norm(u) < 1e-8:
            u = np.cross(normal, [0.0, 1.0, 0.0])
        u /= np.linalg.norm(u)
        v = np.cross(normal, u)
        phi = phase + 2 * np.pi * np.arange(n) / n
        pts = np.asarray(center, dtype=float) + radius * (
            np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * v
        )
        return cls(pts, True)


@dataclass(frozen=True)
class SpanningClassSpec:
    """Which test loops a film must intersect.

    ``mode='single'``: loops with linking number +-1 with the (single) midline.
    ``mode='multi'``: ``targets[i]`` nonzero marks rods that loops may link;
    every loop links exactly one rod.
    """

    mode: str = "single"
    avoidance_radius: float = 0.05
    targets: Optional[tuple] = None

    def __post_init__(self):
        if self.mode not in ("single", "multi"):
            raise ValueError("mode must be 'single' or 'multi'")
        if not self.avoidance_radius > 0:
            raise ValueError("avoidance radius must be positive")
        if self.mode == "multi":
            if not self.targets or not any(self.targets):
                raise ValueError("multi-rod spanning class needs at least one nonzero target")


# ---------------------------------------------------------------------------
# Gauss integrals
# ---------------------------------------------------------------------------


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, v / np.where(n > 0, n, 1.0), 0.0)


def _solid_angles(p0, p1, q0, q1):
    """Signed Gauss integral ``4 pi * link density`` for segment pairs (broadcasting)."""
    r13 = q0 - p0
    r14 = q1 - p0
    r23 = q0 - p1
    r24 = q1 - p1
    n1 = _unit(np.cross(r13, r14))
    n2 = _unit(np.cross(r14, r24))
    n3 = _unit(np.cross(r24, r23))
    n4 = _unit(np.cross(r23, r13))

    def asin_dot(a, b):
        return np.arcsin(np.clip(np.einsum("...i,...i->...", a, b), -1.0, 1.0))

    omega = asin_dot(n1, n2) + asin_dot(n2, n3) + asin_dot(n3, n4) + asin_dot(n4, n1)
    sgn = np.sign(np.einsum("...i,...i->...", np.cross(q1 - q0, p1 - p0), r13))
    return omega * sgn


def gauss_integral(c1: Polyline, c2: Polyline, chunk: int = 1024) -> float:
    """Closed-form discrete Gauss double integral of two polylines (no validity checks)."""
    p0, p1 = c1.segments()
    q0, q1 = c2.segments()
    total = 0.0
    for i in range(0, len(p0), chunk):
        om = _solid_angles(
            p0[i:i + chunk, None, :], p1[i:i + chunk, None, :], q0[None, :, :], q1[None, :, :]
        )
        total += float(np.sum(om))
    return total / (4 * np.pi)


def min_distance(c1: Polyline, c2: Polyline) -> float:
    p0, p1 = c1.segments()
    q0, q1 = c2.segments()
    return min_distance_between(p0, p1, q0, q1)


def gauss_linking(c1: Polyline, c2: Polyline, integer_tol: float = 0.1) -> tuple[float, int]:
    """Linking number of two disjoint closed polylines.

    Returns
    -------
    value : float
        The Gauss double integral.
    link : int
        ``round(value)``; accepted only if ``|value - link| < integer_tol``.
    """
    if not (c1.closed and c2.closed):
        raise TopologyError("linking number needs closed curves")
    scale = max(np.ptp(c1.points, axis=0).max(), np.ptp(c2.points, axis=0).max())
    if min_distance(c1, c2) <= 1e-12 * scale:
        raise TopologyError("curves intersect; linking number undefined")
    value = gauss_integral(c1, c2)
    link = int(np.round(value))
    if abs(value - link) >= integer_tol:
        raise TopologyError(
            f"Gauss integral {value:.4f} is not near an integer; curves too close or too coarse"
        )
    return value, link


def _nonadjacent_pairs_mask(n: int, closed: bool, gap: int = 1):
    i = np.arange(n)
    diff = np.abs(i[:, None] - i[None, :])
    if closed:
        diff = np.minimum(diff, n - diff)
    return diff > gap


def self_min_distance(c: Polyline, gap: int = 1, chunk: int = 1024) -> float:
    """Minimum distance between segments more than ``gap`` apart in index."""
    p0, p1 = c.segments()
    n = len(p0)
    best = np.inf
    idx = np.arange(n)
    for i in range(0, n, chunk):
        d = segment_segment_distance(
            p0[i:i + chunk, None, :], p1[i:i + chunk, None, :], p0[None, :, :], p1[None, :, :]
        )
        diff = np.abs(idx[i:i + chunk, None] - idx[None, :])
        if c.closed:
            diff = np.minimum(diff, n - diff)
        d = np.where(diff > gap, d, np.inf)
        best = min(best, float(d.min()))
    return best


def writhe(c: Polyline, chunk: int = 512) -> float:
    """Writhe of a closed polyline: Gauss self-integral over non-adjacent segment pairs."""
    if not c.closed:
        raise TopologyError("writhe needs a closed curve")
    scale = np.ptp(c.points, axis=0).max()
    if self_min_distance(c, gap=1) <= 1e-12 * scale:
        raise TopologyError("curve self-intersects; writhe undefined")
    p0, p1 = c.segments()
    n = len(p0)
    idx = np.arange(n)
    total = 0.0
    for i in range(0, n, chunk):
        om = _solid_angles(
            p0[i:i + chunk, None, :], p1[i:i + chunk, None, :], p0[None, :, :], p1[None, :, :]
        )
        diff = np.abs(idx[i:i + chunk, None] - idx[None, :])
        diff = np.minimum(diff, n - diff)
        om = np.where(diff > 1, om, 0.0)
        total += float(np.sum(np.nan_to_num(om)))
    return total / (4 * np.pi)


def total_twist(c: FramedCurve) -> float:
    """``(1 / 2 pi) * int omega ds`` recovered from consecutive frame rotations."""
    rates = c.body_rates()
    return float(np.sum(rates[:, 0] * np.diff(c.s)) / (2 * np.pi))


def framing_link(c: FramedCurve, epsilon: float, closure_tol: float = 1e-4) -> int:
    """Linking number of the midline with its offset ``x + epsilon d``.

    The offset curve is closed by a straight segment if ``d(L) != d(0)``.
    """
    pos, tan = closure_residual(c)
    if pos > closure_tol * c.length or tan > closure_tol:
        raise TopologyError("framing link needs a closed midline")
    x = c.x[:-1]
    y = x + epsilon * c.d[:-1]
    mid = Polyline(x, True)
    off = Polyline(y, True)
    if min_distance(mid, off) < 0.5 * epsilon:
        raise TopologyError("offset curve comes too close to the midline; reduce epsilon")
    return gauss_linking(mid, off)[1]


def writhe_of_curve(c: FramedCurve) -> float:
    return writhe(Polyline(c.x[:-1], True))


# ---------------------------------------------------------------------------
# spanning
# ---------------------------------------------------------------------------


def _bbox_overlap(amin, amax, bmin, bmax):
    return np.all((amin[:, None, :] <= bmax[None, :, :]) & (bmin[None, :, :] <= amax[:, None, :]), axis=2)


def spanning_test(K: SurfaceMesh, gamma: Polyline) -> bool:
    """True iff some segment of ``gamma`` meets some triangle of ``K``."""
    if not gamma.closed:
        raise TopologyError("test loops must be closed")
    p, q = gamma.segments()
    V = K.vertices
    T = K.triangles
    a, b, c = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    tmin = np.minimum(np.minimum(a, b), c)
    tmax = np.maximum(np.maximum(a, b), c)
    smin = np.minimum(p, q)
    smax = np.maximum(p, q)
    si, ti = np.nonzero(_bbox_overlap(smin, smax, tmin, tmax))
    if len(si) == 0:
        return False
    hit = segments_cross_triangles(p[si], q[si], a[ti], b[ti], c[ti])
    return bool(np.any(hit))


def _normal_basis(t):
    t = t / np.linalg.norm(t)
    helper = np.array([1.0, 0.0, 0.0]) if abs(t[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(t, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(t, u)


def _point_polyline_distance(points, c: Polyline):
    p0, p1 = c.segments()
    return point_segment_distance(points[:, None, :], p0[None, :, :], p1[None, :, :]).min(axis=1)


def _link_pattern_ok(loop: Polyline, midlines, spec: SpanningClassSpec) -> bool:
    links = []
    for m in midlines:
        try:
            links.append(gauss_linking(loop, m)[1])
        except TopologyError:
            return False
    if spec.mode == "single":
        return abs(links[0]) == 1 and all(v == 0 for v in links[1:])
    nonzero = [i for i, v in enumerate(links) if v != 0]
    return len(nonzero) == 1 and abs(links[nonzero[0]]) == 1 and spec.targets[nonzero[0]] != 0


def generate_spanning_loops(
    midlines: Sequence[Polyline],
    spec: SpanningClassSpec,
    k: int,
    seed: int = 0,
    n_points: int = 24,
    max_retries: int = 200,
) -> list[Polyline]:
    """Small meridian circles around midline samples, verified by linking number.

    Loops are planar circles in the normal plane of a midline sample, with
    radius picked from the local clearance; candidates that violate the
    clearance or the linking pattern are rejected and resampled.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    midlines = list(midlines)
    if spec.mode == "single":
        allowed = [0]
    else:
        if len(spec.targets) != len(midlines):
            raise ValueError("one target per midline required")
        allowed = [i for i, v in enumerate(spec.targets) if v != 0]
    rng = np.random.default_rng(seed)
    av = spec.avoidance_radius
    phi = 2 * np.pi * np.arange(n_points) / n_points
    loops = []
    for q in range(k):
        rod = allowed[q % len(allowed)]
        P = midlines[rod].points
        n = len(P)
        for _ in range(max_retries):
            i = int(rng.integers(n))
            f = float(rng.uniform(0.0, 1.0))
            j = (i + 1) % n if midlines[rod].closed else min(i + 1, n - 1)
            centre = P[i] + f * (P[j] - P[i])
            tangent = P[(i + 1) % n] - P[i - 1]
            u, v = _normal_basis(tangent)
            # clearance to everything except the local arc
            others = [m for r, m in enumerate(midlines) if r != rod]
            far = np.inf
            for m in others:
                far = min(far, float(_point_polyline_distance(centre[None], m)[0]))
            own = np.linalg.norm(P - centre, axis=1)
            arc = np.minimum(np.abs(np.arange(n) - i), n - np.abs(np.arange(n) - i))
            edge = np.median(np.linalg.norm(np.diff(P, axis=0), axis=1))
            remote = own[arc * edge > 6 * av]
            if remote.size:
                far = min(far, float(remote.min()))
            radius = min(2.0 * av, 0.5 * (far + av)) if np.isfinite(far) else 2.0 * av
            radius = max(radius, 1.25 * av)
            pts = centre + radius * (np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * v)
            loop = Polyline(pts, True)
            clear = min(float(_point_polyline_distance(pts, m).min()) for m in midlines)
            if clear < av:
                continue
            if _link_pattern_ok(loop, midlines, spec):
                loops.append(loop)
                break
        else:
            raise TopologyError("could not place a spanning loop with the requested clearance")
    return loops


# ---------------------------------------------------------------------------
# thickness
# ---------------------------------------------------------------------------


def _circumradii(a, b, c):
    ab = np.linalg.norm(b - a, axis=-1)
    bc = np.linalg.norm(c - b, axis=-1)
    ca = np.linalg.norm(a - c, axis=-1)
    twice_area = np.linalg.norm(np.cross(b - a, c - a), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = ab * bc * ca / (2.0 * twice_area)
    return np.where(twice_area > 1e-14 * np.maximum(ab * ca, 1e-300), R, np.inf)


def local_radius_of_curvature(c: Polyline) -> float:
    """Minimum circumradius of consecutive point triples."""
    P = c.points
    if c.closed:
        a, b, cc = np.roll(P, 1, axis=0), P, np.roll(P, -1, axis=0)
    else:
        a, b, cc = P[:-2], P[1:-1], P[2:]
    return float(np.min(_circumradii(a, b, cc)))


def _triples_exhaustive(P):
    n = len(P)
    best = np.inf
    for i in range(n - 2):
        j, k = np.triu_indices(n - i - 1, k=1)
        j = j + i + 1
        k = k + i + 1
        r = _circumradii(P[i][None, :], P[j], P[k])
        best = min(best, float(r.min()))
    return best


def _triples_pruned(P, bound):
    tree = cKDTree(P)
    best = bound
    radius = 2.0 * bound
    neigh = tree.query_ball_point(P, r=radius * (1 + 1e-12))
    for i, nb in enumerate(neigh):
        nb = np.asarray([j for j in nb if j > i], dtype=int)
        if len(nb) < 2:
            continue
        j, k = np.triu_indices(len(nb), k=1)
        jj, kk = nb[j], nb[k]
        close = np.linalg.norm(P[jj] - P[kk], axis=1) <= radius
        if not np.any(close):
            continue
        r = _circumradii(P[i][None, :], P[jj[close]], P[kk[close]])
        m = float(r.min())
        if m < best:
            best = m
    return best


def global_radius_of_curvature(c: Polyline, method: str = "auto", exhaustive_limit: int = 400) -> float:
    """Minimum circumradius over all triples of distinct polyline vertices.

    ``method='pruned'`` only visits triples whose pairwise distances are at
    most twice the local (consecutive-triple) bound, since a circumradius is
    never below half the longest side.
    """
    P = c.points
    if len(P) < 3:
        raise TopologyError("need at least three points")
    if method == "auto":
        method = "exhaustive" if len(P) <= exhaustive_limit else "pruned"
    if method == "exhaustive":
        return _triples_exhaustive(P)
    if method != "pruned":
        raise ValueError(f"unknown method {method!r}")
    bound = local_radius_of_curvature(c)
    if not np.isfinite(bound):
        # all consecutive triples collinear: no local bound to prune with
        return _triples_exhaustive(P)
    return _triples_pruned(P, bound)


def knot_class_guard(c_before: Polyline, c_after: Polyline, thickness: float) -> bool:
    """True iff the straight-line homotopy keeps non-neighbouring arcs ``thickness`` apart.

    Intermediate curves are checked at steps where no vertex moves by more
    than ``thickness / 2``, so two strands cannot pass through each other
    between checks.
    """
    A = c_before.points
    B = c_after.points
    if A.shape != B.shape:
        raise ValueError("curves must have the same number of points")
    if not (c_before.closed and c_after.closed):
        raise TopologyError("knot guard needs closed curves")
    move = float(np.max(np.linalg.norm(B - A, axis=1)))
    n_steps = max(1, int(np.ceil(move / (0.5 * thickness))))
    edge = min(
        float(np.min(np.linalg.norm(np.diff(np.vstack([A, A[:1]]), axis=0), axis=1))),
        float(np.min(np.linalg.norm(np.diff(np.vstack([B, B[:1]]), axis=0), axis=1))),
    )
    n = len(A)
    gap = max(1, int(np.ceil(2.0 * thickness / edge)))
    if gap >= n // 2:
        raise ValueError("thickness too large for this discretisation")
    for tau in np.linspace(0.0, 1.0, n_steps + 1):
        P = (1 - tau) * A + tau * B
        if self_min_distance(Polyline(P, True), gap=gap) < thickness:
            return False
    return True
