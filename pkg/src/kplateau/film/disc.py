"""Disc-type Plateau solutions by minimising the Dirichlet energy.

The parameter domain is a fixed Delaunay triangulation of the unit disc.
Every outer iteration alternates

1. a harmonic solve for the interior vertices with the boundary fixed, and
2. a reparametrisation of the boundary: each boundary vertex moves along the
   prescribed curve by a golden-section search of the Dirichlet energy with
   its neighbours frozen, restricted to the open arc between its two
   neighbours so the boundary map keeps degree one.

Both half-steps can only lower the energy.  Three boundary vertices stay
pinned to remove the conformal automorphisms of the disc.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import Delaunay

from ..mesh import SurfaceMesh
from ..topology import Polyline, TopologyError, self_min_distance
from .curves import ArcCurve
from .params import SolverParams

logger = logging.getLogger(__name__)

_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


def disc_points(n_rings: int, n_boundary: int | None = None):
    """Concentric-ring point set in the unit disc; the outer ring is listed last.

    Ring ``k`` carries about ``n_boundary * k / n_rings`` points.
    """
    if n_boundary is None:
        n_boundary = 6 * n_rings
    pts = [np.zeros((1, 2))]
    for k in range(1, n_rings + 1):
        nk = max(6, int(round(n_boundary * k / n_rings)))
        if k == n_rings:
            nk = n_boundary
        phase = 0.0 if k == n_rings else 0.5 * (k % 2) * 2 * np.pi / nk
        phi = phase + 2 * np.pi * np.arange(nk) / nk
        r = k / n_rings
        pts.append(r * np.stack([np.cos(phi), np.sin(phi)], axis=1))
    return np.vstack(pts), n_boundary


def disc_triangulation(n_rings: int, n_boundary: int | None = None):
    """Delaunay triangulation of the ring point set.

    Returns ``(uv, triangles, boundary)``; ``boundary`` lists the outer-ring
    vertices counter-clockwise starting at angle 0.
    """
    uv, nb = disc_points(n_rings, n_boundary)
    tri = Delaunay(uv).simplices.astype(np.int64)
    a, b, c = uv[tri[:, 0]], uv[tri[:, 1]], uv[tri[:, 2]]
    orient = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    tri[orient < 0] = tri[orient < 0][:, ::-1]
    keep = np.abs(orient) > 1e-12
    boundary = np.arange(len(uv) - nb, len(uv))
    return uv, tri[keep], boundary


def _gradient_operators(uv, tri):
    """Per-triangle gradients of the hat functions, shape ``(m, 3, 2)``, and areas."""
    a, b, c = uv[tri[:, 0]], uv[tri[:, 1]], uv[tri[:, 2]]
    e0 = c - b
    e1 = a - c
    e2 = b - a
    twice = e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0])
    rot = lambda e: np.stack([-e[:, 1], e[:, 0]], axis=1)  # noqa: E731
    G = np.stack([rot(e0), rot(e1), rot(e2)], axis=1) / twice[:, None, None]
    return G, 0.5 * twice


@dataclass
class DiscParam:
    """A map ``X: D -> R^3`` on a fixed triangulation of the unit disc.

    ``theta`` holds the arc-length parameters (on ``curve``) of the boundary
    vertices ``boundary``; they increase strictly around the disc.
    """

    uv: np.ndarray
    triangles: np.ndarray
    X: np.ndarray
    boundary: np.ndarray
    theta: np.ndarray
    curve: ArcCurve | None = None
    _ops: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._ops is None:
            G, A = _gradient_operators(self.uv, self.triangles)
            if np.any(A <= 0):
                raise ValueError("parameter triangulation must be positively oriented")
            self._ops = (G, A)

    @property
    def grad(self):
        return self._ops[0]

    @property
    def param_areas(self):
        return self._ops[1]

    def derivatives(self, X=None):
        """``(X_u, X_v)`` per triangle, each ``(m, 3)``."""
        X = self.X if X is None else X
        G = self.grad
        Xt = X[self.triangles]  # (m, 3, 3): vertex, coord
        Xu = np.einsum("mk,mkc->mc", G[:, :, 0], Xt)
        Xv = np.einsum("mk,mkc->mc", G[:, :, 1], Xt)
        return Xu, Xv

    def stiffness(self) -> sp.csr_matrix:
        G, A = self._ops
        K = np.einsum("mid,mjd->mij", G, G) * A[:, None, None]
        T = self.triangles
        rows = np.repeat(T, 3, axis=1).ravel()
        cols = np.tile(T, (1, 3)).ravel()
        n = len(self.uv)
        return sp.csr_matrix((K.ravel(), (rows, cols)), shape=(n, n))

    def to_mesh(self) -> SurfaceMesh:
        binding = np.full(len(self.uv), np.nan)
        binding[self.boundary] = self.theta
        curve_idx = np.full(len(self.uv), -1)
        curve_idx[self.boundary] = 0
        return SurfaceMesh(self.X.copy(), self.triangles.copy(), [self.boundary.copy()], binding, curve_idx)


def dirichlet_energy(p: DiscParam, X=None) -> float:
    """``1/2 int_D |grad X|^2`` for the piecewise-linear map."""
    Xu, Xv = p.derivatives(X)
    return float(0.5 * np.sum(p.param_areas * (np.sum(Xu ** 2, axis=1) + np.sum(Xv ** 2, axis=1))))


def map_area(p: DiscParam, X=None) -> float:
    """``int_D |X_u x X_v|``, the area of the image triangles."""
    Xu, Xv = p.derivatives(X)
    return float(np.sum(p.param_areas * np.linalg.norm(np.cross(Xu, Xv), axis=1)))


def conformal_defect(p: DiscParam, X=None) -> float:
    """``int_D (|X_u| - |X_v|)^2 + (X_u . X_v)^2`` with per-triangle constant gradients."""
    Xu, Xv = p.derivatives(X)
    nu = np.linalg.norm(Xu, axis=1)
    nv = np.linalg.norm(Xv, axis=1)
    return float(np.sum(p.param_areas * ((nu - nv) ** 2 + np.sum(Xu * Xv, axis=1) ** 2)))


def identity_param(n_rings: int = 10, n_boundary: int | None = None) -> DiscParam:
    """Flat unit disc mapped to itself (in the ``z = 0`` plane)."""
    uv, tri, bnd = disc_triangulation(n_rings, n_boundary)
    X = np.column_stack([uv, np.zeros(len(uv))])
    theta = np.arctan2(uv[bnd, 1], uv[bnd, 0]) % (2 * np.pi)
    return DiscParam(uv, tri, X, bnd, theta)


@dataclass
class DiscPlateauResult:
    param: DiscParam
    area: float
    dirichlet: float
    gap: float
    conformal_defect: float
    trace: list
    iterations: int
    warning: bool = False

    def __iter__(self):
        yield self.param
        yield self.area


def _boundary_coloring(L: sp.csr_matrix, boundary: np.ndarray, pinned: set):
    """Greedy colouring of boundary vertices so same-colour vertices do not interact."""
    pos = {int(v): k for k, v in enumerate(boundary)}
    colors = -np.ones(len(boundary), dtype=int)
    for k, v in enumerate(boundary):
        row = L.indices[L.indptr[v]:L.indptr[v + 1]]
        taken = {colors[pos[int(u)]] for u in row if int(u) in pos and int(u) != int(v)}
        c = 0
        while c in taken:
            c += 1
        colors[k] = c
    groups = []
    for c in range(colors.max() + 1):
        groups.append(np.array([k for k in np.nonzero(colors == c)[0] if k not in pinned], dtype=int))
    return groups


def _check_simple(boundary: Polyline):
    scale = np.ptp(boundary.points, axis=0).max()
    if self_min_distance(boundary, gap=1) <= 1e-9 * scale:
        raise TopologyError("boundary curve is not simple")
    P = boundary.points - boundary.points.mean(axis=0)
    if np.linalg.svd(P, compute_uv=False)[1] <= 1e-12 * scale:
        raise TopologyError("boundary curve is degenerate (collinear)")


def solve_disc_plateau(
    boundary: Polyline,
    params: SolverParams = SolverParams(),
    n_rings: int = 29,
    n_boundary: int | None = None,
    golden_iters: int = 40,
) -> DiscPlateauResult:
    """Douglas-Rado scheme on a fixed disc triangulation.

    Parameters
    ----------
    boundary : Polyline
        Closed simple curve.
    n_rings : int
        Rings of the parameter mesh; about ``6 n_rings^2`` triangles.

    Returns
    -------
    DiscPlateauResult
        Unpacks as ``(param, area)``; also carries the final energy, the
        ``D - A`` gap, the conformal defect and the energy trace.
    """
    _check_simple(boundary)
    curve = ArcCurve(boundary)
    uv, tri, bnd = disc_triangulation(n_rings, n_boundary)
    nb = len(bnd)
    interior = np.setdiff1d(np.arange(len(uv)), bnd)
    theta = curve.uniform(nb)
    X = np.zeros((len(uv), 3))
    X[bnd] = curve(theta)
    p = DiscParam(uv, tri, X, bnd, theta, curve)
    L = p.stiffness().tocsr()
    L_II = L[interior][:, interior].tocsc()
    L_IB = L[interior][:, bnd]
    solve = spla.factorized(L_II)
    diag = L.diagonal()

    def harmonic(Xc):
        rhs = -(L_IB @ Xc[bnd])
        out = Xc.copy()
        out[interior] = np.column_stack([solve(rhs[:, k]) for k in range(3)])
        return out

    pinned = {0, nb // 3, (2 * nb) // 3}
    groups = _boundary_coloring(L, bnd, pinned)
    X = harmonic(X)
    D = dirichlet_energy(p, X)
    trace = [(D, map_area(p, X))]
    warning = False
    it = 0
    for it in range(1, params.max_iters + 1):
        D_old = D
        for grp in groups:
            if grp.size == 0:
                continue
            verts = bnd[grp]
            LX = L @ X
            b = LX[verts] - diag[verts, None] * X[verts]
            lkk = diag[verts]
            lo = np.where(grp > 0, theta[grp - 1], theta[-1] - curve.length)
            hi = np.where(grp < nb - 1, theta[(grp + 1) % nb], theta[0] + curve.length)
            width = hi - lo
            lo = lo + 1e-3 * width
            hi = hi - 1e-3 * width

            def energy(th):
                P = curve(th)
                return 0.5 * lkk * np.sum(P * P, axis=1) + np.sum(P * b, axis=1)

            a_, b_ = lo.copy(), hi.copy()
            c_ = b_ - _GOLDEN * (b_ - a_)
            d_ = a_ + _GOLDEN * (b_ - a_)
            fc, fd = energy(c_), energy(d_)
            for _ in range(golden_iters):
                left = fc < fd
                b_ = np.where(left, d_, b_)
                a_ = np.where(left, a_, c_)
                new_c = b_ - _GOLDEN * (b_ - a_)
                new_d = a_ + _GOLDEN * (b_ - a_)
                # reuse the surviving interior point
                c_n = np.where(left, new_c, d_)
                d_n = np.where(left, c_, new_d)
                fc, fd = np.where(left, energy(c_n), fd), np.where(left, fc, energy(d_n))
                c_, d_ = c_n, d_n
            cand = 0.5 * (a_ + b_)
            better = energy(cand) < energy(theta[grp])
            theta[grp] = np.where(better, cand, theta[grp])
            X[verts] = curve(theta[grp])
        X = harmonic(X)
        D = dirichlet_energy(p, X)
        A = map_area(p, X)
        if D > D_old * (1 + 1e-13):
            warning = True
            logger.warning("Dirichlet energy increased (%.3e -> %.3e); stopping", D_old, D)
            break
        trace.append((D, A))
        if (D_old - D) <= params.gradient_tolerance * D_old:
            break
    else:
        warning = True
    p = DiscParam(uv, tri, X, bnd, theta.copy(), curve, p._ops)
    A = map_area(p)
    D = dirichlet_energy(p)
    return DiscPlateauResult(p, A, D, D - A, conformal_defect(p), trace, it, warning)
