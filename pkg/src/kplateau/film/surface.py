"""Triangle-mesh Plateau solver.

The area gradient of a triangle mesh is ``L X`` with the cotangent
Laplacian ``L`` of the current mesh.  Each iteration solves
``L_FF Y_F = -L_FB X_B`` for the free vertices (the harmonic map of the
current metric) and uses ``Y - X`` as a preconditioned descent direction.
Each boundary loop may also slide along its curve by a common phase
shift.  Per-vertex sliding would let vertices bunch up and cut corners of
the inscribed polygon, which lowers the discrete area for the wrong
reason.  A
backtracking line search accepts only strict area decreases without
triangle inversions.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..mesh import MeshError, SurfaceMesh, area, triangle_areas, triangle_normals
from ..topology import Polyline, TopologyError
from .curves import ArcCurve
from .disc import disc_triangulation
from .params import SolverParams
from .remesh import remesh

logger = logging.getLogger(__name__)


def cotan_laplacian(V: np.ndarray, T: np.ndarray) -> sp.csr_matrix:
    """Cotangent Laplacian with ``(L V)_i = dA/dx_i`` (positive semidefinite)."""
    n = len(V)
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = T[:, (k + 1) % 3], T[:, (k + 2) % 3], T[:, k]
        a = V[i] - V[o]
        b = V[j] - V[o]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        cot = np.einsum("ij,ij->i", a, b) / np.maximum(cross, 1e-300)
        w = 0.5 * cot
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-0.5 * w, -0.5 * w, 0.5 * w, 0.5 * w]
    L = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    return L


def lumped_mass(V: np.ndarray, T: np.ndarray) -> np.ndarray:
    A = 0.5 * np.linalg.norm(np.cross(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]]), axis=1)
    M = np.zeros(len(V))
    for k in range(3):
        np.add.at(M, T[:, k], A / 3.0)
    return M


def area_gradient(mesh: SurfaceMesh) -> np.ndarray:
    """Exact gradient of :func:`kplateau.mesh.area` with respect to the vertices."""
    return cotan_laplacian(mesh.vertices, mesh.triangles) @ mesh.vertices


def _as_curves(boundary) -> list[ArcCurve]:
    if isinstance(boundary, Polyline):
        boundary = [boundary]
    return [b if isinstance(b, ArcCurve) else ArcCurve(b) for b in boundary]


def _check_curve(poly: Polyline):
    P = poly.points - poly.points.mean(axis=0)
    scale = np.abs(P).max()
    if scale == 0 or np.linalg.svd(P, compute_uv=False)[1] <= 1e-12 * scale:
        raise TopologyError("degenerate (collinear) boundary curve")


# initial surfaces ------------------------------------------------------------

def cone_mesh(boundary: Polyline, n_boundary: int = 64, n_rings: int | None = None) -> SurfaceMesh:
    """Cone over the centroid of ``boundary`` on a ring triangulation of the disc."""
    _check_curve(boundary)
    curve = ArcCurve(boundary)
    if n_rings is None:
        n_rings = max(2, int(round(n_boundary / (2 * np.pi))))
    uv, tri, bnd = disc_triangulation(n_rings, n_boundary)
    r = np.linalg.norm(uv, axis=1)
    phi = np.arctan2(uv[:, 1], uv[:, 0]) % (2 * np.pi)
    s = curve.length * phi / (2 * np.pi)
    c = curve.centroid
    V = c + r[:, None] * (curve(s) - c)
    binding = np.full(len(uv), np.nan)
    binding[bnd] = s[bnd]
    cidx = np.full(len(uv), -1)
    cidx[bnd] = 0
    return SurfaceMesh(V, tri, [bnd], binding, cidx)


def _matched_offset(c1: ArcCurve, c2: ArcCurve, n: int):
    """Phase and orientation of ``c2`` best matching ``c1`` sampled at ``n`` points."""
    s1 = c1.uniform(n)
    P1 = c1(s1) - c1.centroid
    best = None
    for sign in (1, -1):
        for k in range(n):
            s2 = (sign * c2.uniform(n) + c2.length * k / n) % c2.length
            cost = np.sum((c2(s2) - c2.centroid - P1) ** 2)
            if best is None or cost < best[0] - 1e-12:
                best = (cost, s2)
    return s1, best[1]


def annulus_mesh(
    c1: Polyline, c2: Polyline, n_around: int = 48, n_along: int | None = None
) -> SurfaceMesh:
    """Ruled band between two closed curves with matched parametrisations."""
    _check_curve(c1)
    _check_curve(c2)
    a1, a2 = ArcCurve(c1), ArcCurve(c2)
    s1, s2 = _matched_offset(a1, a2, n_around)
    P1, P2 = a1(s1), a2(s2)
    edge = 0.5 * (a1.length + a2.length) / n_around
    if n_along is None:
        gap = np.mean(np.linalg.norm(P2 - P1, axis=1))
        n_along = max(2, int(round(gap / (edge * np.sqrt(3) / 2))))
    t = np.linspace(0.0, 1.0, n_along + 1)
    V = ((1 - t)[:, None, None] * P1[None] + t[:, None, None] * P2[None]).reshape(-1, 3)
    idx = np.arange((n_along + 1) * n_around).reshape(n_along + 1, n_around)
    tris = []
    for j in range(n_along):
        for i in range(n_around):
            a, b = idx[j, i], idx[j, (i + 1) % n_around]
            c, d = idx[j + 1, i], idx[j + 1, (i + 1) % n_around]
            if (i + j) % 2 == 0:
                tris += [[a, b, d], [a, d, c]]
            else:
                tris += [[a, b, c], [b, d, c]]
    binding = np.full(len(V), np.nan)
    binding[idx[0]] = s1
    binding[idx[-1]] = s2
    cidx = np.full(len(V), -1)
    cidx[idx[0]] = 0
    cidx[idx[-1]] = 1
    return SurfaceMesh(V, np.array(tris), [idx[0], idx[-1][::-1]], binding, cidx)


# diagnostics -----------------------------------------------------------------

def _unique_edges(T):
    E = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    return np.unique(np.sort(E, axis=1), axis=0)


def neck_radius(mesh: SurfaceMesh, n_levels: int = 32, edges=None) -> tuple[float, float]:
    """``(neck, scale)`` for a two-loop film.

    The axis joins the two boundary-loop centroids.  At ``n_levels`` planes
    normal to the axis the mesh edges are cut, and the cross-section radius
    is the largest distance of a cut point from the axis.  ``neck`` is the
    smallest such radius (zero if a plane meets no edge, i.e. the film has
    split) and ``scale`` the mean loop radius.
    """
    if len(mesh.boundary_loops) != 2:
        return np.inf, 1.0
    V = mesh.vertices
    c = [V[l].mean(axis=0) for l in mesh.boundary_loops]
    scale = float(np.mean([np.linalg.norm(V[l] - ci, axis=1).mean() for l, ci in zip(mesh.boundary_loops, c)]))
    axis = c[1] - c[0]
    h = np.linalg.norm(axis)
    if h < 1e-12 * scale:
        return np.inf, scale
    axis = axis / h
    rel = V - c[0]
    tau = rel @ axis
    radial = rel - tau[:, None] * axis
    E = _unique_edges(mesh.triangles) if edges is None else edges
    t0, t1 = tau[E[:, 0]], tau[E[:, 1]]
    levels = h * (np.arange(n_levels) + 0.5) / n_levels
    neck = np.inf
    for lv in levels:
        m = (np.minimum(t0, t1) <= lv) & (np.maximum(t0, t1) > lv)
        if not np.any(m):
            return 0.0, scale
        w = (lv - t0[m]) / (t1[m] - t0[m])
        pts = radial[E[m, 0]] + w[:, None] * (radial[E[m, 1]] - radial[E[m, 0]])
        neck = min(neck, float(np.linalg.norm(pts, axis=1).max()))
    return neck, scale


@dataclass
class MeshPlateauResult:
    """Outcome of :func:`solve_mesh_plateau`.

    ``trace`` rows are ``(iter, area, grad_norm, flag)``.
    """

    mesh: SurfaceMesh
    area: float
    grad_norm: float
    iterations: int
    converged: bool
    collapse: bool
    warning: bool
    trace: list = field(default_factory=list)
    neck_ratio: float = np.inf

    def trace_csv(self, path) -> None:
        rows = ["iter,objective,grad_norm,flag"]
        rows += [f"{i},{a:.17g},{g:.17g},{f}" for i, a, g, f in self.trace]
        Path(path).write_text("\n".join(rows) + "\n")


def _boundary_info(mesh: SurfaceMesh, curves):
    bnd = np.concatenate(mesh.boundary_loops) if mesh.boundary_loops else np.array([], int)
    if mesh.boundary_binding is None or mesh.boundary_curve is None:
        raise MeshError("boundary vertices must be bound to a curve")
    s = mesh.boundary_binding[bnd]
    k = mesh.boundary_curve[bnd]
    if np.any(~np.isfinite(s)) or np.any(k < 0) or np.any(k >= len(curves)):
        raise MeshError("every boundary vertex must carry a binding")
    return bnd, s.copy(), k.copy()


def _place(curves, s, k):
    out = np.empty((len(s), 3))
    for ci, c in enumerate(curves):
        m = k == ci
        if np.any(m):
            out[m] = c(s[m])
    return out


def _tangents(curves, s, k):
    out = np.empty((len(s), 3))
    for ci, c in enumerate(curves):
        m = k == ci
        if np.any(m):
            out[m] = c.tangent(s[m])
    return out


def solve_mesh_plateau(
    boundary,
    init: SurfaceMesh,
    params: SolverParams = SolverParams(),
) -> MeshPlateauResult:
    """Minimise the area of ``init`` with its boundary held on ``boundary``.

    Parameters
    ----------
    boundary : Polyline or sequence of Polyline
        Curve ``k`` hosts the boundary vertices with ``boundary_curve == k``.
    init : SurfaceMesh
        Starting surface; all boundary vertices must be bound.
    params : SolverParams

    Returns
    -------
    MeshPlateauResult
    """
    curves = _as_curves(boundary)
    mesh = init.copy()
    bnd, s, k = _boundary_info(mesh, curves)
    mesh.vertices[bnd] = _place(curves, s, k)
    mesh.validate()
    edges_b = np.concatenate([np.linalg.norm(mesh.vertices[l] - mesh.vertices[np.roll(l, -1)], axis=1) for l in mesh.boundary_loops])
    target = float(edges_b.mean())

    lengths = np.array([c.length for c in curves])
    A = area(mesh)
    trace = [(0, A, np.nan, "init")]
    history = [A]
    edge_cache = None
    warning = converged = collapse = False
    below = 0
    neck_ratio = np.inf
    accepted = 0
    g_norm = np.nan
    it = 0
    for it in range(1, params.max_iters + 1):
        V, T = mesh.vertices, mesh.triangles
        n = len(V)
        is_b = np.zeros(n, dtype=bool)
        is_b[bnd] = True
        free = np.nonzero(~is_b)[0]
        L = cotan_laplacian(V, T)
        G = L @ V
        M = lumped_mass(V, T)
        tang = _tangents(curves, s, k)
        gs = np.einsum("ij,ij->i", G[bnd], tang)
        slide = params.slide_boundary
        loop_id = np.repeat(np.arange(len(mesh.boundary_loops)), [len(l) for l in mesh.boundary_loops])
        g_phase = np.bincount(loop_id, gs)
        m_phase = np.bincount(loop_id, M[bnd])
        g_norm = float(np.sqrt(np.sum(G[free] ** 2 / M[free, None]) + (np.sum(g_phase ** 2 / m_phase) if slide else 0.0)))
        if g_norm < params.gradient_tolerance:
            converged = True
            trace.append((it, A, g_norm, "converged"))
            break

        D = np.zeros_like(V)
        ok = False
        if free.size:
            try:
                L_FF = L[free][:, free].tocsc()
                rhs = -(L[free][:, bnd] @ V[bnd])
                lu = spla.splu(L_FF)
                Y = lu.solve(rhs)
                D[free] = Y - V[free]
                ok = np.all(np.isfinite(D)) and np.sum(G[free] * D[free]) < 0
            except RuntimeError:
                ok = False
        if not ok:
            D[free] = -G[free] / M[free, None]
            scale = np.abs(D).max()
            if scale > 0:
                D *= 0.25 * target / scale
        ds = np.zeros_like(s)
        if slide:
            diag = np.bincount(loop_id, L.diagonal()[bnd])
            spacing = np.array([lengths[k[loop_id == j][0]] / np.sum(loop_id == j) for j in range(len(diag))])
            dphi = np.clip(-g_phase / np.maximum(diag, 1e-12), -0.45 * spacing, 0.45 * spacing)
            ds = dphi[loop_id]

        N0 = triangle_normals(mesh)

        def attempt(alpha, use_slide):
            Vt = V + alpha * D
            st = s
            if use_slide:
                st = np.mod(s + alpha * ds, lengths[k])
                Vt[bnd] = _place(curves, st, k)
            trial = mesh.with_vertices(Vt)
            if not np.all(np.einsum("ij,ij->i", N0, triangle_normals(trial)) > 0):
                return None
            return trial, st, area(trial)

        best = None
        for use_slide in ((True, False) if slide else (False,)):
            alpha = 1.0
            for _ in range(params.max_backtracks):
                res = attempt(alpha, use_slide)
                if res is not None and res[2] < A:
                    best = res
                    break
                alpha *= params.shrink
            if best is not None:
                # expand while the unit step keeps paying off
                while alpha >= 1.0 and alpha < 8.0:
                    res = attempt(2 * alpha, use_slide)
                    if res is None or res[2] >= best[2]:
                        break
                    best, alpha = res, 2 * alpha
                break
        neck_small = neck_ratio < params.collapse_ratio
        if best is None:
            trace.append((it, A, g_norm, "reject"))
            if neck_small:
                collapse = True
                trace.append((it, A, g_norm, "collapse"))
                break
            # no admissible decrease: converged at machine precision if the
            # gradient is small, otherwise a stalled line search
            converged = g_norm < 1e3 * params.gradient_tolerance
            warning = not converged
            if warning:
                logger.warning("mesh line search stalled at grad %.3e", g_norm)
            break
        trial, st, At = best
        rel = (A - At) / A
        mesh, s, A = trial, st, At
        mesh.boundary_binding = mesh.boundary_binding.copy()
        mesh.boundary_binding[bnd] = s
        accepted += 1
        flag = "step"

        if edge_cache is None or not np.array_equal(edge_cache[0], mesh.triangles):
            edge_cache = (mesh.triangles, _unique_edges(mesh.triangles))
        neck, scale = neck_radius(mesh, edges=edge_cache[1])
        neck_ratio = neck / scale
        below = below + 1 if neck_ratio < params.collapse_ratio else 0
        degenerate = triangle_areas(mesh).min() <= 1e-12 * target ** 2
        if below >= params.collapse_patience or (degenerate and below > 0):
            collapse = True
            trace.append((it, A, g_norm, "collapse"))
            break
        if degenerate:
            warning = True
            trace.append((it, A, g_norm, "degenerate"))
            logger.warning("film mesh degenerated without a collapsing neck")
            break

        if params.remesh_every and accepted % params.remesh_every == 0:
            new, counts = remesh(mesh, target, params.edge_min_factor, params.edge_max_factor)
            A_new = area(new)
            if A_new <= A and sum(counts.values()):
                mesh, A = new, A_new
                bnd, s, k = _boundary_info(mesh, curves)
                flag = "remesh"
        trace.append((it, A, g_norm, flag))
        history.append(A)
        w = params.stagnation_window
        if rel < 1e-15 or (len(history) > w and history[-w - 1] - A < params.area_tolerance * A):
            converged = True
            break
    return MeshPlateauResult(mesh, A, g_norm, it, converged, collapse, warning, trace, neck_ratio)


def segment_coordinates(curve: ArcCurve, s) -> tuple[np.ndarray, np.ndarray]:
    """Segment index and fraction of arc-length parameters ``s`` on ``curve``."""
    s = np.mod(np.asarray(s, dtype=float), curve.length)
    i = np.clip(np.searchsorted(curve._cum, s, side="right") - 1, 0, len(curve._cum) - 2)
    seg = curve._cum[i + 1] - curve._cum[i]
    return i, (s - curve._cum[i]) / seg


def transplant(mesh: SurfaceMesh, old_boundary, new_boundary, mode: str = "relative") -> SurfaceMesh:
    """Move ``mesh`` from ``old_boundary`` onto ``new_boundary`` for a warm start.

    ``mode='relative'`` keeps each bound vertex at the same fraction of its
    curve's length; ``mode='segment'`` keeps segment index and in-segment
    fraction (the curves must then have equally many points).  The boundary
    displacement is extended harmonically (cotangent weights of the current
    mesh) into the interior.
    """
    old = _as_curves(old_boundary)
    new = _as_curves(new_boundary)
    if len(old) != len(new):
        raise ValueError("old and new boundaries must have the same number of curves")
    bnd, s, k = _boundary_info(mesh, old)
    s_new = np.empty_like(s)
    for ci, (co, cn) in enumerate(zip(old, new)):
        m = k == ci
        if mode == "relative":
            s_new[m] = s[m] * cn.length / co.length
        elif mode == "segment":
            if len(co._cum) != len(cn._cum):
                raise ValueError("segment transplant needs curves with equal point counts")
            i, f = segment_coordinates(co, s[m])
            s_new[m] = cn._cum[i] + f * (cn._cum[i + 1] - cn._cum[i])
        else:
            raise ValueError(f"unknown transplant mode {mode!r}")
    disp_b = _place(new, s_new, k) - mesh.vertices[bnd]
    n = mesh.n_vertices
    is_b = np.zeros(n, dtype=bool)
    is_b[bnd] = True
    free = np.nonzero(~is_b)[0]
    disp = np.zeros((n, 3))
    disp[bnd] = disp_b
    if free.size:
        L = cotan_laplacian(mesh.vertices, mesh.triangles)
        lu = spla.splu(L[free][:, free].tocsc())
        disp[free] = lu.solve(-(L[free][:, bnd] @ disp_b))
    out = mesh.copy()
    out.vertices = mesh.vertices + disp
    out.boundary_binding = out.boundary_binding.copy()
    out.boundary_binding[bnd] = s_new
    return out
