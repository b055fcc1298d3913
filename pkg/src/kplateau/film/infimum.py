"""Film infimum over a spanning class, with verification by test loops."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mesh import SurfaceMesh
from ..topology import Polyline, SpanningClassSpec, generate_spanning_loops, spanning_test
from .params import SolverError, SolverParams
from .surface import MeshPlateauResult, annulus_mesh, cone_mesh, solve_mesh_plateau


@dataclass
class SpanningReport:
    n_loops: int
    n_hit: int
    failed: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.n_hit == self.n_loops


@dataclass
class FilmResult:
    """``(mesh, area, report)`` plus solver diagnostics.

    ``active`` lists the indices of the curves the film is bound to.
    ``collapse`` is set when a two-loop band pinched off; the film returned
    in that case is the pair of separate discs.
    """

    mesh: SurfaceMesh
    area: float
    report: SpanningReport
    solve: MeshPlateauResult
    active: list
    collapse: bool = False

    def __iter__(self):
        yield self.mesh
        yield self.area
        yield self.report


def active_curves(n_curves: int, spec: SpanningClassSpec) -> list[int]:
    if spec.mode == "single":
        return [0]
    if len(spec.targets) != n_curves:
        raise ValueError("one target per boundary curve required")
    return [i for i, v in enumerate(spec.targets) if v != 0]


def _merge(meshes: list[SurfaceMesh]) -> SurfaceMesh:
    V, T, loops, bind, cidx = [], [], [], [], []
    off = 0
    for j, m in enumerate(meshes):
        V.append(m.vertices)
        T.append(m.triangles + off)
        loops += [l + off for l in m.boundary_loops]
        bind.append(m.boundary_binding)
        c = m.boundary_curve.copy()
        c[c >= 0] = j
        cidx.append(c)
        off += m.n_vertices
    return SurfaceMesh(np.vstack(V), np.vstack(T), loops, np.concatenate(bind), np.concatenate(cidx))


def initial_film(curves: list[Polyline], n_boundary: int = 64) -> SurfaceMesh:
    """Cone for one loop, ruled band for two."""
    if len(curves) == 1:
        return cone_mesh(curves[0], n_boundary)
    if len(curves) == 2:
        return annulus_mesh(curves[0], curves[1], n_boundary)
    raise SolverError("films spanning more than two loops are not supported")


def verify_spanning(mesh: SurfaceMesh, midlines, spec: SpanningClassSpec, k: int, seed: int) -> SpanningReport:
    """Intersect ``mesh`` with ``k`` generated test loops."""
    loops = generate_spanning_loops(midlines, spec, k, seed=seed)
    failed = [i for i, g in enumerate(loops) if not spanning_test(mesh, g)]
    return SpanningReport(len(loops), len(loops) - len(failed), failed)


def film_infimum(
    boundaries,
    spec: SpanningClassSpec = SpanningClassSpec(),
    params: SolverParams = SolverParams(),
    init: SurfaceMesh | None = None,
    n_boundary: int = 64,
    n_test_loops: int = 12,
    verify: bool = True,
) -> FilmResult:
    """Least-area film in the spanning class of ``spec``.

    Parameters
    ----------
    boundaries : Polyline or list of Polyline
        All midlines; the active ones (per ``spec``) carry the film.
    init : SurfaceMesh, optional
        Warm start bound to the active curves (curve indices refer to the
        active list).
    verify : bool
        Check the result against generated test loops and raise
        :class:`SolverError` if any of them misses the film.

    Returns
    -------
    FilmResult
        Unpacks as ``(mesh, area, report)``.
    """
    if isinstance(boundaries, Polyline):
        boundaries = [boundaries]
    boundaries = list(boundaries)
    if any(not b.closed for b in boundaries):
        raise ValueError("film boundaries must be closed")
    idx = active_curves(len(boundaries), spec)
    curves = [boundaries[i] for i in idx]
    start = initial_film(curves, n_boundary) if init is None else init
    res = solve_mesh_plateau(curves, start, params)
    mesh, area, collapse = res.mesh, res.area, res.collapse
    if collapse and len(curves) == 2:
        discs = [solve_mesh_plateau(c, cone_mesh(c, n_boundary), params) for c in curves]
        mesh = _merge([d.mesh for d in discs])
        area = float(sum(d.area for d in discs))
    report = SpanningReport(0, 0)
    if verify:
        scale = np.mean([np.linalg.norm(np.diff(c.points, axis=0), axis=1).mean() for c in curves])
        vspec = SpanningClassSpec(spec.mode, max(spec.avoidance_radius, 0.25 * scale), spec.targets)
        report = verify_spanning(mesh, boundaries, vspec, n_test_loops, params.seed)
        if not report.passed:
            raise SolverError(
                f"film escaped its spanning class: {len(report.failed)} of {report.n_loops} test loops missed"
            )
    return FilmResult(mesh, area, report, res, idx, collapse)
