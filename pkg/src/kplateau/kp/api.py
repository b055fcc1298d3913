"""Public entry points of the Kirchhoff-Plateau optimizer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..film.infimum import film_infimum
from ..film.params import SolverError, SolverParams
from ..film.surface import transplant
from ..mesh import SurfaceMesh
from ..rod import (
    CrossSection,
    FramedCurve,
    MaterialLaw,
    RodConfig,
    RodError,
    ciarlet_necas_residual,
    local_injectivity_margin,
)
from ..topology import Polyline, SpanningClassSpec, TopologyError, framing_link
from .engine import InfeasibleStartError, Model, descend
from .problem import EnergyBreakdown, KPProblem, MultiRodProblem, OptTrace
from .terms import RodTerms, elastica_density


def total_energy(p: KPProblem, w: RodConfig, params: SolverParams = SolverParams(), check_cn: bool = True) -> EnergyBreakdown:
    """Energy breakdown of the configuration ``w`` for problem ``p``.

    The film (if ``p.sigma > 0``) is the least-area film on the film curve of
    ``w`` in the spanning class ``p.spanning``.  A configuration outside the
    local-injectivity set gets ``total = inf``.

    Raises
    ------
    SolverError
        If the film solver fails; the message names the configuration.
    """
    p = p.replace(rod=w)
    t = RodTerms(p)
    y = w.densities.stacked()
    x, R = t.reconstruct(y[None])
    x, R = x[0], R[0]
    e = EnergyBreakdown()
    e.e_sh = float(t.elastic(y[None])[0])
    e.e_g = float(t.gravity(x[None], R[None])[0])
    margin = local_injectivity_margin(w, p.section)
    e.e_ni_flag = bool(margin >= 0)
    e.closure_pos = float(np.linalg.norm(x[-1] - x[0]))
    e.closure_tan = float(np.linalg.norm(R[-1, :, 0] - R[0, :, 0]))
    e.angle = float(abs(t.constraints(x[None], R[None])[0, 6]))
    curve = FramedCurve(t.s_fine, x, R, t.L / t.N)
    try:
        e.link = framing_link(curve.subsample(t.link_points + 1), t.link_eps)
        e.link_defect = abs(e.link - p.target_z)
    except TopologyError:
        e.link, e.link_defect = None, 1
    e.delta_margin = t.delta(x) - p.delta0
    if check_cn and e.e_ni_flag:
        try:
            e.cn = float(ciarlet_necas_residual(w, p.section, curve=curve))
        except RodError:
            e.cn = math.nan
    if p.sigma > 0:
        idx = (np.arange(p.film_points) * t.N) // p.film_points
        poly = Polyline(t.film_points(x[None], R[None])[0][idx], True)
        try:
            film = film_infimum(poly, p.spanning, params, n_boundary=p.film_points)
        except SolverError as exc:
            raise SolverError(f"film on the rod boundary failed: {exc}") from exc
        e.film_area = film.area
        e.e_film = 2.0 * p.sigma * film.area
    return e.finalize()


@dataclass
class KPResult:
    """``(rod, film, trace)`` plus the final energy breakdown."""

    rod: RodConfig
    film: Optional[SurfaceMesh]
    trace: OptTrace
    energy: EnergyBreakdown
    curve: FramedCurve
    checks: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.rod
        yield self.film
        yield self.trace


def _final_film(model: Model, st):
    """Re-solve the final film with spanning verification."""
    if st.film is None:
        return None, {}
    try:
        film = model.solve_film(st.film_polys, st, verify=True)
    except SolverError as exc:
        return st.film.mesh, {"spanning_ok": False, "spanning_error": str(exc)}
    return film.mesh, {"spanning_ok": film.report.passed, "film_collapse": film.collapse}


def minimize_kp(p: KPProblem, params: SolverParams = SolverParams()) -> KPResult:
    """Minimise the Kirchhoff-Plateau energy of a single rod.

    Feasible descent on the density grid: central-difference gradients,
    projection onto the closure and end-angle constraints, clamping into
    the local-injectivity set, barriers for self-contact and the global
    radius of curvature, and step rejection for the framing link and the
    knot-class guard.

    Returns
    -------
    KPResult
        Unpacks as ``(rod, film, trace)``; ``trace.status`` is
        ``'converged'``, ``'max_iters'`` or ``'stalled'``.

    Raises
    ------
    InfeasibleStartError
        If the initial guess violates a hard constraint.
    """
    model = Model([p], params, sigma=p.sigma, spanning=p.spanning)
    st, trace = descend(model, params)
    mesh, checks = _final_film(model, st)
    checks.update(st.info)
    return KPResult(model.config(st.z), mesh, trace, st.energy, model.curve(st), checks)


@dataclass
class LinkedResult:
    rods: tuple
    film: Optional[SurfaceMesh]
    trace: OptTrace
    energy: EnergyBreakdown
    curves: tuple
    checks: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.rods
        yield self.film
        yield self.trace


def minimize_linked(p: MultiRodProblem, params: SolverParams = SolverParams()) -> LinkedResult:
    """Joint descent of two linked rods; rod 2 also moves rigidly.

    The pairwise linking number is a hard check.  Without repulsion the
    midlines are kept at least ``r1 + r2`` apart (barrier plus rejection);
    with repulsion the repulsive energy is added and must stay finite.
    """
    p1, p2 = p.rods
    spanning = p.spanning or SpanningClassSpec("multi", targets=(1, 1))
    model = Model(
        [p1, p2], params, rigid=True, sigma=p.sigma, spanning=spanning, repulsion=p.repulsion,
        pull=p.pull, overlap_weight=p.overlap_weight, target_eta=p.target_eta,
    )
    st, trace = descend(model, params)
    mesh, checks = _final_film(model, st)
    checks.update(st.info)
    rods = (model.config(st.z, 0), model.config(st.z, 1))
    curves = (model.curve(st, 0), model.curve(st, 1))
    return LinkedResult(rods, mesh, trace, st.energy, curves, checks)


def elastica_plateau(
    curve: RodConfig,
    f: Callable,
    sigma: float = 0.0,
    params: SolverParams = SolverParams(),
    n_steps: Optional[int] = None,
    film_points: int = 48,
    check_convexity: bool = True,
):
    """Minimise ``int f(kappa, tau) ds + sigma * Area`` over closed curves of fixed length.

    ``curve`` supplies the initial densities; ``(k1, k2, w)`` are read as
    curvature ``hypot(k1, k2)`` and torsion ``w + phi'`` with
    ``phi = atan2(k2, k1)``.  The film spans the curve itself.

    Returns
    -------
    (FramedCurve, SurfaceMesh or None, OptTrace)
    """
    if check_convexity:
        lifted = MaterialLaw(density=lambda s3, s: f(np.hypot(s3[..., 0], s3[..., 1]), s3[..., 2]))
        if not lifted.check_convexity():
            raise ValueError("f failed the sampled convexity check")
    section = CrossSection.disc(1e-3 * curve.length)
    p = KPProblem(
        curve, section, sigma=0.5 * sigma, n_steps=n_steps, film_points=film_points,
    )
    model = Model([p], params, curve_mode=True, elastica=elastica_density(f), sigma=0.5 * sigma)
    st, trace = descend(model, params)
    mesh, _ = _final_film(model, st)
    return model.curve(st), mesh, trace


@dataclass
class DimRedRow:
    eps: Optional[float]
    total: float
    gap: float
    status: str
    feasible: bool
    energy: Optional[EnergyBreakdown] = None


def dimensional_reduction_suite(
    p: KPProblem, eps_list: Sequence[float], params: SolverParams = SolverParams()
) -> list[DimRedRow]:
    """Minimise the thickness-``eps`` problems and the midline limit.

    For each ``eps`` the section becomes ``eps A``, gravity is scaled by
    ``1 / eps^2`` (so the rod weight does not vanish) and the film wets the
    inner tube line.  The limit problem keeps the unit section for the
    line density, drops every thickness constraint except ``delta0`` and
    spans the film on the midline.  The last row (``eps=None``) is the
    limit; ``gap`` is ``|E_eps - E_0|``.
    """
    eps = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_list must be positive and strictly decreasing")
    law = p.material
    limit = p.replace(film_boundary="midline")
    try:
        r0 = minimize_kp(limit, params)
        e0, st0 = r0.energy.total, r0.trace.status
    except InfeasibleStartError:
        e0, st0 = math.nan, "infeasible"
    rows = []
    for e in eps:
        m = MaterialLaw(law.coefficients, law.density, law.growth_p, law.rho, law.gravity / e ** 2)
        pe = p.replace(section=p.section.scaled(e), material=m, film_boundary="inner")
        try:
            res = minimize_kp(pe, params)
            tot = res.energy.total
            rows.append(DimRedRow(e, tot, abs(tot - e0), res.trace.status, True, res.energy))
        except InfeasibleStartError:
            rows.append(DimRedRow(e, math.nan, math.nan, "infeasible", False))
    rows.append(DimRedRow(None, e0, 0.0, st0, math.isfinite(e0), r0.energy if math.isfinite(e0) else None))
    return rows


@dataclass
class QuasistaticTrace:
    times: list = field(default_factory=list)
    areas: list = field(default_factory=list)
    meshes: list = field(default_factory=list)
    collapse: bool = False
    collapse_time: Optional[float] = None

    def to_csv(self, path) -> None:
        lines = ["time,area,collapse"]
        for t, a in zip(self.times, self.areas):
            lines.append(f"{t:.17g},{a:.17g},0")
        if self.collapse:
            lines.append(f"{self.collapse_time:.17g},nan,1")
        from pathlib import Path

        Path(path).write_text("\n".join(lines) + "\n")


def _hausdorff(a: Sequence[Polyline], b: Sequence[Polyline]) -> float:
    out = 0.0
    for p, q in zip(a, b):
        d = np.linalg.norm(p.points[:, None, :] - q.points[None, :, :], axis=-1)
        out = max(out, float(d.min(axis=1).max()), float(d.min(axis=0).max()))
    return out


def quasistatic_run(
    family: Callable[[float], Sequence[Polyline]] | Sequence,
    times: Sequence[float],
    params: SolverParams = SolverParams(),
    spec: SpanningClassSpec = SpanningClassSpec(),
    n_boundary: int = 96,
    max_jump: Optional[float] = None,
    verify: bool = True,
) -> QuasistaticTrace:
    """Least-area films along a moving boundary, each warm-started from the last.

    Parameters
    ----------
    family : callable or sequence
        ``family(t)`` (or ``family[i]``) returns the boundary polyline(s) at
        time ``times[i]``.
    max_jump : float, optional
        Largest allowed Hausdorff distance between consecutive boundaries,
        default a quarter of the first boundary's mean radius.

    Returns
    -------
    QuasistaticTrace
        Truncated at the first time the film collapses (``collapse=True``).
    """
    def at(i, t):
        c = family(t) if callable(family) else family[i]
        return [c] if isinstance(c, Polyline) else list(c)

    curves = [at(i, t) for i, t in enumerate(times)]
    if max_jump is None:
        c0 = curves[0][0].points
        max_jump = 0.25 * float(np.linalg.norm(c0 - c0.mean(axis=0), axis=1).mean())
    for a, b in zip(curves, curves[1:]):
        if _hausdorff(a, b) > max_jump:
            raise ValueError("boundary family jumps between consecutive times")
    out = QuasistaticTrace()
    prev = None
    for t, cs in zip(times, curves):
        init = None
        if prev is not None:
            init = transplant(prev[0].mesh, prev[1], cs, mode="relative")
        res = film_infimum(cs, spec, params, init=init, n_boundary=n_boundary, verify=verify)
        if res.collapse:
            out.collapse = True
            out.collapse_time = float(t)
            break
        out.times.append(float(t))
        out.areas.append(float(res.area))
        out.meshes.append(res.mesh)
        prev = (res, cs)
    return out
