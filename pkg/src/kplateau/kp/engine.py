"""Feasible descent engine shared by the single-rod, linked and curve models.

Iterates stay on the closure/angle constraint manifold: every trial point
``z + alpha d`` is clamped into the local-injectivity set and pulled back
onto the constraints by a Gauss-Newton restoration.  Integer constraints
(framing link, pairwise link, knot class) and the thickness bound are hard
checks; a trial failing any of them is rejected.  A trial is accepted only
if the merit (energy plus barriers) decreases and the physical total does
not increase, which makes the accepted-energy trace monotone by
construction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..film.curves import ArcCurve
from ..film.infimum import FilmResult, active_curves, film_infimum
from ..film.params import SolverError, SolverParams
from ..film.surface import _boundary_info, area_gradient, segment_coordinates, transplant
from ..rod import (
    DensityField,
    FramedCurve,
    RodConfig,
    RodError,
    ciarlet_necas_residual,
    local_injectivity_margin,
)
from ..rotations import expmap
from ..topology import (
    Polyline,
    SpanningClassSpec,
    TopologyError,
    framing_link,
    gauss_linking,
    knot_class_guard,
    min_distance,
)
from .problem import EnergyBreakdown, OptTrace, TraceRow
from .terms import RodTerms, repulsive_batch

log = logging.getLogger(__name__)


class InfeasibleStartError(ValueError):
    """The initial configuration violates a hard constraint.

    ``constraint`` names the violated constraint.
    """

    def __init__(self, constraint: str, message: str):
        super().__init__(f"infeasible start ({constraint}): {message}")
        self.constraint = constraint


@dataclass
class State:
    z: np.ndarray
    rods: list  # [(x, R)] per rod, placed
    raw: list  # [(x, R)] per rod before the rigid placement
    smooth: float
    phys: float
    film: Optional[FilmResult]
    film_polys: list
    merit: float
    energy: EnergyBreakdown
    info: dict = field(default_factory=dict)


class Model:
    """Variables, energies and checks of one optimisation problem.

    Parameters
    ----------
    problems : list of KPProblem
        One per rod.
    rigid : bool
        Append a translation and a rotation vector acting on rod 2.
    curve_mode : bool
        Pure curve (elastica) problem: no section, no thickness machinery.
    """

    def __init__(
        self,
        problems,
        params: SolverParams,
        rigid: bool = False,
        curve_mode: bool = False,
        elastica=None,
        sigma: float = 0.0,
        spanning: Optional[SpanningClassSpec] = None,
        repulsion=None,
        pull: float = 0.0,
        overlap_weight: float = 1.0,
        target_eta: Optional[int] = None,
    ):
        self.problems = list(problems)
        self.params = params
        self.terms = [RodTerms(p, curve_mode, elastica) for p in self.problems]
        self.curve_mode = curve_mode
        self.rigid = rigid
        self.sigma = float(sigma)
        self.spanning = spanning or SpanningClassSpec()
        self.repulsion = repulsion
        self.pull = float(pull)
        self.overlap_weight = float(overlap_weight)
        self.target_eta = target_eta
        self.slices = []
        off = 0
        for t in self.terms:
            self.slices.append(slice(off, off + 3 * t.n))
            off += 3 * t.n
        self.n_rod_vars = off
        self.n_vars = off + (6 if rigid else 0)
        metric = [t.metric for t in self.terms]
        if rigid:
            L = self.terms[1].L
            metric.append(np.full(3, 1.0 / L))
            metric.append(np.full(3, L))
        self.metric = np.concatenate(metric)
        self.active = active_curves(len(self.terms), self.spanning) if self.sigma > 0 else []
        self.film_idx = [
            (np.arange(p.film_points) * t.N) // p.film_points for p, t in zip(self.problems, self.terms)
        ]
        self.candidates = [None] * len(self.terms)

    # -- helpers --------------------------------------------------------------
    def initial_vector(self) -> np.ndarray:
        parts = [p.rod.densities.stacked().ravel() for p in self.problems]
        if self.rigid:
            parts.append(np.zeros(6))
        return np.concatenate(parts)

    def config(self, z, k: int = 0) -> RodConfig:
        t = self.terms[k]
        dens = DensityField.from_array(t.L, np.asarray(z[self.slices[k]]).reshape(3, t.n))
        clamp = self.problems[k].rod.clamp
        if self.rigid and k == 1:
            Q = expmap(z[-3:])
            x0 = np.asarray(clamp.x0, dtype=float)
            # rotation about the original clamp point, then translation
            clamp = clamp.moved(rotation=Q, translation=x0 - Q @ x0 + z[-6:-3])
        return RodConfig(dens, clamp)

    def curve(self, state: State, k: int = 0) -> FramedCurve:
        t = self.terms[k]
        x, R = state.rods[k]
        return FramedCurve(t.s_fine.copy(), x, R, t.L / t.N)

    def project(self, z):
        z = np.array(z, dtype=float)
        for k, t in enumerate(self.terms):
            z[self.slices[k]] = t.project_N(z[self.slices[k]])
        return z

    # -- batched evaluation ---------------------------------------------------
    def reconstruct(self, Z):
        Z = np.atleast_2d(Z)
        raw, placed = [], []
        for k, t in enumerate(self.terms):
            x, R = t.reconstruct(Z[:, self.slices[k]])
            raw.append((x, R))
            if self.rigid and k == 1:
                Q = expmap(Z[:, -3:])
                p = t.x0
                x = np.einsum("bij,bnj->bni", Q, x - p) + p + Z[:, None, -6:-3]
                R = np.einsum("bij,bnjk->bnik", Q, R)
            placed.append((x, R))
        return raw, placed

    def constraints(self, raw):
        return np.concatenate([t.constraints(x, R) for t, (x, R) in zip(self.terms, raw)], axis=-1)

    def _pair_terms(self, placed):
        """Inter-rod repulsion (physical) and overlap barrier."""
        (x1, _), (x2, _) = placed
        t1, t2 = self.terms
        P1 = x1[:, t1.sub]
        P2 = x2[:, t2.sub]
        B = P1.shape[0]
        if self.repulsion is not None:
            w1 = np.full(P1.shape[1], t1.L / P1.shape[1])
            w2 = np.full(P2.shape[1], t2.L / P2.shape[1])
            rep = np.empty(B)
            step = max(1, 2_000_000 // (P1.shape[1] * P2.shape[1]))
            for i in range(0, B, step):
                rep[i:i + step] = repulsive_batch(
                    P1[i:i + step], P2[i:i + step], w1, w2, self.repulsion.h_epsilon, self.repulsion.h_slope
                )
            return rep, np.zeros(B)
        rsum = t1.radius + t2.radius
        act = 2.0 * rsum
        bar = np.empty(B)
        step = max(1, 2_000_000 // (P1.shape[1] * P2.shape[1]))
        for i in range(0, B, step):
            d = np.linalg.norm(P1[i:i + step, :, None, :] - P2[i:i + step, None, :, :], axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                v = np.where(d < act, (act - d) ** 2 / ((d - rsum) * act), 0.0)
                v = np.where(d > rsum, v, np.inf)
            bar[i:i + step] = self.overlap_weight * v.sum(axis=(-1, -2))
        return np.zeros(B), bar

    def batch(self, Z):
        """Smooth merit, physical energy, constraints and film points for rows of ``Z``."""
        Z = np.atleast_2d(Z)
        raw, placed = self.reconstruct(Z)
        smooth = np.zeros(len(Z))
        phys = np.zeros(len(Z))
        parts = {"e_sh": np.zeros(len(Z)), "e_g": np.zeros(len(Z)), "e_rep": np.zeros(len(Z)), "extra": np.zeros(len(Z))}
        for k, t in enumerate(self.terms):
            x, R = placed[k]
            e = t.elastic(Z[:, self.slices[k]])
            g = t.gravity(x, R)
            parts["e_sh"] += e
            parts["e_g"] += g
            smooth += e + g + t.contact_barrier(raw[k][0]) + t.delta_barrier(raw[k][0], self.candidates[k])
        if len(self.terms) == 2:
            rep, bar = self._pair_terms(placed)
            parts["e_rep"] += rep
            smooth += rep + bar
            if self.pull > 0:
                c1 = placed[0][0][:, :-1].mean(axis=1)
                c2 = placed[1][0][:, :-1].mean(axis=1)
                pl = self.pull * np.sum((c1 - c2) ** 2, axis=-1)
                parts["extra"] += pl
                smooth += pl
        phys = parts["e_sh"] + parts["e_g"] + parts["e_rep"] + parts["extra"]
        cons = self.constraints(raw)
        fpts = [self.terms[k].film_points(*placed[k])[:, self.film_idx[k]] for k in self.active]
        return dict(smooth=smooth, phys=phys, cons=cons, fpts=fpts, raw=raw, placed=placed, parts=parts)

    # -- film -------------------------------------------------------------------
    def solve_film(self, polys, prev: Optional[State] = None, verify: bool = False) -> FilmResult:
        """Film on the film curves of all rods (the spanning class picks the active ones)."""
        init = None
        if prev is not None and prev.film is not None:
            old = [prev.film_polys[k] for k in self.active]
            new = [polys[k] for k in self.active]
            if not prev.film.collapse:
                init = transplant(prev.film.mesh, old, new, mode="segment")
        n_b = self.problems[self.active[0]].film_points
        return film_infimum(
            polys, self.spanning, self.params, init=init, n_boundary=n_b, verify=verify,
        )

    def film_polys(self, fpts_row) -> list:
        polys = []
        j = 0
        for k in range(len(self.terms)):
            if k in self.active:
                polys.append(Polyline(fpts_row[j], True))
                j += 1
            else:
                polys.append(None)
        return polys

    def _all_polys(self, placed_row, fpts_row):
        """Film curves for every rod (inactive rods contribute their midline)."""
        polys = self.film_polys(fpts_row)
        for k, t in enumerate(self.terms):
            if polys[k] is None:
                polys[k] = Polyline(placed_row[k][0][self.film_idx[k]], True)
        return polys

    # -- hard checks ----------------------------------------------------------
    def hard_checks(self, z, placed_row, base: Optional[State]):
        """``(ok, reason, info)`` for one point; ``placed_row`` holds unbatched ``(x, R)``."""
        info = {}
        if self.curve_mode:
            return True, "", info
        margins, deltas, links = [], [], []
        for k, (t, p) in enumerate(zip(self.terms, self.problems)):
            x, R = placed_row[k]
            m = local_injectivity_margin(self.config(z, k), p.section)
            margins.append(m)
            if m < 0:
                info["margin"] = m
                return False, "local_injectivity", info
            dl = t.delta(x)
            deltas.append(dl)
            if dl < p.delta0:
                info["delta_margin"] = dl - p.delta0
                return False, "global_radius", info
        info["margin"] = min(margins)
        info["delta_margin"] = min(d - p.delta0 for d, p in zip(deltas, self.problems))
        if len(self.terms) == 2:
            P1 = Polyline(placed_row[0][0][self.terms[0].sub], True)
            P2 = Polyline(placed_row[1][0][self.terms[1].sub], True)
            dmin = min_distance(P1, P2)
            info["min_distance"] = dmin
            if self.repulsion is not None:
                if dmin <= self.repulsion.h_epsilon:
                    return False, "repulsion_contact", info
            elif dmin < self.terms[0].radius + self.terms[1].radius:
                return False, "overlap", info
            if self.target_eta is not None:
                try:
                    eta = gauss_linking(P1, P2)[1]
                except TopologyError:
                    return False, "pairwise_link", info
                info["eta"] = eta
                if eta != self.target_eta:
                    return False, "pairwise_link", info
        for k, (t, p) in enumerate(zip(self.terms, self.problems)):
            x, R = placed_row[k]
            c = FramedCurve(t.s_fine, x, R, t.L / t.N).subsample(t.link_points + 1)
            try:
                z_link = framing_link(c, t.link_eps)
            except TopologyError:
                return False, "framing_link", info
            links.append(z_link)
            if z_link != p.target_z:
                info["link"] = z_link
                return False, "framing_link", info
        info["link"] = links[0] if len(links) == 1 else tuple(links)
        if base is not None:
            for k, (t, p) in enumerate(zip(self.terms, self.problems)):
                A = Polyline(base.rods[k][0][t.sub], True)
                B = Polyline(placed_row[k][0][t.sub], True)
                try:
                    ok = knot_class_guard(A, B, p.thickness)
                except (TopologyError, ValueError):
                    ok = False
                if not ok:
                    info["knot_ok"] = False
                    return False, "knot_guard", info
        info["knot_ok"] = True
        return True, "", info

    # -- state construction -------------------------------------------------------
    def make_state(self, z, base: Optional[State], verify_film: bool = False):
        """Evaluate ``z`` fully; returns ``(state or None, reason)``."""
        b = self.batch(z[None])
        placed_row = [(x[0], R[0]) for x, R in b["placed"]]
        raw_row = [(x[0], R[0]) for x, R in b["raw"]]
        smooth = float(b["smooth"][0])
        phys = float(b["phys"][0])
        if not (np.isfinite(smooth) and np.isfinite(phys)):
            return None, "barrier"
        ok, reason, info = self.hard_checks(z, placed_row, base)
        if not ok:
            return None, reason
        film = None
        polys = []
        if self.sigma > 0:
            polys = self._all_polys(placed_row, [f[0] for f in b["fpts"]])
            try:
                film = self.solve_film(polys, base, verify=verify_film)
            except (SolverError, TopologyError, ValueError) as exc:
                if base is None:
                    raise
                log.debug("film failed at trial: %s", exc)
                return None, "film"
        film_area = film.area if film is not None else math.nan
        e_film = 2.0 * self.sigma * film.area if film is not None else 0.0
        cons = b["cons"][0]
        energy = self._breakdown(b, raw_row, info, film_area, e_film, cons)
        st = State(
            np.array(z, dtype=float), placed_row, raw_row, smooth, phys, film, polys,
            smooth + e_film, energy, info,
        )
        return st, ""

    def _breakdown(self, b, raw_row, info, film_area, e_film, cons) -> EnergyBreakdown:
        pos = tan = ang = 0.0
        for t, (x, R) in zip(self.terms, raw_row):
            pos = max(pos, float(np.linalg.norm(x[-1] - x[0])))
            tan = max(tan, float(np.linalg.norm(R[-1, :, 0] - R[0, :, 0])))
        if not self.curve_mode:
            ang = float(np.max(np.abs(cons[6::7])))
        e = EnergyBreakdown(
            e_sh=float(b["parts"]["e_sh"][0]),
            e_g=float(b["parts"]["e_g"][0]),
            e_ni_flag=True,
            e_repulsion=float(b["parts"]["e_rep"][0]),
            film_area=film_area,
            e_film=e_film,
            closure_pos=pos,
            closure_tan=tan,
            angle=ang,
            link=info.get("link"),
            link_defect=0,
            delta_margin=info.get("delta_margin", math.inf),
            knot_ok=info.get("knot_ok", True),
            extra=float(b["parts"]["extra"][0]),
        )
        return e.finalize()

    # -- derivatives ---------------------------------------------------------------
    def fd_steps(self, z):
        return 1e-6 * np.maximum(1.0, np.abs(z))

    def derivatives(self, st: State):
        """Central-difference gradient of the merit and Jacobian of the constraints."""
        z = st.z
        h = self.fd_steps(z)
        n = self.n_vars
        E = np.diag(h)
        Z = np.concatenate([z + E, z - E])
        chunk = max(1, int(2e7 // (self.terms[0].N * 9 * 8 * len(self.terms))))
        smooth = np.empty(2 * n)
        cons = None
        fpts = [np.empty((2 * n,) + (len(self.film_idx[k]), 3)) for k in self.active]
        for i in range(0, 2 * n, chunk):
            b = self.batch(Z[i:i + chunk])
            smooth[i:i + chunk] = b["smooth"]
            if cons is None:
                cons = np.empty((2 * n, b["cons"].shape[1]))
            cons[i:i + chunk] = b["cons"]
            for j, f in enumerate(b["fpts"]):
                fpts[j][i:i + chunk] = f
        g = (smooth[:n] - smooth[n:]) / (2 * h)
        dc = cons[:n] - cons[n:]
        if not self.curve_mode:
            for k in range(len(self.terms)):
                col = 7 * k + 6
                dc[:, col] = (dc[:, col] + np.pi) % (2 * np.pi) - np.pi
        J = (dc / (2 * h)[:, None]).T
        if st.film is not None:
            g = g + 2.0 * self.sigma * self._film_gradient(st, fpts, h)
        return g, J

    def _film_gradient(self, st: State, fpts, h):
        mesh = st.film.mesh
        G = area_gradient(mesh)
        idx = st.film.active
        curves = [ArcCurve(st.film_polys[k]) for k in idx]
        n = self.n_vars
        out = np.zeros(n)
        bnd, s, kk = _boundary_info(mesh, curves)
        for j, k in enumerate(idx):
            m = kk == j
            i, f = segment_coordinates(curves[j], s[m])
            nf = len(self.film_idx[k])
            dP = (fpts[self.active.index(k)][:n] - fpts[self.active.index(k)][n:]) / (2 * h)[:, None, None]
            Gb = G[bnd[m]]
            # d X_b = (1 - f) dP_i + f dP_{i+1}
            out += np.einsum("b,vbc,bc->v", 1 - f, dP[:, i, :], Gb)
            out += np.einsum("b,vbc,bc->v", f, dP[:, (i + 1) % nf, :], Gb)
        return out

    # -- restoration ----------------------------------------------------------------
    def restore(self, z, J=None, max_iter: int = 8, tol: Optional[float] = None):
        """Project ``z`` onto the constraint set; ``J`` fixed unless ``None`` (then refreshed)."""
        tol = self.problems[0].restore_tol if tol is None else tol
        Minv = 1.0 / self.metric
        z = self.project(z)
        K = None if J is None else _restoration_operator(J, Minv)
        for _ in range(max_iter):
            raw, _ = self.reconstruct(z[None])
            c = self.constraints(raw)[0]
            if np.max(np.abs(c)) <= tol:
                return z, True
            if J is None:
                st = _Stub(z, [(x[0], R[0]) for x, R in raw])
                Kc = _restoration_operator(self._cons_jacobian(st), Minv)
            else:
                Kc = K
            z = self.project(z - Kc @ c)
        raw, _ = self.reconstruct(z[None])
        c = self.constraints(raw)[0]
        return z, bool(np.max(np.abs(c)) <= tol)

    def _cons_jacobian(self, st):
        z = st.z
        h = self.fd_steps(z)
        E = np.diag(h)
        n = self.n_vars
        raw, _ = self.reconstruct(np.concatenate([z + E, z - E]))
        cons = self.constraints(raw)
        dc = cons[:n] - cons[n:]
        if not self.curve_mode:
            for k in range(len(self.terms)):
                col = 7 * k + 6
                dc[:, col] = (dc[:, col] + np.pi) % (2 * np.pi) - np.pi
        return (dc / (2 * h)[:, None]).T

    def update_candidates(self, st: State):
        if self.curve_mode:
            return
        for k, (t, p) in enumerate(zip(self.terms, self.problems)):
            x = st.raw[k][0]
            if t.delta(x) < 3.0 * p.delta0:
                self.candidates[k] = t.delta_candidates(x)
            else:
                self.candidates[k] = None

    def refresh_merit(self, st: State) -> None:
        """Recompute the barrier part after the candidate triples changed."""
        b = self.batch(st.z[None])
        st.smooth = float(b["smooth"][0])
        st.merit = st.smooth + (st.energy.e_film if st.film is not None else 0.0)

    def cn_check(self, st: State) -> tuple[float, bool]:
        """Voxel Ciarlet-Necas residual (max over rods) and whether it is within voxel error."""
        if self.curve_mode:
            return math.nan, True
        worst, ok = -math.inf, True
        for k, p in enumerate(self.problems):
            try:
                res, _, _, err = ciarlet_necas_residual(
                    self.config(st.z, k), p.section, curve=self.curve(st, k), return_parts=True
                )
            except RodError:
                return math.inf, False
            worst = max(worst, res)
            ok = ok and res <= err
        return worst, ok


@dataclass
class _Stub:
    z: np.ndarray
    raw: list


def _restoration_operator(J, Minv):
    A = (J * Minv[None, :]) @ J.T
    return (Minv[:, None] * J.T) @ np.linalg.pinv(A, rcond=1e-10)


def _initial_state(model: Model) -> State:
    z0 = model.initial_vector()
    z, ok = model.restore(z0, None, max_iter=30)
    if not ok:
        raise InfeasibleStartError("closure", "initial guess cannot be brought onto the closure constraints")
    if not model.curve_mode:
        for k, p in enumerate(model.problems):
            if local_injectivity_margin(model.config(z0, k), p.section) < 0:
                raise InfeasibleStartError("local_injectivity", f"rod {k} curvature exceeds its section")
    model.candidates = [None] * len(model.terms)
    try:
        st, reason = model.make_state(z, None)
    except (SolverError, TopologyError) as exc:
        raise InfeasibleStartError("film", str(exc)) from exc
    if st is None:
        raise InfeasibleStartError(reason, f"initial configuration fails the {reason} check")
    model.update_candidates(st)
    model.refresh_merit(st)
    if not np.isfinite(st.merit):
        raise InfeasibleStartError("global_radius", "initial configuration sits on a barrier")
    return st


_MEMORY = 8


def _lbfgs_direction(q, pairs, Minv):
    """Two-loop recursion with initial inverse metric ``Minv``."""
    v = q.copy()
    alphas = []
    for sk, yk in reversed(pairs):
        rho = 1.0 / (yk @ sk)
        a = rho * (sk @ v)
        alphas.append((a, rho, sk, yk))
        v -= a * yk
    if pairs:
        sk, yk = pairs[-1]
        gamma = (sk @ yk) / (yk @ (Minv * yk))
    else:
        gamma = 1.0
    r = gamma * Minv * v
    for a, rho, sk, yk in reversed(alphas):
        b = rho * (yk @ r)
        r += (a - b) * sk
    return -r


def descend(model: Model, params: SolverParams, max_iters: Optional[int] = None):
    """Run the feasible descent; returns ``(state, trace)``.

    ``trace.status`` is ``'converged'``, ``'max_iters'`` or ``'stalled'``.
    """
    max_iters = params.max_iters if max_iters is None else max_iters
    st = _initial_state(model)
    trace = OptTrace()
    cn, cn_ok = model.cn_check(st)
    st.energy.cn = cn
    trace.append(TraceRow(0, st.energy, 0.0, True, {"cn_ok": cn_ok, **st.info}))
    Minv = 1.0 / model.metric
    alpha_prev = 1.0
    history = [st.merit]
    tol = params.gradient_tolerance
    n_acc = 0
    status = "max_iters"
    check_every = model.problems[0].check_every
    pairs: list = []
    prev_q = prev_z = None
    for it in range(1, max_iters + 1):
        g, J = model.derivatives(st)
        K = _restoration_operator(J, Minv)
        q = g - J.T @ (K.T @ g)  # gradient restricted to the constraint tangent space
        steepest = -Minv * q
        pred_sd = float(-g @ steepest)
        scale = max(1.0, abs(st.merit))
        if pred_sd <= tol * scale:
            status = "converged"
            break
        if prev_q is not None:
            sk, yk = st.z - prev_z, q - prev_q
            if sk @ yk > 1e-12 * np.linalg.norm(sk) * np.linalg.norm(yk):
                pairs.append((sk, yk))
                pairs = pairs[-_MEMORY:]
        d = _lbfgs_direction(q, pairs, Minv)
        d = d - K @ (J @ d)
        if not float(-g @ d) > 0:
            d, pairs = steepest, []
        zmax = max(float(np.max(np.abs(st.z[: model.n_rod_vars]))), 2 * np.pi / min(t.L for t in model.terms))
        cap = 0.25 * zmax / max(float(np.max(np.abs(d))), 1e-300)
        alpha = min(1.0, 2.0 * alpha_prev if not pairs else 1.0, cap)
        accepted = None
        for _ in range(min(params.max_backtracks, 12)):
            zt, ok = model.restore(st.z + alpha * d, J)
            trial, reason = (None, "restore") if not ok else model.make_state(zt, st)
            if trial is not None and trial.merit < st.merit and trial.energy.total <= st.energy.total:
                accepted = trial
                trace.append(TraceRow(it, trial.energy, alpha, True, dict(trial.info)))
                break
            bad = trial.energy if trial is not None else EnergyBreakdown(e_ni_flag=reason != "local_injectivity").finalize()
            if trial is None:
                bad.total = math.inf
            trace.append(TraceRow(it, bad, alpha, False, {"reason": reason or "no_decrease"}))
            alpha *= params.shrink
        if accepted is None and pairs:
            # curvature memory may be stale: retry once along the steepest direction
            pairs = []
            prev_q = None
            continue
        if accepted is None:
            status = "converged" if pred_sd <= 1e3 * tol * scale else "stalled"
            break
        prev_q, prev_z = q, st.z
        alpha_prev = alpha
        st = accepted
        n_acc += 1
        model.update_candidates(st)
        model.refresh_merit(st)
        if n_acc % check_every == 0:
            cn, cn_ok = model.cn_check(st)
            st.energy.cn = cn
            trace.rows[-1].checks["cn_ok"] = cn_ok
        history.append(st.merit)
        w = params.stagnation_window
        if len(history) > w and history[-w - 1] - history[-1] <= params.area_tolerance * scale:
            status = "converged"
            break
    cn, cn_ok = model.cn_check(st)
    st.energy.cn = cn
    st.info["cn_ok"] = cn_ok
    trace.status = status
    return st, trace
