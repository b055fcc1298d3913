"""``kplateau run|validate <config>``: reproducible experiment harness.

Exit codes: 0 success, 1 input error, 2 constraint failure, 3 solver
collapse or solver failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, ExperimentConfig, load, validate
from .film import SolverError, SolverParams, film_infimum, solve_disc_plateau, solve_minimal_graph
from .kp import (
    InfeasibleStartError,
    KPProblem,
    MultiRodProblem,
    PenaltyWeights,
    Repulsion,
    dimensional_reduction_suite,
    elastica_plateau,
    minimize_kp,
    minimize_linked,
    quasistatic_run,
    repulsive_energy,
)
from .mesh import write_obj
from .rod import (
    ClampFrame,
    CrossSection,
    DensityField,
    MaterialLaw,
    RodConfig,
    closure_residual,
    elastic_energy,
    frame_orthogonality,
    reconstruct_frame,
    tube_mesh,
)
from .topology import Polyline, SpanningClassSpec

log = logging.getLogger("kplateau")

EXIT_OK, EXIT_INPUT, EXIT_CONSTRAINT, EXIT_COLLAPSE = 0, 1, 2, 3


class ConstraintFailure(RuntimeError):
    pass


class Collapse(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_rod(b: dict) -> RodConfig:
    L, n = b["length"], b["n_samples"]
    s = np.linspace(0.0, L, n)
    k1 = b.get("kappa1", 2 * np.pi / L)
    m = b["perturb_mode"]
    kappa1 = k1 + b["perturb_kappa1"] * np.cos(2 * np.pi * m * s / L)
    kappa2 = b["kappa2"] + b["perturb_kappa2"] * np.sin(2 * np.pi * (m + 1) * s / L)
    omega = np.full(n, float(b["omega"]))
    c = b["clamp"]
    clamp = ClampFrame(np.array(c["x0"], float), np.array(c["t0"], float), np.array(c["d0"], float))
    return RodConfig(DensityField(L, kappa1, kappa2, omega), clamp)


def _bending(strain, s):
    return 0.5 * (strain[..., 0] ** 2 + strain[..., 1] ** 2)


def build_section(b: dict) -> CrossSection:
    if "radius" in b:
        return CrossSection.disc(b["radius"])
    return CrossSection.polygon(np.asarray(b["vertices"], float).reshape(-1, 2))


def build_material(b: dict) -> MaterialLaw:
    density = _bending if b["law"] == "bending" else None
    return MaterialLaw(tuple(b["coefficients"]), density, rho=b["rho"], gravity=np.array(b["gravity"], float))


def build_params(b: dict, seed: int) -> SolverParams:
    return SolverParams(seed=seed, **b)


def build_problem(cfg: ExperimentConfig, rod_key: str = "rod") -> KPProblem:
    d = cfg.data
    pr = d["problem"]
    rod = build_rod(d[rod_key])
    return KPProblem(
        rod,
        build_section(d["section"]),
        build_material(d["material"]),
        sigma=pr["sigma"],
        target_z=pr["target_z"],
        target_angle=pr["target_angle"],
        knot_thickness=pr["knot_thickness"],
        delta0=pr["delta0"],
        penalty_weights=PenaltyWeights(**pr["penalty"]),
        restore_tol=pr["restore_tol"],
        n_steps=d[rod_key].get("n_steps"),
        film_boundary=pr["film_boundary"],
        film_points=pr["film_points"],
        check_every=pr["check_every"],
    )


def build_curve(c: dict, base: Path) -> Polyline:
    shape = c["shape"]
    if shape == "file":
        return io.read_polyline_csv(base / c["file"], closed=True)
    if shape == "circle":
        return Polyline.circle(c["radius"], c["n"], center=c["center"], normal=c["normal"])
    phi = 2 * np.pi * np.arange(c["n"]) / c["n"]
    if shape == "ellipse":
        a, b = c["radii"]
        pts = np.column_stack([a * np.cos(phi), b * np.sin(phi), np.zeros_like(phi)])
    else:  # saddle
        r = c["radius"]
        pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), c["amplitude"] * np.cos(2 * phi)])
    return Polyline(pts + np.asarray(c["center"], float), True)


def build_spanning(b: dict) -> SpanningClassSpec:
    targets = b.get("spanning_targets")
    return SpanningClassSpec(b["spanning_mode"], b["avoidance_radius"], tuple(targets) if targets else None)


# ---------------------------------------------------------------------------
# constraint report
# ---------------------------------------------------------------------------


def kp_report(energy, checks: dict, length: float) -> dict:
    rep = {
        "closure_pos": energy.closure_pos,
        "closure_tan": energy.closure_tan,
        "angle": energy.angle,
        "link": energy.link if not isinstance(energy.link, tuple) else list(energy.link),
        "local_injectivity": bool(energy.e_ni_flag),
        "delta_margin": energy.delta_margin,
        "knot_guard": bool(energy.knot_ok),
        "cn_residual": energy.cn,
        "cn_ok": bool(checks.get("cn_ok", True)),
    }
    if "spanning_ok" in checks:
        rep["spanning_ok"] = bool(checks["spanning_ok"])
    if "eta" in checks:
        rep["eta"] = checks["eta"]
    if "min_distance" in checks:
        rep["min_distance"] = checks["min_distance"]
    ok = (
        energy.closure_pos < 1e-4 * length
        and energy.closure_tan < 1e-4
        and energy.angle < 1e-3
        and energy.e_ni_flag
        and energy.link_defect == 0
        and energy.delta_margin >= 0
        and energy.knot_ok
        and rep["cn_ok"]
        and rep.get("spanning_ok", True)
    )
    rep["passed"] = bool(ok)
    return rep


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def run_reconstruct(cfg: ExperimentConfig, out: Path) -> None:
    d = cfg.data
    w = build_rod(d["rod"])
    c = reconstruct_frame(w, d["rod"].get("n_steps"))
    io.write_curve_csv(c, out / "curve.csv")
    if "radius" in d["section"] or "vertices" in d["section"]:
        write_obj(tube_mesh(c, build_section(d["section"])), out / "tube.obj")
    pos, tan = closure_residual(c)
    rep = {"closure_pos": pos, "closure_tan": tan, "orthogonality": frame_orthogonality(c)}
    io.write_summary(out / "summary.txt", elastic_energy(w, build_material(d["material"])), math.nan, rep, 0, False)


def run_plateau_disc(cfg: ExperimentConfig, out: Path) -> None:
    b = cfg.data["boundary"]
    params = build_params(cfg.data["solver"], cfg.seed)
    curve = build_curve(b["curves"][0], cfg.path.parent)
    res = solve_disc_plateau(curve, params, n_rings=b["n_rings"])
    write_obj(res.param.to_mesh(), out / "film.obj")
    rows = ["iter,objective,grad_norm,flag"]
    for i, (D, A) in enumerate(res.trace):
        rows.append(f"{i},{D:.17g},{D - A:.17g},{'init' if i == 0 else 'step'}")
    (out / "trace.csv").write_text("\n".join(rows) + "\n")
    rep = {"dirichlet": res.dirichlet, "gap": res.gap, "conformal_defect": res.conformal_defect, "warning": res.warning}
    io.write_summary(out / "summary.txt", res.area, res.area, rep, res.iterations, False)


def run_plateau_mesh(cfg: ExperimentConfig, out: Path) -> None:
    b = cfg.data["boundary"]
    params = build_params(cfg.data["solver"], cfg.seed)
    curves = [build_curve(c, cfg.path.parent) for c in b["curves"]]
    res = film_infimum(curves, build_spanning(b), params, n_boundary=b["n_boundary"])
    write_obj(res.mesh, out / "film.obj")
    res.solve.trace_csv(out / "trace.csv")
    rep = {"spanning_loops": res.report.n_loops, "spanning_hit": res.report.n_hit, "neck_ratio": res.solve.neck_ratio}
    io.write_summary(out / "summary.txt", res.area, res.area, rep, res.solve.iterations, res.collapse)
    if res.collapse:
        raise Collapse("film collapsed onto separate discs")


def run_minimal_graph(cfg: ExperimentConfig, out: Path) -> None:
    g = cfg.data["graph"]
    kind = g["data"]
    if kind == "affine":
        c0, c1, c2 = g["coefficients"]
        u0 = lambda x, y: c0 + c1 * x + c2 * y  # noqa: E731
    elif kind == "scherk":
        u0 = lambda x, y: np.log(np.cos(y) / np.cos(x))  # noqa: E731
    else:
        u0 = lambda x, y: 0.0 * x  # noqa: E731
    sol = solve_minimal_graph(tuple(g["domain"]), u0, g["grid_h"], tol=g["tol"])
    sol.to_csv(out / "graph.csv")
    rep = {"residual": sol.residual, "picard_steps": sol.picard_steps}
    io.write_summary(out / "summary.txt", sol.area(), sol.area(), rep, sol.iterations, False)


def _finish_kp(out: Path, res, length: float) -> None:
    res.trace.to_csv(out / "trace.csv")
    rep = kp_report(res.energy, res.checks, length)
    rep["status"] = res.trace.status
    e = res.energy
    io.write_summary(
        out / "summary.txt", e.total, e.film_area, rep, len(res.trace.accepted) - 1,
        bool(res.checks.get("film_collapse", False)),
    )
    if not rep["passed"]:
        raise ConstraintFailure("final configuration violates: " + ", ".join(
            k for k in ("closure_pos", "closure_tan", "angle", "cn_ok", "spanning_ok") if k in rep
        ))


def run_kp(cfg: ExperimentConfig, out: Path) -> None:
    p = build_problem(cfg)
    res = minimize_kp(p, build_params(cfg.data["solver"], cfg.seed))
    io.write_curve_csv(res.curve, out / "curve.csv")
    if res.film is not None:
        write_obj(res.film, out / "film.obj")
    _finish_kp(out, res, p.length)


def run_linked(cfg: ExperimentConfig, out: Path) -> None:
    lk = cfg.data["linked"]
    p1, p2 = build_problem(cfg, "rod"), build_problem(cfg, "rod2")
    rep = Repulsion(lk["h_epsilon"], lk["h_slope"]) if "h_epsilon" in lk else None
    mp = MultiRodProblem(
        (p1.replace(sigma=0.0), p2.replace(sigma=0.0)), lk["target_eta"], rep, p1.sigma, lk["pull"], lk["overlap_weight"],
    )
    res = minimize_linked(mp, build_params(cfg.data["solver"], cfg.seed))
    io.write_curve_csv(res.curves[0], out / "curve1.csv")
    io.write_curve_csv(res.curves[1], out / "curve2.csv")
    if res.film is not None:
        write_obj(res.film, out / "film.obj")
    _finish_kp(out, res, p1.length)


def run_repulsive(cfg: ExperimentConfig, out: Path) -> None:
    r = cfg.data["repulsive"]
    w1, w2 = build_rod(cfg.data["rod"]), build_rod(cfg.data["rod2"])
    n1, n2 = cfg.data["rod"].get("n_steps"), cfg.data["rod2"].get("n_steps")
    c1, c2 = reconstruct_frame(w1, n1), reconstruct_frame(w2, n2)
    val = repulsive_energy(c1, c2, r["h_epsilon"], r["h_slope"])
    f1 = reconstruct_frame(w1, (len(c1.s) - 1) * r["refine"])
    f2 = reconstruct_frame(w2, (len(c2.s) - 1) * r["refine"])
    ref = repulsive_energy(f1, f2, r["h_epsilon"], r["h_slope"])
    rel = abs(val - ref) / abs(ref) if math.isfinite(ref) and ref != 0 else math.nan
    (out / "repulsive.csv").write_text(f"quadrature,refined,rel_diff\n{val:.17g},{ref:.17g},{rel:.17g}\n")
    io.write_summary(out / "summary.txt", val, math.nan, {"refined": ref, "rel_diff": rel}, 0, False)


def run_dimred(cfg: ExperimentConfig, out: Path) -> None:
    p = build_problem(cfg)
    rows = dimensional_reduction_suite(p, cfg.data["dimred"]["eps"], build_params(cfg.data["solver"], cfg.seed))
    lines = ["eps,total,gap,status"]
    for r in rows:
        lines.append(f"{'limit' if r.eps is None else format(r.eps, '.17g')},{r.total:.17g},{r.gap:.17g},{r.status}")
    (out / "dimred.csv").write_text("\n".join(lines) + "\n")
    gaps = [r.gap for r in rows[:-1]]
    limit = rows[-1]
    rel = gaps[-1] / abs(limit.total) if limit.feasible else math.nan
    rep = {
        "gaps": gaps,
        "gaps_decreasing": bool(all(b < a for a, b in zip(gaps, gaps[1:]))),
        "final_relative_gap": rel,
        "feasible": [r.feasible for r in rows],
    }
    io.write_summary(out / "summary.txt", limit.total, limit.energy.film_area if limit.energy else math.nan, rep, len(rows), False)
    if not all(r.feasible for r in rows):
        raise ConstraintFailure("an eps run started infeasible")


def run_elastica(cfg: ExperimentConfig, out: Path) -> None:
    e = cfg.data["elastica"]
    f = (lambda k, t: k ** 2) if e["law"] == "bending" else (lambda k, t: k ** 2 + t ** 2)
    w = build_rod(cfg.data["rod"])
    curve, mesh, trace = elastica_plateau(
        w, f, e["sigma"], build_params(cfg.data["solver"], cfg.seed), n_steps=cfg.data["rod"].get("n_steps"),
    )
    trace.to_csv(out / "trace.csv")
    io.write_curve_csv(curve, out / "curve.csv")
    if mesh is not None:
        write_obj(mesh, out / "film.obj")
    last = trace.accepted[-1].energy
    pos, tan = closure_residual(curve)
    rep = {"closure_pos": pos, "closure_tan": tan, "status": trace.status}
    io.write_summary(out / "summary.txt", last.total, last.film_area, rep, len(trace.accepted) - 1, False)


def run_quasistatic(cfg: ExperimentConfig, out: Path) -> None:
    b, q = cfg.data["boundary"], cfg.data["quasistatic"]
    base = [build_curve(c, cfg.path.parent) for c in b["curves"]]
    motion = q["motion"]

    def family(t):
        if motion == "translate":
            return [c.transformed(translation=t * np.asarray(q["velocity"], float)) for c in base]
        if motion == "scale":
            out_c = []
            for c in base:
                ctr = c.points.mean(axis=0)
                out_c.append(Polyline(ctr + (1 + q["rate"] * t) * (c.points - ctr), True))
            return out_c
        return [base[0], base[1].transformed(translation=t * np.asarray(q["axis"], float))]

    params = build_params(cfg.data["solver"], cfg.seed)
    tr = quasistatic_run(family, q["times"], params, build_spanning(b), n_boundary=b["n_boundary"])
    tr.to_csv(out / "areas.csv")
    if tr.meshes:
        write_obj(tr.meshes[-1], out / "film.obj")
    rep = {"steps": len(tr.times), "collapse_time": tr.collapse_time if tr.collapse else None}
    io.write_summary(
        out / "summary.txt", tr.areas[-1] if tr.areas else math.nan, tr.areas[-1] if tr.areas else math.nan,
        rep, len(tr.times), tr.collapse,
    )
    if tr.collapse:
        raise Collapse(f"film collapsed at t = {tr.collapse_time:g}")


RUNNERS = {
    "reconstruct": run_reconstruct,
    "plateau-disc": run_plateau_disc,
    "plateau-mesh": run_plateau_mesh,
    "minimal-graph": run_minimal_graph,
    "kp": run_kp,
    "linked": run_linked,
    "repulsive": run_repulsive,
    "dimred": run_dimred,
    "elastica": run_elastica,
    "quasistatic": run_quasistatic,
}


def _limit_threads(n: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return None
    return threadpool_limits(n)


def run(path, output_dir=None, seed=None, threads=None) -> int:
    """Run one experiment; returns the process exit code."""
    try:
        cfg = load(path, seed=seed, output_dir=output_dir, threads=threads)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"kplateau: config error: {p}", file=sys.stderr)
        return EXIT_INPUT
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    _limit_threads(cfg.threads)
    log.info("running %s -> %s", cfg.kind, out)
    try:
        RUNNERS[cfg.kind](cfg, out)
    except InfeasibleStartError as exc:
        print(f"kplateau: constraint violated at start: {exc.constraint}: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except ConstraintFailure as exc:
        print(f"kplateau: constraint failure: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except Collapse as exc:
        print(f"kplateau: solver collapse: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    except SolverError as exc:
        print(f"kplateau: solver failure: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    except (ValueError, OSError) as exc:
        print(f"kplateau: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="kplateau", description="Kirchhoff-Plateau experiment harness")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--output-dir")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--verbose", "-v", action="count", default=0)
    v = sub.add_parser("validate", help="check a config against the schema")
    v.add_argument("config")
    v.add_argument("--verbose", "-v", action="count", default=0)
    args = ap.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "validate":
        problems = validate(args.config)
        for p in problems:
            print(p)
        if not problems and args.verbose:
            print("ok", file=sys.stderr)
        return EXIT_OK if not problems else EXIT_INPUT
    return run(args.config, args.output_dir, args.seed, args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
