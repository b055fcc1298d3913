import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

import oracles as o
from kplateau.film import SolverParams
from kplateau.kp import (
    InfeasibleStartError,
    KPProblem,
    MultiRodProblem,
    Repulsion,
    circle_rod,
    elastica_plateau,
    minimize_kp,
    minimize_linked,
    quasistatic_run,
    repulsive_energy,
    total_energy,
)
from kplateau.rod import (
    ClampFrame,
    CrossSection,
    DensityField,
    MaterialLaw,
    RodConfig,
    reconstruct_frame,
)
from kplateau.topology import Polyline, SpanningClassSpec

BENDING = MaterialLaw(density=lambda s3, s: 0.5 * (s3[..., 0] ** 2 + s3[..., 1] ** 2))


def perturbed(L=1.0, n=32, a1=0.8, a2=0.6, clamp=None):
    s = np.linspace(0, L, n)
    k1 = 2 * np.pi / L + a1 * np.cos(4 * np.pi * s / L)
    k2 = a2 * np.sin(6 * np.pi * s / L)
    return RodConfig(DensityField(L, k1, k2, 0 * s), clamp or ClampFrame())


# ---------------------------------------------------------------------------
# total energy
# ---------------------------------------------------------------------------


def test_total_energy_circle():
    L = 1.0
    p = KPProblem(circle_rod(L, 64), CrossSection.disc(0.02), MaterialLaw())
    e = total_energy(p, p.rod)
    assert e.total == pytest.approx(2 * np.pi ** 2 / L, rel=1e-12)
    assert e.closure_pos < 1e-6 and e.closure_tan < 1e-6 and e.angle < 1e-6
    assert e.link == 0 and e.hard_ok


def test_total_energy_outside_n():
    p = KPProblem(circle_rod(1.0, 32), CrossSection.disc(0.02))
    w = RodConfig(DensityField.constant(1.0, 32, 60.0))
    assert local_margin(w, p.section) < 0
    assert total_energy(p, w, check_cn=False).total == math.inf


def local_margin(w, cs):
    from kplateau.rod import local_injectivity_margin

    return local_injectivity_margin(w, cs)


def test_total_energy_with_film():
    L, sigma = 1.0, 1.0
    p = KPProblem(circle_rod(L, 32), CrossSection.disc(0.02), MaterialLaw(), sigma=sigma)
    e = total_energy(p, p.rod, check_cn=False)
    R = L / (2 * np.pi)
    assert e.e_film == pytest.approx(2 * sigma * np.pi * R ** 2, rel=5e-3)
    assert e.total == pytest.approx(2 * np.pi ** 2 / L + 2 * sigma * np.pi * R ** 2, rel=1e-4)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10_000))
def test_gradient_consistency(seed):
    rng = np.random.default_rng(seed)
    # curvature with half-period symmetry closes exactly
    w = perturbed(n=17, a1=0.5, a2=0.0)
    p = KPProblem(w, CrossSection.disc(0.01), MaterialLaw((1.0, 2.0, 0.5), gravity=[0, 0, -3.0]))
    v = rng.normal(size=(3, 17))
    y = w.densities.stacked()

    def E(h):
        return total_energy(p, w.with_densities(y + h * v), check_cn=False).total

    d4 = (E(1e-4) - E(-1e-4)) / 2e-4
    d5 = (E(1e-5) - E(-1e-5)) / 2e-5
    assert d4 == pytest.approx(d5, rel=5e-2)


# ---------------------------------------------------------------------------
# single rod
# ---------------------------------------------------------------------------


def _hard_ok(row, target_z=0):
    c = row.checks
    return c["link"] == target_z and c["margin"] >= 0 and c["knot_ok"] and c["delta_margin"] >= 0


@pytest.fixture(scope="module")
def bending_run():
    p = KPProblem(perturbed(n=64), CrossSection.disc(0.02), BENDING)
    return p, minimize_kp(p)


def test_bending_circle(bending_run):
    p, res = bending_run
    L = p.length
    assert res.energy.total == pytest.approx(2 * np.pi ** 2 / L, rel=2e-2)
    assert res.trace.status == "converged"
    assert res.trace.is_monotone()
    assert all(_hard_ok(r) for r in res.trace.accepted)
    e = res.energy
    assert e.closure_pos < 1e-4 * L and e.closure_tan < 1e-4 and e.angle < 1e-3
    assert e.delta_margin >= 0 and res.checks["cn_ok"]


def test_gravity_lowers_energy(bending_run):
    _, free = bending_run
    p = KPProblem(perturbed(n=32), CrossSection.disc(0.02), MaterialLaw((1, 1, 1), gravity=[0, 0, -200.0]))
    res = minimize_kp(p, SolverParams(max_iters=150))
    assert res.trace.is_monotone()
    assert res.energy.total < free.energy.total
    assert res.curve.x.mean(axis=0)[2] < 0


def test_film_switch_on(bending_run):
    p0, r0 = bending_run
    sigma = 1e-3
    p = p0.replace(rod=r0.rod, sigma=sigma)
    res = minimize_kp(p)
    R = p.length / (2 * np.pi)
    assert abs(res.energy.total - (r0.energy.total + 2 * sigma * np.pi * R ** 2)) <= 5e-2 * sigma
    assert res.checks["spanning_ok"]


def test_infeasible_start():
    p = KPProblem(circle_rod(1.0, 32), CrossSection.disc(0.01), delta0=0.2)
    with pytest.raises(InfeasibleStartError) as exc:
        minimize_kp(p)
    assert exc.value.constraint == "global_radius"


def test_frame_indifference():
    Q = Rotation.from_euler("zxy", [0.7, -0.4, 1.9]).as_matrix()
    g = np.array([0.0, 0.0, -30.0])
    c1 = ClampFrame([0.2, -0.1, 0.3])
    c2 = c1.moved(rotation=Q)
    params = SolverParams(max_iters=12)
    runs = []
    for clamp, grav in ((c1, g), (c2, Q @ g)):
        p = KPProblem(perturbed(n=16, a1=0.5, a2=0.3, clamp=clamp), CrossSection.disc(0.01), MaterialLaw(gravity=grav))
        runs.append(minimize_kp(p, params).trace.totals())
    assert len(runs[0]) == len(runs[1])
    assert np.allclose(runs[0], runs[1], rtol=1e-8, atol=0)


# ---------------------------------------------------------------------------
# linked rods
# ---------------------------------------------------------------------------


def test_linked_distant():
    L = 1.0
    r1 = perturbed(n=32, a1=0.5, a2=0.0)
    r2 = perturbed(n=32, a1=0.5, a2=0.0, clamp=ClampFrame([5.0, 0, 0]))
    cs = CrossSection.disc(0.02)
    mp = MultiRodProblem((KPProblem(r1, cs, BENDING), KPProblem(r2, cs, BENDING)), target_eta=0)
    res = minimize_linked(mp)
    assert res.energy.total == pytest.approx(2 * 2 * np.pi ** 2 / L, rel=2e-2)
    assert res.trace.is_monotone()


def hopf_problem(pull):
    R = 1.0 / (2 * np.pi)
    cs = CrossSection.disc(0.01)
    c2 = ClampFrame([0, 0, -R], [0, 1, 0], [0, 0, 1])
    p1 = KPProblem(circle_rod(1.0, 32), cs, BENDING)
    p2 = KPProblem(circle_rod(1.0, 32, c2), cs, BENDING)
    return MultiRodProblem((p1, p2), target_eta=1, pull=pull)


def test_linked_hopf_pull():
    res = minimize_linked(hopf_problem(pull=5.0))
    acc = res.trace.accepted
    assert all(r.checks["eta"] == 1 for r in acc)
    assert all(r.checks["min_distance"] >= 0.02 - 1e-12 for r in acc)
    assert res.trace.is_monotone()


def test_repulsive_energy_examples():
    L = 2 * np.pi
    w1 = RodConfig(DensityField.constant(L, 2, 1.0))
    w2 = RodConfig(DensityField.constant(L, 2, 1.0), ClampFrame([0, 0, 5.0]))
    c1 = reconstruct_frame(w1, n_steps=64)
    c2 = reconstruct_frame(w2, n_steps=64)
    E = repulsive_energy(c1, c2, 0.1, 1.0)
    assert E == repulsive_energy(c2, c1, 0.1, 1.0)
    assert E == pytest.approx(o.circle_pair_repulsion(1.0, 5.0, 0.1, 1.0, 4096), rel=1e-3)
    near = reconstruct_frame(RodConfig(w1.densities, ClampFrame([0, 0, 0.05])), n_steps=64)
    assert repulsive_energy(c1, near, 0.1, 1.0) == math.inf
    with pytest.raises(ValueError):
        repulsive_energy(c1, c2, 0.0, 1.0)


def test_linked_with_repulsion():
    mp = hopf_problem(pull=1.0)
    mp = MultiRodProblem(mp.rods, target_eta=1, pull=1.0, repulsion=Repulsion(0.005, 1.0))
    res = minimize_linked(mp, SolverParams(max_iters=20))
    assert all(r.checks["eta"] == 1 for r in res.trace.accepted)
    assert all(math.isfinite(r.energy.total) for r in res.trace.accepted)
    assert res.trace.is_monotone()


# ---------------------------------------------------------------------------
# dimensional reduction (scaling identities; the study itself is an acceptance check)
# ---------------------------------------------------------------------------


def test_eps_gravity_identity():
    w = perturbed(n=32, a1=0.4, a2=0.2)
    cs = CrossSection.disc(0.2)
    g = np.array([0.1, 0.0, -0.5])
    base = total_energy(KPProblem(w, cs, MaterialLaw(rho=2.0, gravity=g)), w, check_cn=False).e_g
    for eps in (0.2, 0.1, 0.05):
        m = MaterialLaw(rho=2.0, gravity=g / eps ** 2)
        e = total_energy(KPProblem(w, cs.scaled(eps), m), w, check_cn=False).e_g
        assert e == pytest.approx(base, rel=1e-12)


def test_eps_elastic_independent():
    w = perturbed(n=32, a1=0.4, a2=0.2)
    vals = [total_energy(KPProblem(w, CrossSection.disc(0.2).scaled(e)), w, check_cn=False).total for e in (0.2, 0.1, 0.05)]
    assert vals[0] == vals[1] == vals[2]


# ---------------------------------------------------------------------------
# elastica
# ---------------------------------------------------------------------------


def test_elastica_bending():
    L = 1.0
    curve, mesh, trace = elastica_plateau(perturbed(n=64), lambda k, t: k ** 2)
    assert trace.totals()[-1] == pytest.approx(4 * np.pi ** 2 / L, rel=2e-2)
    assert trace.is_monotone()
    assert mesh is None


def test_elastica_torsion_planar():
    w = perturbed(n=32, a1=0.8, a2=0.0)
    curve, _, trace = elastica_plateau(w, lambda k, t: k ** 2 + t ** 2, params=SolverParams(max_iters=40))
    assert np.max(np.abs(curve.x[:, 2])) < 1e-10
    assert trace.is_monotone()


def test_elastica_with_film_monotone():
    curve, mesh, trace = elastica_plateau(
        perturbed(n=32, a1=0.5, a2=0.0), lambda k, t: k ** 2, sigma=20.0, params=SolverParams(max_iters=15)
    )
    assert trace.is_monotone()
    assert mesh is not None


# ---------------------------------------------------------------------------
# quasi-static runs
# ---------------------------------------------------------------------------


def test_quasistatic_translate():
    times = np.linspace(0, 1, 6)
    tr = quasistatic_run(lambda t: Polyline.circle(1.0, 128, center=(0.2 * t, 0, 0)), times)
    assert not tr.collapse
    assert np.allclose(tr.areas, np.pi, rtol=2e-3)


def test_quasistatic_shrink():
    times = np.linspace(0, 1, 6)
    tr = quasistatic_run(lambda t: Polyline.circle(1 - t / 2, 128), times)
    for t, a in zip(tr.times, tr.areas):
        assert a == pytest.approx(np.pi * (1 - t / 2) ** 2, rel=5e-3)


def test_quasistatic_catenoid_branch():
    times = [1.0, 1.1, 1.2]
    spec = SpanningClassSpec("multi", targets=(1, 1))
    fam = lambda h: [Polyline.circle(1.0, 128), Polyline.circle(1.0, 128, center=(0, 0, h))]  # noqa: E731
    tr = quasistatic_run(fam, times, spec=spec, n_boundary=48)
    assert not tr.collapse
    for h, a in zip(tr.times, tr.areas):
        assert a == pytest.approx(o.catenoid_area(h), rel=1e-2)


def test_quasistatic_jump_rejected():
    with pytest.raises(ValueError):
        quasistatic_run(lambda t: Polyline.circle(1.0, 64, center=(5 * t, 0, 0)), [0.0, 1.0])
