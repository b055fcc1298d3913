import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import oracles as o
from kplateau.film import (
    annulus_mesh,
    cone_mesh,
    conformal_defect,
    dirichlet_energy,
    film_infimum,
    identity_param,
    map_area,
    neck_radius,
    solve_disc_plateau,
    solve_mesh_plateau,
    solve_minimal_graph,
)
from kplateau.mesh import MeshError, SurfaceMesh, area, film_energy
from kplateau.topology import Polyline, SpanningClassSpec, gauss_linking

SQUARE = SurfaceMesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])


# ---------------------------------------------------------------------------
# mesh primitives
# ---------------------------------------------------------------------------


def test_area_examples():
    assert area(SQUARE) == pytest.approx(1.0)
    errs = []
    for level in (2, 3, 4):
        V, F = o.icosphere(level)
        errs.append(abs(area(SurfaceMesh(V, F)) - 4 * np.pi))
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-2 * 4 * np.pi
    bad = SurfaceMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
    with pytest.raises(MeshError):
        bad.validate()


def test_film_energy():
    assert film_energy(SQUARE, 0.5) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    V, F = o.icosphere(2)
    m = SurfaceMesh(V + 0.05 * rng.normal(size=V.shape), F)
    assert film_energy(m, 1.3) == pytest.approx(2 * 1.3 * area(m))
    assert film_energy(m, 2.6) == pytest.approx(2 * film_energy(m, 1.3))


# ---------------------------------------------------------------------------
# Dirichlet energy and conformality
# ---------------------------------------------------------------------------


def test_dirichlet_identity_and_constant():
    vals = []
    for rings in (10, 20):
        p = identity_param(rings)
        vals.append(dirichlet_energy(p))
        assert conformal_defect(p) < 1e-10
    assert abs(vals[1] - np.pi) < abs(vals[0] - np.pi)
    assert vals[1] == pytest.approx(np.pi, rel=5e-3)
    p = identity_param(10)
    assert dirichlet_energy(p, np.ones_like(p.X)) == pytest.approx(0.0, abs=1e-20)


def test_stretch_defect_closed_form():
    p = identity_param(20)
    X = p.X.copy()
    X[:, 0] *= 2.0
    disc_area = map_area(p)  # area of the polygonal parameter disc
    assert conformal_defect(p, X) == pytest.approx((2 - 1) ** 2 * disc_area, rel=1e-12)
    assert conformal_defect(p, X) == pytest.approx(np.pi, rel=5e-3)


def test_dirichlet_dominates_area():
    rng = np.random.default_rng(4)
    p = identity_param(6)
    for _ in range(100):
        X = rng.normal(size=p.X.shape)
        assert map_area(p, X) <= dirichlet_energy(p, X) + 1e-12


# ---------------------------------------------------------------------------
# disc-type solver
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def disc_circle():
    return solve_disc_plateau(Polyline.circle(1.0, 256), n_rings=29)


def test_disc_circle(disc_circle):
    r = disc_circle
    assert len(r.param.triangles) > 4500
    assert r.area == pytest.approx(np.pi, rel=5e-3)
    assert r.conformal_defect < 1e-3 * r.dirichlet
    for D, A in r.trace:
        assert A <= D + 1e-12
    Ds = [D for D, _ in r.trace]
    assert all(b <= a + 1e-12 for a, b in zip(Ds, Ds[1:]))


def test_disc_ellipse():
    th = 2 * np.pi * np.arange(256) / 256
    ell = Polyline(np.stack([2 * np.cos(th), np.sin(th), 0 * th], axis=1))
    r = solve_disc_plateau(ell, n_rings=20)
    assert r.area == pytest.approx(2 * np.pi, rel=1e-2)


def test_disc_vs_mesh_on_lifted_curve():
    th = 2 * np.pi * np.arange(128) / 128
    curve = Polyline(np.stack([np.cos(th), np.sin(th), 0.4 * np.cos(2 * th)], axis=1))
    d = solve_disc_plateau(curve, n_rings=20)
    init = cone_mesh(curve, n_boundary=96)
    m = solve_mesh_plateau(curve, init)
    assert d.area < area(init)
    assert d.gap < 1e-3 * d.dirichlet
    assert d.area == pytest.approx(m.area, rel=1e-2)


def test_disc_equivariance(disc_circle):
    Q = Rotation.from_euler("xyz", [0.3, -0.7, 1.1]).as_matrix()
    a = np.array([1.0, -2.0, 0.5])
    r = solve_disc_plateau(Polyline.circle(1.0, 256).transformed(Q, a), n_rings=29)
    assert r.area == pytest.approx(disc_circle.area, abs=1e-9)
    r2 = solve_disc_plateau(Polyline.circle(2.0, 256), n_rings=29)
    assert r2.area == pytest.approx(4 * disc_circle.area, rel=2e-3)


# ---------------------------------------------------------------------------
# mesh solver
# ---------------------------------------------------------------------------


def test_mesh_circle():
    c = Polyline.circle(1.0, 192)
    r = solve_mesh_plateau(c, cone_mesh(c, n_boundary=96))
    assert r.area == pytest.approx(np.pi, rel=5e-3)
    A = [row[1] for row in r.trace if row[3] != "reject"]
    assert all(b <= a + 1e-15 for a, b in zip(A, A[1:]))
    lifted = c.transformed(Rotation.from_euler("zyx", [0.4, 0.2, -0.3]).as_matrix(), [3.0, 0.0, 1.0])
    r2 = solve_mesh_plateau(lifted, cone_mesh(lifted, n_boundary=96))
    assert r2.area == pytest.approx(r.area, rel=1e-6)


def _rings(h, n=128):
    return [Polyline.circle(1.0, n), Polyline.circle(1.0, n, center=(0, 0, h))]


def test_catenoid_area():
    c1, c2 = _rings(1.0)
    r = solve_mesh_plateau([c1, c2], annulus_mesh(c1, c2, 48))
    assert not r.collapse
    assert r.area == pytest.approx(o.catenoid_area(1.0), rel=1e-2)
    rho, _ = neck_radius(r.mesh)
    assert rho == pytest.approx(o.catenoid_parameter(1.0), rel=2e-2)


def test_catenoid_collapse():
    c1, c2 = _rings(1.5)
    r = solve_mesh_plateau([c1, c2], annulus_mesh(c1, c2, 48))
    assert r.collapse
    assert r.neck_ratio < 0.05


# ---------------------------------------------------------------------------
# minimal graph
# ---------------------------------------------------------------------------


def test_graph_affine_and_zero():
    sol = solve_minimal_graph((0, 1, 0, 2), lambda x, y: 2 * x - y + 3, 0.05)
    X, Y = np.meshgrid(sol.x, sol.y, indexing="ij")
    assert np.max(np.abs(sol.u - (2 * X - Y + 3))) < 1e-10
    assert sol.residual < 1e-12
    z = solve_minimal_graph((0, 1, 0, 1), lambda x, y: 0 * x, 0.1)
    assert np.all(z.u == 0)


def test_graph_scherk_order():
    errs = []
    for h in (0.1, 0.05, 0.025):
        sol = solve_minimal_graph((-1, 1, -1, 1), o.scherk, h)
        X, Y = np.meshgrid(sol.x, sol.y, indexing="ij")
        errs.append(np.max(np.abs(sol.u - o.scherk(X, Y))[1:-1, 1:-1]))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.5 <= q <= 4.5 for q in ratios), ratios


# ---------------------------------------------------------------------------
# spanning-class infimum
# ---------------------------------------------------------------------------


def test_infimum_single_circle():
    res = film_infimum(Polyline.circle(1.0, 128), n_boundary=96)
    assert res.area == pytest.approx(np.pi, rel=5e-3)
    assert res.report.passed and res.report.n_loops > 0


def test_infimum_hopf_pair():
    n = 96
    th = 2 * np.pi * np.arange(n) / n
    c1 = Polyline.circle(1.0, n)
    c2 = Polyline(np.stack([1 + np.cos(th), 0 * th, np.sin(th)], axis=1))
    assert abs(gauss_linking(c1, c2)[1]) == 1
    res = film_infimum([c1, c2], SpanningClassSpec("multi", avoidance_radius=0.05, targets=(1, 1)), n_boundary=48)
    assert res.report.passed


def test_infimum_decoupled():
    c1 = Polyline.circle(1.0, 128)
    far = Polyline.circle(1.0, 128, center=(10, 0, 0))
    res = film_infimum([c1, far], SpanningClassSpec("multi", targets=(1, 0)), n_boundary=64)
    assert res.active == [0]
    assert res.area == pytest.approx(np.pi, rel=5e-3)
    assert np.all(res.mesh.vertices[:, 0] < 2.0)
