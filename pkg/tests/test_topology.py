import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

import oracles as o
from kplateau.rod import DensityField, FramedCurve, RodConfig, reconstruct_frame
from kplateau.topology import (
    Polyline,
    SpanningClassSpec,
    TopologyError,
    framing_link,
    gauss_linking,
    generate_spanning_loops,
    global_radius_of_curvature,
    knot_class_guard,
    local_radius_of_curvature,
    spanning_test,
    total_twist,
    writhe,
)


def hopf(n=512):
    c1 = Polyline.circle(1.0, n)
    th = 2 * np.pi * np.arange(n) / n
    c2 = Polyline(np.stack([1 + np.cos(th), 0 * th, np.sin(th)], axis=1))
    return c1, c2


def test_hopf_and_unlinked():
    c1, c2 = hopf(512)
    value, link = gauss_linking(c1, c2)
    assert abs(link) == 1 and abs(abs(value) - 1) < 1e-3
    far = Polyline.circle(1.0, 128, center=(10, 0, 0))
    value, link = gauss_linking(Polyline.circle(1.0, 128), far)
    assert link == 0 and abs(value) < 1e-3


def test_linking_errors():
    a = Polyline.circle(1.0, 64)
    with pytest.raises(TopologyError):
        gauss_linking(a, Polyline(np.array([a.points[0], [2.0, 1.0, 0.5], [2.0, -1.0, -0.5]])))
    with pytest.raises(TopologyError):
        gauss_linking(a, Polyline(a.points[:10], closed=False))


def _random_pair(rng, n=40):
    P = o.random_closed_curve(rng, n)
    Q = o.random_closed_curve(rng, n) + rng.normal(scale=0.5, size=3)
    return P, Q


def test_linking_vs_crossing_oracle():
    rng = np.random.default_rng(7)
    done = 0
    while done < 50:
        P, Q = _random_pair(rng)
        try:
            _, link = gauss_linking(Polyline(P), Polyline(Q))
        except TopologyError:
            continue
        rot = Rotation.random(random_state=rng.integers(1 << 30)).as_matrix()
        assert link == o.crossing_linking_number(P, Q, rot)
        done += 1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.2, 5.0), st.integers(0, 255))
def test_linking_invariances(seed, scale, shift):
    c1, c2 = hopf(256)
    v0 = gauss_linking(c1, c2)[0]
    Q = Rotation.random(random_state=seed).as_matrix()
    a = np.random.default_rng(seed).normal(size=3)
    v1 = gauss_linking(c1.transformed(Q, a, scale), c2.transformed(Q, a, scale).rolled(shift))[0]
    assert abs(v1 - v0) < 1e-9
    assert gauss_linking(c2, c1)[0] == pytest.approx(v0, abs=1e-12)
    assert gauss_linking(c1.reversed(), c2)[0] == pytest.approx(-v0, abs=1e-12)


# ---------------------------------------------------------------------------
# twist, writhe, framing link
# ---------------------------------------------------------------------------


def twisted_circle(turns, n=512, L=1.0):
    """Planar circle whose director ``d`` turns ``turns`` times about ``t`` relative to the inward normal."""
    R = L / (2 * np.pi)
    th = 2 * np.pi * np.arange(n + 1) / n
    X = R * np.stack([np.sin(th), 1 - np.cos(th), 0 * th], axis=1)
    T = np.stack([np.cos(th), np.sin(th), 0 * th], axis=1)
    N = np.stack([-np.sin(th), np.cos(th), 0 * th], axis=1)
    B = np.cross(T, N)
    phi = 2 * np.pi * turns * np.arange(n + 1) / n
    D = np.cos(phi)[:, None] * N + np.sin(phi)[:, None] * B
    Rm = np.stack([T, D, np.cross(T, D)], axis=-1)
    return FramedCurve(L * np.arange(n + 1) / n, X, Rm, L / n)


def test_framing_link_planar_circle():
    c = twisted_circle(0)
    assert framing_link(c, 0.01) == 0
    assert total_twist(c) == pytest.approx(0.0, abs=1e-12)
    c1 = twisted_circle(1)
    assert total_twist(c1) == pytest.approx(1.0, abs=1e-4)
    assert abs(writhe(Polyline(c1.x[:-1]))) < 1e-9
    assert framing_link(c1, 0.01) == 1
    # the same construction through the strain equations
    w = RodConfig(DensityField.constant(1.0, 64, 2 * np.pi, 0.0, 0.0))
    assert framing_link(reconstruct_frame(w, n_steps=512), 0.01) == 0


def test_total_twist_refined():
    L = 1.0
    s = np.linspace(0, L, 21)
    om = 3 * np.sin(2 * np.pi * s) + 1.0
    dens = DensityField(L, 0 * s, 0 * s, om)
    c = reconstruct_frame(RodConfig(dens), n_steps=400)
    sf = np.linspace(0, L, 200001)
    ref = np.trapezoid(np.interp(sf, s, om), sf) / (2 * np.pi)
    assert total_twist(c) == pytest.approx(ref, rel=1e-9)


def test_writhe_examples():
    assert abs(writhe(Polyline.circle(1.0, 200))) < 1e-6
    P = o.trefoil(400)
    w = writhe(Polyline(P))
    assert w == pytest.approx(-writhe(Polyline(P * [1, 1, -1])), abs=1e-12)
    ref = o.smooth_writhe(o.trefoil(4000), o.trefoil_derivative(4000))
    assert w == pytest.approx(ref, abs=1e-3)


def _closed_framed_curve(rng, n=300, extra_turns=0):
    """Random closed curve with a closed frame: parallel transport plus a uniform correction."""
    X = o.random_closed_curve(rng, n)
    T, D = o.parallel_transport_frame(X)
    # holonomy angle between transported and initial normal, measured about T[0]
    dL = D[-1]
    hol = np.arctan2(np.cross(D[0], dL) @ T[0], D[0] @ dL)
    ang = -(hol + 2 * np.pi * extra_turns) * np.arange(n + 1) / n
    B = np.cross(np.vstack([T, T[:1]]), D)
    Dc = np.cos(ang)[:, None] * D + np.sin(ang)[:, None] * B
    Tc = np.vstack([T, T[:1]])
    R = np.stack([Tc, Dc, np.cross(Tc, Dc)], axis=-1)
    Xc = np.vstack([X, X[:1]])
    seg = np.linalg.norm(np.diff(Xc, axis=0), axis=1)
    s = np.concatenate([[0], np.cumsum(seg)])
    return FramedCurve(s, Xc, R, float(seg.mean()))


def test_calugareanu_random():
    rng = np.random.default_rng(11)
    done = 0
    while done < 20:
        turns = int(rng.integers(-2, 3))
        c = _closed_framed_curve(rng, extra_turns=turns)
        poly = Polyline(c.x[:-1])
        try:
            link = framing_link(c, 1e-3)
            wr = writhe(poly)
        except TopologyError:
            continue
        tw = total_twist(c)
        assert abs(link - (tw + wr)) < 1e-2
        done += 1


# ---------------------------------------------------------------------------
# spanning
# ---------------------------------------------------------------------------


def flat_disc(n=48, rings=8):
    from kplateau.film import cone_mesh

    m = cone_mesh(Polyline.circle(1.0, n), n_boundary=n, n_rings=rings)
    return m


def test_spanning_examples():
    K = flat_disc()
    th = 2 * np.pi * np.arange(32) / 32
    loop = Polyline(np.stack([0.3 * np.cos(th), 0 * th, 0.3 * np.sin(th)], axis=1))
    assert spanning_test(K, loop)
    assert not spanning_test(K, loop.transformed(translation=[5, 0, 0]))


def test_spanning_vs_dense_oracle():
    n = 48
    K = flat_disc(n)
    bxy = K.vertices[K.boundary_loops[0], :2]
    rng = np.random.default_rng(5)
    th = 2 * np.pi * np.arange(16) / 16
    agree = 0
    for _ in range(200):
        c = rng.uniform(-1.5, 1.5, size=3) * [1, 1, 0.4]
        r = rng.uniform(0.1, 0.8)
        Q = Rotation.random(random_state=rng.integers(1 << 30)).as_matrix()
        pts = c + r * np.stack([np.cos(th), np.sin(th), 0 * th], axis=1) @ Q.T
        got = spanning_test(K, Polyline(pts))
        ref = o.flat_disc_crossed(pts, bxy)
        agree += got == ref
    assert agree == 200


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_spanning_rigid_invariance(seed):
    K = flat_disc()
    rng = np.random.default_rng(seed)
    th = 2 * np.pi * np.arange(16) / 16
    pts = rng.uniform(-1, 1, 3) * [1, 1, 0.2] + 0.5 * np.stack([np.cos(th), 0 * th, np.sin(th)], axis=1)
    Q = Rotation.random(random_state=seed).as_matrix()
    a = rng.normal(size=3)
    K2 = K.with_vertices(K.vertices @ Q.T + a)
    assert spanning_test(K, Polyline(pts)) == spanning_test(K2, Polyline(pts @ Q.T + a))


def test_generate_loops():
    circ = Polyline.circle(1.0, 128)
    for loop in generate_spanning_loops([circ], SpanningClassSpec(), 8, seed=1):
        assert abs(gauss_linking(loop, circ)[1]) == 1
    far = Polyline.circle(1.0, 128, center=(10, 0, 0))
    spec = SpanningClassSpec("multi", targets=(1, 0))
    for loop in generate_spanning_loops([circ, far], spec, 8, seed=2):
        assert abs(gauss_linking(loop, circ)[1]) == 1 and gauss_linking(loop, far)[1] == 0
    tre = Polyline(o.trefoil(300))
    loops = generate_spanning_loops([tre], SpanningClassSpec(avoidance_radius=0.05), 32, seed=3)
    rng = np.random.default_rng(0)
    for loop in loops:
        assert abs(gauss_linking(loop, tre)[1]) == 1
        rot = Rotation.random(random_state=rng.integers(1 << 30)).as_matrix()
        assert abs(o.crossing_linking_number(loop.points, tre.points, rot)) == 1


# ---------------------------------------------------------------------------
# thickness
# ---------------------------------------------------------------------------


def test_global_radius_examples():
    assert global_radius_of_curvature(Polyline.circle(0.7, 100)) == pytest.approx(0.7, abs=1e-6)
    a = 0.1
    errs = [abs(_two_strands(a, n) - a) for n in (100, 200, 400)]
    assert errs[2] < errs[0]
    assert errs[2] < 2e-2 * a


def _two_strands(a, n):
    """Curve winding twice around a torus; the two strands run parallel ``2 a`` apart."""
    phi = 4 * np.pi * np.arange(n) / n
    rho = 1.0 + a * np.cos(phi / 2)
    P = np.stack([rho * np.cos(phi), rho * np.sin(phi), a * np.sin(phi / 2)], axis=1)
    return global_radius_of_curvature(Polyline(P))


def test_pruned_equals_exhaustive():
    rng = np.random.default_rng(2)
    for _ in range(50):
        P = Polyline(o.random_closed_curve(rng, 60))
        ex = global_radius_of_curvature(P, method="exhaustive")
        pr = global_radius_of_curvature(P, method="pruned")
        assert pr == pytest.approx(ex, rel=1e-12)
        assert ex <= local_radius_of_curvature(P) * (1 + 1e-12)


def test_knot_guard():
    c = Polyline.circle(1.0, 100)
    assert knot_class_guard(c, c, 0.05)
    assert knot_class_guard(c, c.transformed(translation=[0.3, -0.2, 0.1]), 0.05)
    # push one strand straight through the opposite one
    P = c.points.copy()
    th = 2 * np.pi * np.arange(100) / 100
    bump = np.exp(-(((th - np.pi / 2 + np.pi) % (2 * np.pi) - np.pi) / 0.3) ** 2)
    Q = P.copy()
    Q[:, 1] -= 2.4 * bump
    Q[:, 2] += 0.0
    assert not knot_class_guard(Polyline(P), Polyline(Q), 0.05)
