"""Frozen outputs of the reference computations in ``oracles.py``.

The values were produced once by the oracles and are pinned here so that a
change to an oracle cannot silently move the targets the solvers are tested
against.
"""
import math

import numpy as np
import pytest

import oracles as o

CATENOID_A_H1 = 0.8483379380949791
CATENOID_AREA_H1 = 5.9917969758022815
CRITICAL_RATIO = 1.3254868386983631
CIRCLES_REPULSION_REFINED = 7.754968370194428
TREFOIL_WRITHE = -3.3541262


def test_catenoid_frozen():
    a = o.catenoid_parameter(1.0)
    assert a == pytest.approx(CATENOID_A_H1, rel=1e-12)
    assert a * math.cosh(0.5 / a) == pytest.approx(1.0, rel=1e-12)
    assert o.catenoid_area(1.0) == pytest.approx(CATENOID_AREA_H1, rel=1e-12)


def test_catenoid_area_by_quadrature():
    a = o.catenoid_parameter(1.0)
    z = np.linspace(-0.5, 0.5, 20001)
    rho = a * np.cosh(z / a)
    integrand = 2 * np.pi * rho * np.sqrt(1 + np.sinh(z / a) ** 2)
    assert np.trapezoid(integrand, z) == pytest.approx(CATENOID_AREA_H1, rel=1e-7)


def test_critical_ratio_frozen():
    assert o.critical_ratio() == pytest.approx(CRITICAL_RATIO, rel=1e-12)
    assert o.catenoid_parameter(1.32) is not None
    assert o.catenoid_parameter(1.33) is None
    assert o.catenoid_parameter(1.5) is None


def test_repulsion_oracle_frozen():
    assert o.circle_pair_repulsion(1.0, 5.0, 0.1, 1.0, 4096) == pytest.approx(CIRCLES_REPULSION_REFINED, rel=1e-12)


def test_trefoil_writhe_frozen():
    for n in (2000, 4000):
        assert o.smooth_writhe(o.trefoil(n), o.trefoil_derivative(n)) == pytest.approx(TREFOIL_WRITHE, abs=1e-6)


def test_matrix_exponential_circle():
    L = 2.0
    x, R = o.constant_strain_curve(2 * np.pi / L, 0.0, 0.0, [L / 4, L])
    rad = L / (2 * np.pi)
    assert np.allclose(x[0], [rad, rad, 0.0], atol=1e-14)
    assert np.allclose(x[1], 0.0, atol=1e-14)
    assert np.allclose(R[1], np.eye(3), atol=1e-14)


def test_crossing_oracle_on_hopf():
    n = 64
    th = 2 * np.pi * np.arange(n) / n
    c1 = np.stack([np.cos(th), np.sin(th), 0 * th], axis=1)
    c2 = np.stack([1 + np.cos(th), 0 * th, np.sin(th)], axis=1)
    rng = np.random.default_rng(3)
    from scipy.stats import special_ortho_group

    lks = {o.crossing_linking_number(c1, c2, special_ortho_group.rvs(3, random_state=rng)) for _ in range(3)}
    assert len(lks) == 1 and abs(lks.pop()) == 1
