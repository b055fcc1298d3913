"""Batched energy terms and constraint maps of a single rod.

Every function here accepts arrays with arbitrary leading batch axes so
that finite-difference probes of the whole density vector can be
evaluated in one call.
"""
from __future__ import annotations

import math

import numpy as np

from ..rod import (
    DensityField,
    RodConfig,
    _integrate,
    _line_density,
    _resample,
    _trapezoid_weights,
)
from ..topology import Polyline, _circumradii, global_radius_of_curvature
from .problem import KPProblem


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def elastica_density(f):
    """Lift ``f(kappa, tau)`` to a density of ``(k1, k2, w)`` on a grid.

    Curvature is ``hypot(k1, k2)`` and torsion ``w + phi'`` with
    ``phi = atan2(k2, k1)`` (unwrapped along the grid, one-sided at the ends).
    """

    def batch(Y, h):
        k1, k2, om = Y[..., 0, :], Y[..., 1, :], Y[..., 2, :]
        kappa = np.hypot(k1, k2)
        phi = np.unwrap(np.arctan2(k2, k1), axis=-1)
        dphi = np.gradient(phi, h, axis=-1)
        dphi = np.where(kappa > 1e-9, dphi, 0.0)
        return f(kappa, om + dphi)

    return batch


class RodTerms:
    """Precomputed quadrature data for one rod of a :class:`KPProblem`."""

    def __init__(self, p: KPProblem, curve_mode: bool = False, elastica=None):
        self.p = p
        self.curve_mode = curve_mode
        self.elastica = elastica
        dens = p.rod.densities
        self.n = dens.n_samples
        self.L = dens.length
        self.N = p.steps
        if self.N < self.n - 1:
            raise ValueError("n_steps must be at least n_samples - 1")
        self.h = dens.h
        self.s = dens.s
        self.w = _trapezoid_weights(self.n, self.h)
        self.s_fine = np.linspace(0.0, self.L, self.N + 1)
        self.w_fine = _trapezoid_weights(self.N + 1, self.L / self.N)
        self.R0 = p.rod.clamp.rotation
        self.x0 = np.asarray(p.rod.clamp.x0, dtype=float)
        self.g = p.material.gravity
        if np.any(self.g):
            mass, moment = _line_density(p.section, p.material, self.n)
            self.mass_s = _resample(mass, self.L, self.s_fine)
            self.mom_s = _resample(moment, self.L, self.s_fine)
        stride = max(1, self.N // (2 * (self.n - 1)))
        self.sub = np.arange(0, self.N, stride)
        r = p.section.extent * float(np.max(p.section.scale_at(self.n)))
        self.radius = r
        ss = self.s_fine[self.sub]
        gap = np.abs(ss[:, None] - ss[None, :])
        gap = np.minimum(gap, self.L - gap)
        I, J = np.nonzero(np.triu(gap > max(4.0 * r, 3.0 * self.L / len(ss)), 1))
        self.pairs = (I, J)
        self.link_points = 4 * (self.n - 1)
        self.link_eps = 0.5 * min(r, p.delta0)
        if p.material.density is None and not curve_mode:
            a = np.asarray(p.material.coefficients, dtype=float)
        else:
            a = np.ones(3)
        self.metric = (np.maximum(a, 1e-3 * a.max())[:, None] * self.w[None, :]).ravel()

    # -- reconstruction -----------------------------------------------------
    def reconstruct(self, Y):
        """``Y`` of shape ``(..., 3 n)`` or ``(..., 3, n)`` to ``(x, R)``."""
        Y = np.asarray(Y, dtype=float)
        Y = Y.reshape(Y.shape[:-1] + (3, self.n)) if Y.shape[-1] == 3 * self.n else Y
        return _integrate(Y, self.L, self.R0, self.x0, self.N)

    def config(self, y) -> RodConfig:
        return RodConfig(DensityField.from_array(self.L, np.asarray(y).reshape(3, self.n)), self.p.rod.clamp)

    # -- energies -----------------------------------------------------------
    def elastic(self, Y):
        Y = np.asarray(Y, dtype=float)
        Y = Y.reshape(Y.shape[:-1] + (3, self.n)) if Y.shape[-1] == 3 * self.n else Y
        if self.elastica is not None:
            vals = self.elastica(Y, self.h)
        else:
            vals = self.p.material.f(np.moveaxis(Y, -2, -1), self.s)
        return np.asarray(vals) @ self.w

    def gravity(self, x, R):
        if not np.any(self.g) or self.curve_mode:
            return np.zeros(x.shape[:-2])
        com = (
            self.mass_s[:, None] * x
            + self.mom_s[:, 0:1] * R[..., :, :, 1]
            + self.mom_s[:, 1:2] * R[..., :, :, 2]
        )
        return -(com @ self.g) @ self.w_fine

    def constraints(self, x, R):
        """Scaled closure and angle residuals, shape ``(..., 7)`` (6 in curve mode)."""
        pos = (x[..., -1, :] - x[..., 0, :]) / self.L
        tan = R[..., -1, :, 0] - R[..., 0, :, 0]
        if self.curve_mode:
            return np.concatenate([pos, tan], axis=-1)
        t0, d0 = self.R0[:, 0], self.R0[:, 1]
        dL = R[..., -1, :, 1]
        dLp = dL - (dL @ t0)[..., None] * t0
        ang = np.arctan2(np.cross(d0, dLp) @ t0, dLp @ d0)
        ang = wrap_angle(ang - self.p.target_angle)
        return np.concatenate([pos, tan, ang[..., None]], axis=-1)

    # -- barriers -----------------------------------------------------------
    def contact_distances(self, x):
        P = x[..., self.sub, :]
        I, J = self.pairs
        return np.linalg.norm(P[..., I, :] - P[..., J, :], axis=-1)

    def contact_barrier(self, x):
        """Self-repulsion of non-neighbouring midline samples closer than two radii."""
        if self.curve_mode or len(self.pairs[0]) == 0:
            return np.zeros(x.shape[:-2])
        d = self.contact_distances(x)
        r2 = 2.0 * self.radius
        return self.p.penalty_weights.cn * np.sum(np.maximum(r2 - d, 0.0) ** 2, axis=-1) / r2 ** 2

    def sub_polyline(self, x) -> Polyline:
        return Polyline(x[self.sub], True)

    def delta(self, x) -> float:
        return global_radius_of_curvature(self.sub_polyline(x))

    def delta_candidates(self, x, factor: float = 1.5):
        """Vertex triples whose circumradius is within ``factor`` of the minimum."""
        P = x[self.sub]
        n = len(P)
        best = self.delta(x)
        out = []
        for i in range(n - 2):
            j, k = np.triu_indices(n - i - 1, k=1)
            j = j + i + 1
            k = k + i + 1
            r = _circumradii(P[i][None, :], P[j], P[k])
            m = r <= factor * best
            if np.any(m):
                out.append(np.stack([np.full(int(m.sum()), i), j[m], k[m]], axis=1))
        return np.concatenate(out) if out else np.zeros((0, 3), dtype=int)

    def delta_barrier_value(self, delta):
        d0 = self.p.delta0
        act = 2.0 * d0
        delta = np.asarray(delta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.p.penalty_weights.delta * np.maximum(act - delta, 0.0) ** 2 / ((delta - d0) * act)
        return np.where(delta > d0, val, np.inf)

    def delta_barrier(self, x, cand):
        if cand is None or len(cand) == 0:
            return np.zeros(x.shape[:-2])
        P = x[..., self.sub, :]
        r = _circumradii(P[..., cand[:, 0], :], P[..., cand[:, 1], :], P[..., cand[:, 2], :])
        return self.delta_barrier_value(r.min(axis=-1))

    # -- local injectivity --------------------------------------------------
    def project_N(self, y, margin: float = 1e-9):
        """Scale ``(k1, k2)`` pointwise back into ``sup (zeta1 k2 - zeta2 k1) <= 1``."""
        if self.curve_mode:
            return y
        Y = np.array(y, dtype=float).reshape(3, self.n)
        cs = self.p.section
        u = np.stack([Y[1], -Y[0]], axis=1)
        sup = cs.scale_at(self.n) * cs.support(u)
        fac = np.where(sup > 1 - margin, (1 - margin) / np.maximum(sup, 1e-300), 1.0)
        Y[0] *= fac
        Y[1] *= fac
        return Y.ravel()

    # -- film boundary --------------------------------------------------------
    def film_points(self, x, R):
        """Points wetted by the film, shape ``(..., N, 3)`` (closed polygon)."""
        xs = x[..., :-1, :]
        if self.p.film_boundary == "midline" or self.curve_mode:
            return xs
        Rs = R[..., :-1, :, :]
        t = Rs[..., :, 0]
        c = xs.mean(axis=-2, keepdims=True)
        v = c - xs
        v = v - np.sum(v * t, axis=-1, keepdims=True) * t
        nu = v / np.linalg.norm(v, axis=-1, keepdims=True)
        zeta = np.stack([np.sum(nu * Rs[..., :, 1], axis=-1), np.sum(nu * Rs[..., :, 2], axis=-1)], axis=-1)
        sc = np.interp(self.s_fine[:-1], self.s, self.p.section.scale_at(self.n))
        rho = sc * self.p.section.support(zeta)
        return xs + rho[..., None] * nu


def repulsive_energy(c1, c2, h_epsilon: float, h_slope: float) -> float:
    """``int int 1 / h(|x1(s1) - x2(s2)|) ds1 ds2`` with ``h(r) = slope * max(r - eps, 0)``.

    Trapezoid rule on both sample grids; ``math.inf`` when any node pair is
    within ``h_epsilon``.
    """
    if not (h_epsilon > 0 and h_slope > 0):
        raise ValueError("h_epsilon and h_slope must be positive")
    w1 = _trapezoid_weights(len(c1.s), c1.arc_step)
    w2 = _trapezoid_weights(len(c2.s), c2.arc_step)
    total = 0.0
    chunk = max(1, 4_000_000 // max(1, len(c2.x)))
    for i in range(0, len(c1.x), chunk):
        d = np.linalg.norm(c1.x[i:i + chunk, None, :] - c2.x[None, :, :], axis=-1)
        if np.any(d <= h_epsilon):
            return math.inf
        total += float(w1[i:i + chunk] @ (1.0 / (h_slope * (d - h_epsilon))) @ w2)
    return total


def repulsive_batch(x1, x2, w1, w2, h_epsilon, h_slope):
    """Batched trapezoid repulsion of midline samples ``x1``, ``x2`` (leading batch axes)."""
    d = np.linalg.norm(x1[..., :, None, :] - x2[..., None, :, :], axis=-1)
    with np.errstate(divide="ignore"):
        val = np.einsum("i,...ij,j->...", w1, 1.0 / (h_slope * np.maximum(d - h_epsilon, 0.0)), w2)
    return np.where(np.all(d > h_epsilon, axis=(-1, -2)), val, np.inf)
