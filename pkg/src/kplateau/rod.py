"""Kirchhoff rods: reconstruction from strain densities, tube geometry, rod energies.

Frame convention
----------------
The director frame is stored as a rotation ``R = [t | d | t x d]`` (columns).
The strain equations ``t' = k1 d + k2 (t x d)`` and ``d' = w (t x d) - k1 t``
are equivalent to ``R' = R K`` with

    K = [[0, -k1, -k2],
         [k1,  0,  -w],
         [k2,  w,   0]],

i.e. a body angular velocity ``(w, -k2, k1)``.  See ``docs/frames.md``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import mesh as _mesh
from .mesh import SurfaceMesh
from .rotations import cumulative_matmul, expmap, frame_from, logmap, orthogonality_error


class RodError(ValueError):
    """Invalid rod data or an operation outside its domain."""


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityField:
    """Strain densities sampled on the uniform grid ``s_i = i L / (n - 1)``.

    Values between grid points are linear interpolants.
    """

    length: float
    kappa1: np.ndarray
    kappa2: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        k1 = np.array(self.kappa1, dtype=float)
        k2 = np.array(self.kappa2, dtype=float)
        om = np.array(self.omega, dtype=float)
        if not (k1.ndim == k2.ndim == om.ndim == 1 and k1.shape == k2.shape == om.shape):
            raise RodError("kappa1, kappa2, omega must be 1-D arrays of equal length")
        if k1.size < 2:
            raise RodError("need at least two density samples")
        if not self.length > 0:
            raise RodError("rod length must be positive")
        if not (np.all(np.isfinite(k1)) and np.all(np.isfinite(k2)) and np.all(np.isfinite(om))):
            raise RodError("densities must be finite")
        for name, arr in (("kappa1", k1), ("kappa2", k2), ("omega", om)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "length", float(self.length))

    @property
    def n_samples(self) -> int:
        return self.kappa1.size

    @property
    def s(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_samples)

    @property
    def h(self) -> float:
        return self.length / (self.n_samples - 1)

    def stacked(self) -> np.ndarray:
        """Array of shape ``(3, n)``: rows kappa1, kappa2, omega."""
        return np.stack([self.kappa1, self.kappa2, self.omega])

    @classmethod
    def constant(cls, length, n_samples, kappa1=0.0, kappa2=0.0, omega=0.0):
        ones = np.ones(n_samples)
        return cls(length, kappa1 * ones, kappa2 * ones, omega * ones)

    @classmethod
    def from_array(cls, length, arr):
        arr = np.asarray(arr, dtype=float).reshape(3, -1)
        return cls(length, arr[0], arr[1], arr[2])

    def scaled(self, lam: float) -> "DensityField":
        return DensityField(self.length, lam * self.kappa1, lam * self.kappa2, lam * self.omega)


@dataclass(frozen=True)
class ClampFrame:
    """Clamped end: position ``x0`` and orthonormal directors ``t0``, ``d0``."""

    x0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t0: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    d0: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(3)
        t0 = np.array(self.t0, dtype=float).reshape(3)
        d0 = np.array(self.d0, dtype=float).reshape(3)
        if abs(np.linalg.norm(t0) - 1) > 1e-12 or abs(np.linalg.norm(d0) - 1) > 1e-12:
            raise RodError("clamp directors must be unit vectors")
        if abs(t0 @ d0) > 1e-12:
            raise RodError("clamp directors must be orthogonal")
        for name, arr in (("x0", x0), ("t0", t0), ("d0", d0)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def rotation(self) -> np.ndarray:
        return frame_from(self.t0, self.d0)

    def moved(self, rotation=None, translation=None) -> "ClampFrame":
        """Apply ``p -> Q p + a`` to the clamp."""
        Q = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        a = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)
        t0 = Q @ self.t0
        d0 = Q @ self.d0
        # re-normalise so that round-off never trips the 1e-12 invariant
        t0 /= np.linalg.norm(t0)
        d0 -= (d0 @ t0) * t0
        d0 /= np.linalg.norm(d0)
        return ClampFrame(Q @ self.x0 + a, t0, d0)

    @classmethod
    def from_rotation(cls, x0, R):
        R = np.asarray(R, dtype=float)
        u, _, vt = np.linalg.svd(R)
        R = u @ vt
        return cls(x0, R[:, 0], R[:, 1])


@dataclass(frozen=True)
class RodConfig:
    densities: DensityField
    clamp: ClampFrame = field(default_factory=ClampFrame)

    @property
    def length(self) -> float:
        return self.densities.length

    def with_densities(self, densities) -> "RodConfig":
        if not isinstance(densities, DensityField):
            densities = DensityField.from_array(self.length, densities)
        return RodConfig(densities, self.clamp)


@dataclass(frozen=True)
class FramedCurve:
    """Midline samples with their director frames.

    ``R[i]`` has columns ``(t, d, t x d)`` at arc length ``s[i]``.
    """

    s: np.ndarray
    x: np.ndarray
    R: np.ndarray
    arc_step: float

    @property
    def length(self) -> float:
        return float(self.s[-1] - self.s[0])

    @property
    def t(self) -> np.ndarray:
        return self.R[:, :, 0]

    @property
    def d(self) -> np.ndarray:
        return self.R[:, :, 1]

    @property
    def b(self) -> np.ndarray:
        return self.R[:, :, 2]

    def __len__(self):
        return len(self.s)

    def subsample(self, n: int) -> "FramedCurve":
        """Keep ``n`` evenly spaced samples (endpoints included)."""
        idx = np.unique(np.round(np.linspace(0, len(self.s) - 1, n)).astype(int))
        step = self.length / (len(idx) - 1)
        return FramedCurve(self.s[idx], self.x[idx], self.R[idx], step)

    def body_rates(self) -> np.ndarray:
        """Per-step body rotation vectors ``log(R_i^T R_{i+1}) / ds``.

        For curves produced by :func:`reconstruct_frame` these are exactly the
        midpoint strains ``(omega, -kappa2, kappa1)``.
        """
        rel = np.swapaxes(self.R[:-1], 1, 2) @ self.R[1:]
        return logmap(rel) / np.diff(self.s)[:, None]


@dataclass(frozen=True)
class CrossSection:
    """Planar cross-section ``A(s)`` in the ``(zeta1, zeta2)`` plane.

    Either a disc of ``radius`` or a convex polygon given by ``vertices``
    (counter-clockwise).  ``scale`` optionally holds one factor per density
    sample so that ``A(s_i) = scale_i * A``.
    """

    radius: Optional[float] = None
    vertices: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.radius is None) == (self.vertices is None):
            raise RodError("give exactly one of radius or vertices")
        if self.radius is not None and not self.radius > 0:
            raise RodError("disc radius must be positive")
        if self.vertices is not None:
            P = np.array(self.vertices, dtype=float).reshape(-1, 2)
            if len(P) < 3:
                raise RodError("polygon needs at least three vertices")
            e = np.roll(P, -1, axis=0) - P
            cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
            if np.all(cross <= 0):
                P = P[::-1]
                e = np.roll(P, -1, axis=0) - P
                cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
            if np.any(cross <= 0):
                raise RodError("polygon must be strictly convex")
            # origin strictly inside: every edge function positive at 0
            if np.any(e[:, 0] * (-P[:, 1]) - e[:, 1] * (-P[:, 0]) <= 0):
                raise RodError("cross-section must contain the origin in its interior")
            P.setflags(write=False)
            object.__setattr__(self, "vertices", P)
        if self.scale is not None:
            sc = np.array(self.scale, dtype=float)
            if np.any(sc <= 0):
                raise RodError("section scale factors must be positive")
            sc.setflags(write=False)
            object.__setattr__(self, "scale", sc)

    @classmethod
    def disc(cls, radius: float) -> "CrossSection":
        return cls(radius=radius)

    @classmethod
    def polygon(cls, vertices) -> "CrossSection":
        return cls(vertices=vertices)

    @property
    def is_disc(self) -> bool:
        return self.radius is not None

    def scaled(self, eps: float) -> "CrossSection":
        """The section ``eps * A``."""
        if self.is_disc:
            return CrossSection(radius=eps * self.radius, scale=self.scale)
        return CrossSection(vertices=eps * self.vertices, scale=self.scale)

    def scale_at(self, n: int) -> np.ndarray:
        if self.scale is None:
            return np.ones(n)
        if self.scale.size != n:
            raise RodError("section scale must have one factor per density sample")
        return np.asarray(self.scale)

    @property
    def area(self) -> float:
        """Area of the unscaled section."""
        if self.is_disc:
            return float(np.pi * self.radius ** 2)
        P = self.vertices
        return float(0.5 * np.sum(P[:, 0] * np.roll(P[:, 1], -1) - P[:, 1] * np.roll(P[:, 0], -1)))

    @property
    def centroid(self) -> np.ndarray:
        if self.is_disc:
            return np.zeros(2)
        P = self.vertices
        Q = np.roll(P, -1, axis=0)
        c = P[:, 0] * Q[:, 1] - Q[:, 0] * P[:, 1]
        return np.array([np.sum((P[:, 0] + Q[:, 0]) * c), np.sum((P[:, 1] + Q[:, 1]) * c)]) / (6 * self.area)

    @property
    def extent(self) -> float:
        """Largest distance from the origin to a point of the unscaled section."""
        if self.is_disc:
            return float(self.radius)
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def support(self, direction) -> np.ndarray:
        """``max_{zeta in A} zeta . u`` for each direction ``u`` (shape ``(..., 2)``)."""
        u = np.asarray(direction, dtype=float)
        if self.is_disc:
            return self.radius * np.linalg.norm(u, axis=-1)
        return np.max(u @ self.vertices.T, axis=-1)

    def boundary_points(self, n: int) -> np.ndarray:
        """``n`` points on the boundary of the unscaled section, counter-clockwise."""
        if self.is_disc:
            phi = 2 * np.pi * np.arange(n) / n
            return self.radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)
        P = self.vertices
        Q = np.roll(P, -1, axis=0)
        lens = np.linalg.norm(Q - P, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        u = cum[-1] * np.arange(n) / n
        k = np.searchsorted(cum, u, side="right") - 1
        f = (u - cum[k]) / lens[k]
        return P[k] + f[:, None] * (Q[k] - P[k])


def quadratic_density(a1=1.0, a2=1.0, a3=1.0):
    """The law ``f = (a1 k1^2 + a2 k2^2 + a3 w^2) / 2``."""

    def f(strain, s):
        strain = np.asarray(strain)
        return 0.5 * (a1 * strain[..., 0] ** 2 + a2 * strain[..., 1] ** 2 + a3 * strain[..., 2] ** 2)

    return f


@dataclass(frozen=True)
class MaterialLaw:
    """Stored-energy density, growth exponent, mass density and gravity.

    ``coefficients`` are the stiffnesses of the default quadratic law; a
    pluggable ``density`` callable ``f(strain[..., 3], s) -> energy`` overrides
    it.  ``rho`` is a scalar or one value per density sample.
    """

    coefficients: tuple = (1.0, 1.0, 1.0)
    density: Optional[Callable] = None
    growth_p: float = 2.0
    rho: float | np.ndarray = 1.0
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.density is None and any(c <= 0 for c in self.coefficients):
            raise RodError("quadratic law needs positive stiffnesses")
        if not self.growth_p > 1:
            raise RodError("growth exponent must exceed 1")
        rho = np.asarray(self.rho, dtype=float)
        if np.any(rho < 0):
            raise RodError("mass density must be nonnegative")
        object.__setattr__(self, "gravity", np.array(self.gravity, dtype=float).reshape(3))

    @property
    def f(self) -> Callable:
        if self.density is not None:
            return self.density
        return quadratic_density(*self.coefficients)

    def rho_at(self, n: int) -> np.ndarray:
        rho = np.asarray(self.rho, dtype=float)
        if rho.ndim == 0:
            return np.full(n, float(rho))
        if rho.size != n:
            raise RodError("rho must be scalar or one value per density sample")
        return rho

    def check_convexity(self, n_trials=200, scale=10.0, seed=0) -> bool:
        """Random midpoint-convexity check of ``f`` in its strain argument."""
        rng = np.random.default_rng(seed)
        a = rng.normal(scale=scale, size=(n_trials, 3))
        b = rng.normal(scale=scale, size=(n_trials, 3))
        s = rng.uniform(0, 1, size=n_trials)
        f = self.f
        mid = f(0.5 * (a + b), s)
        ends = 0.5 * (f(a, s) + f(b, s))
        return bool(np.all(mid <= ends + 1e-12 * (1 + np.abs(ends))))


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------


def _interp_weights(n_samples: int, length: float, s_eval: np.ndarray):
    h = length / (n_samples - 1)
    pos = np.clip(s_eval / h, 0.0, n_samples - 1)
    i0 = np.minimum(np.floor(pos).astype(int), n_samples - 2)
    frac = pos - i0
    return i0, frac


def _integrate(dens, length, R0, x0, n_steps):
    """Batched frame integration.

    ``dens`` has shape ``(..., 3, n_samples)``.  Returns ``(x, R)`` with shapes
    ``(..., n_steps + 1, 3)`` and ``(..., n_steps + 1, 3, 3)``.
    """
    dens = np.asarray(dens, dtype=float)
    n = dens.shape[-1]
    h = length / n_steps
    i0, frac = _interp_weights(n, length, (np.arange(n_steps) + 0.5) * h)
    mid = dens[..., i0] * (1.0 - frac) + dens[..., i0 + 1] * frac  # (..., 3, n_steps)
    k1, k2, om = mid[..., 0, :], mid[..., 1, :], mid[..., 2, :]
    rates = np.stack([om, -k2, k1], axis=-1)  # (..., n_steps, 3)
    steps = expmap(h * rates)
    head = np.broadcast_to(np.asarray(R0, dtype=float), steps.shape[:-3] + (1, 3, 3))
    R = cumulative_matmul(np.concatenate([head, steps], axis=-3))
    t = R[..., :, 0]
    # Simpson's rule along each step, with the tangent at the half step
    t_half = np.einsum("...ij,...j->...i", R[..., :-1, :, :], expmap(0.5 * h * rates)[..., :, 0])
    incr = (h / 6.0) * (t[..., :-1, :] + 4.0 * t_half + t[..., 1:, :])
    x = np.concatenate(
        [np.zeros(incr.shape[:-2] + (1, 3)), np.cumsum(incr, axis=-2)], axis=-2
    ) + np.asarray(x0, dtype=float)
    return x, R


def default_steps(n_samples: int) -> int:
    return max(n_samples - 1, 16 * (n_samples - 1))


def reconstruct_frame(w: RodConfig, n_steps: Optional[int] = None) -> FramedCurve:
    """Integrate the frame equations from the clamp.

    The frame is advanced by the exact exponential of the midpoint strain
    over each step (stays in SO(3) to round-off); the midline is Simpson's
    rule on the tangent, using the frame at the half step.  For piecewise
    linear densities the scheme is second order; for constant strains the
    frame is exact and the midline error is fourth order.

    Parameters
    ----------
    w : RodConfig
    n_steps : int, optional
        Number of integration steps, at least ``n_samples - 1``.  Defaults to
        16 steps per density interval.
    """
    dens = w.densities
    if n_steps is None:
        n_steps = default_steps(dens.n_samples)
    if n_steps < dens.n_samples - 1:
        raise RodError("n_steps must be at least the number of density intervals")
    x, R = _integrate(dens.stacked(), dens.length, w.clamp.rotation, w.clamp.x0, n_steps)
    s = np.linspace(0.0, dens.length, n_steps + 1)
    return FramedCurve(s, x, R, dens.length / n_steps)


def reconstruct_batch(stacked, length, clamp: ClampFrame, n_steps: int):
    """Reconstruct many density arrays ``(B, 3, n)`` at once; returns ``(x, R)``."""
    return _integrate(stacked, length, clamp.rotation, clamp.x0, n_steps)


def closure_residual(c: FramedCurve) -> tuple[float, float]:
    """``(|x(L) - x(0)|, |t(L) - t(0)|)``."""
    return (
        float(np.linalg.norm(c.x[-1] - c.x[0])),
        float(np.linalg.norm(c.t[-1] - c.t[0])),
    )


def end_angle(c: FramedCurve) -> float:
    """Signed angle from ``d(0)`` to ``d(L)`` measured about ``t(0)``.

    ``d(L)`` is first projected to the plane orthogonal to ``t(0)``.
    """
    t0, d0 = c.t[0], c.d[0]
    dL = c.d[-1] - (c.d[-1] @ t0) * t0
    return float(np.arctan2(np.cross(d0, dL) @ t0, d0 @ dL))


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    wts = np.full(n, h)
    wts[0] = wts[-1] = 0.5 * h
    return wts


def elastic_energy(w: RodConfig, m: MaterialLaw) -> float:
    """Trapezoidal quadrature of ``f(strain(s), s)`` over the density grid."""
    dens = w.densities
    strain = dens.stacked().T
    vals = np.asarray(m.f(strain, dens.s), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise RodError("energy density returned non-finite values")
    return float(vals @ _trapezoid_weights(dens.n_samples, dens.h))


def _line_density(cs: CrossSection, m: MaterialLaw, n: int):
    """Mass per unit length and first moments in the section at each density sample."""
    sc = cs.scale_at(n)
    mass = m.rho_at(n) * cs.area * sc ** 2
    moment = mass[:, None] * (sc[:, None] * cs.centroid[None, :])
    return mass, moment


def _resample(values: np.ndarray, length: float, s: np.ndarray) -> np.ndarray:
    grid = np.linspace(0.0, length, values.shape[0])
    if values.ndim == 1:
        return np.interp(s, grid, values)
    return np.stack([np.interp(s, grid, values[:, k]) for k in range(values.shape[1])], axis=1)


def gravity_energy(
    w: RodConfig, cs: CrossSection, m: MaterialLaw, curve: Optional[FramedCurve] = None
) -> float:
    """Potential energy ``-int rho g . p`` over the solid rod.

    Each slice is integrated exactly (the integrand is affine in the section
    coordinates, so only the slice mass and centroid enter); the midline
    direction uses the trapezoid rule on the reconstruction grid.
    """
    g = m.gravity
    if not np.any(g):
        return 0.0
    if curve is None:
        curve = reconstruct_frame(w)
    n = w.densities.n_samples
    mass, moment = _line_density(cs, m, n)
    mass_s = _resample(mass, w.length, curve.s)
    mom_s = _resample(moment, w.length, curve.s)
    com = mass_s[:, None] * curve.x + mom_s[:, :1] * curve.d + mom_s[:, 1:] * curve.b
    integrand = com @ g
    return float(-integrand @ _trapezoid_weights(len(curve.s), curve.arc_step))


def total_mass(w: RodConfig, cs: CrossSection, m: MaterialLaw) -> float:
    mass, _ = _line_density(cs, m, w.densities.n_samples)
    return float(mass @ _trapezoid_weights(w.densities.n_samples, w.densities.h))


def injectivity_measure(w: RodConfig, cs: CrossSection) -> np.ndarray:
    """``max_{zeta in A(s)} (zeta1 k2 - zeta2 k1)`` at every density sample."""
    dens = w.densities
    u = np.stack([dens.kappa2, -dens.kappa1], axis=1)
    return cs.scale_at(dens.n_samples) * cs.support(u)


def local_injectivity_margin(w: RodConfig, cs: CrossSection) -> float:
    """``1 - max_s max_zeta (zeta1 k2 - zeta2 k1)``; the rod lies in N iff this is >= 0."""
    return float(1.0 - np.max(injectivity_measure(w, cs)))


def jacobian_determinant(w: RodConfig, s, zeta) -> np.ndarray:
    """``det Dp = 1 - (zeta1 k2(s) - zeta2 k1(s))`` at arc length ``s``, section point ``zeta``."""
    dens = w.densities
    s = np.asarray(s, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    k1 = np.interp(s, dens.s, dens.kappa1)
    k2 = np.interp(s, dens.s, dens.kappa2)
    return 1.0 - (zeta[..., 0] * k2 - zeta[..., 1] * k1)


def jacobian_integral(w: RodConfig, cs: CrossSection) -> float:
    """``int_Omega det Dp``, exact per slice (the integrand is affine in zeta)."""
    dens = w.densities
    n = dens.n_samples
    sc = cs.scale_at(n)
    area = cs.area * sc ** 2
    c = sc[:, None] * cs.centroid[None, :]
    per_slice = area * (1.0 - (c[:, 0] * dens.kappa2 - c[:, 1] * dens.kappa1))
    return float(per_slice @ _trapezoid_weights(n, dens.h))


# ---------------------------------------------------------------------------
# tube geometry
# ---------------------------------------------------------------------------


def frame_at(c: FramedCurve, s) -> tuple[np.ndarray, np.ndarray]:
    """Midline point and frame at arc length(s) ``s``.

    The rotation is interpolated geodesically between neighbouring samples.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    L0, L1 = c.s[0], c.s[-1]
    tol = 1e-12 * max(1.0, abs(L1))
    if np.any(s_arr < L0 - tol) or np.any(s_arr > L1 + tol):
        raise RodError("arc length outside [0, L]")
    s_arr = np.clip(s_arr, L0, L1)
    i = np.clip(np.searchsorted(c.s, s_arr, side="right") - 1, 0, len(c.s) - 2)
    f = (s_arr - c.s[i]) / (c.s[i + 1] - c.s[i])
    rel = np.swapaxes(c.R[i], 1, 2) @ c.R[i + 1]
    R = c.R[i] @ expmap(f[:, None] * logmap(rel))
    x = c.x[i] + f[:, None] * (c.x[i + 1] - c.x[i])
    if np.ndim(s) == 0:
        return x[0], R[0]
    return x, R


def tube_point(c: FramedCurve, s, zeta) -> np.ndarray:
    """``x(s) + zeta1 d(s) + zeta2 (t x d)(s)``."""
    x, R = frame_at(c, s)
    zeta = np.asarray(zeta, dtype=float)
    return x + zeta[..., 0, None] * R[..., :, 1] + zeta[..., 1, None] * R[..., :, 2]


def is_closed_curve(c: FramedCurve, tol: float = 1e-6) -> bool:
    pos, tan = closure_residual(c)
    return pos <= tol * c.length and tan <= tol


def tube_mesh(
    c: FramedCurve,
    cs: CrossSection,
    n_around: int = 32,
    closed: Optional[bool] = None,
    n_along: Optional[int] = None,
    equal_area: bool = True,
) -> SurfaceMesh:
    """Watertight, outward-oriented triangle mesh of the rod surface.

    A closed midline gives a torus-like tube whose last ring is glued to the
    first (with the index shift that best matches the end frames); an open
    midline is capped with fans at both ends.

    ``equal_area`` enlarges polygonised disc rings so that each ring encloses
    the exact disc area, which removes the inscribed-polygon volume bias.
    """
    if n_around < 3:
        raise RodError("need at least three points around the tube")
    if closed is None:
        closed = is_closed_curve(c)
    if n_along is not None and n_along < len(c.s):
        c = c.subsample(n_along)
    nrings = len(c.s) - 1 if closed else len(c.s)
    ring = cs.boundary_points(n_around)
    if cs.is_disc and equal_area:
        ring = ring * np.sqrt(2 * np.pi / (n_around * np.sin(2 * np.pi / n_around)))
    if cs.scale is not None:
        sc = np.interp(c.s, np.linspace(c.s[0], c.s[-1], cs.scale.size), cs.scale)
    else:
        sc = np.ones(len(c.s))
    pts = (
        c.x[:nrings, None, :]
        + sc[:nrings, None, None] * ring[None, :, 0, None] * c.d[:nrings, None, :]
        + sc[:nrings, None, None] * ring[None, :, 1, None] * c.b[:nrings, None, :]
    )
    V = pts.reshape(-1, 3)
    idx = np.arange(nrings * n_around).reshape(nrings, n_around)
    j = np.arange(n_around)
    jn = (j + 1) % n_around
    tris = []
    for i in range(nrings - 1):
        a, b = idx[i], idx[i + 1]
        tris.append(np.stack([a[j], a[jn], b[jn]], axis=1))
        tris.append(np.stack([a[j], b[jn], b[j]], axis=1))
    if closed:
        # match ring nrings-1 to ring 0 with the index shift closest to the end frame
        RL = c.R[-1]
        R0 = c.R[0]
        dL_in0 = np.array([RL[:, 1] @ R0[:, 1], RL[:, 1] @ R0[:, 2]])
        shift = int(np.round(np.arctan2(dL_in0[1], dL_in0[0]) / (2 * np.pi / n_around))) % n_around
        a = idx[nrings - 1]
        b = idx[0][(j + shift) % n_around]
        bn = idx[0][(jn + shift) % n_around]
        tris.append(np.stack([a[j], a[jn], bn], axis=1))
        tris.append(np.stack([a[j], bn, b], axis=1))
    else:
        c0 = len(V)
        c1 = c0 + 1
        V = np.vstack([V, c.x[0], c.x[-1]])
        tris.append(np.stack([np.full(n_around, c0), idx[0][jn], idx[0][j]], axis=1))
        tris.append(np.stack([np.full(n_around, c1), idx[-1][j], idx[-1][jn]], axis=1))
    mesh = SurfaceMesh(V, np.concatenate(tris))
    return _mesh.orient_outward(mesh)


def ciarlet_necas_residual(
    w: RodConfig,
    cs: CrossSection,
    voxel: Optional[float] = None,
    n_around: int = 48,
    curve: Optional[FramedCurve] = None,
    return_parts: bool = False,
):
    """``int_Omega det Dp - vol(Lambda)`` with the image volume measured by voxels.

    A residual at the level of :func:`~kplateau.mesh.voxel_error_bound` means
    the integral inequality holds discretely; a materially positive residual
    flags overlapping material.

    Parameters
    ----------
    voxel : float, optional
        Voxel edge length, default one eighth of the section extent.
    """
    if voxel is None:
        voxel = cs.extent / 8.0
    if voxel <= 0:
        raise RodError("voxel edge length must be positive")
    if local_injectivity_margin(w, cs) < 0:
        raise RodError("rod violates local injectivity; det Dp changes sign")
    if curve is None:
        curve = reconstruct_frame(w)
    # at least ~2 rings per voxel along the midline
    n_along = int(min(len(curve.s), max(64, 2 * curve.length / voxel)))
    tm = tube_mesh(curve, cs, n_around=n_around, n_along=n_along)
    jac = jacobian_integral(w, cs)
    vol = _mesh.voxel_volume(tm, voxel)
    if return_parts:
        return jac - vol, jac, vol, _mesh.voxel_error_bound(tm, voxel)
    return jac - vol


def frame_orthogonality(c: FramedCurve) -> float:
    return orthogonality_error(c.R)
