"""Independent reference computations used by the tests.

Nothing here imports solver internals; each oracle recomputes its quantity
by a different route (closed form, matrix exponential, dense sampling,
projection crossings, bisection).
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm
from scipy.spatial import Delaunay


# ---------------------------------------------------------------------------
# rods
# ---------------------------------------------------------------------------


def strain_matrix(k1, k2, w):
    """Skew generator with ``R' = R K`` for the frame ``[t | d | t x d]``."""
    return np.array([[0.0, -k1, -k2], [k1, 0.0, -w], [k2, w, 0.0]])


def constant_strain_curve(k1, k2, w, s, x0=(0, 0, 0), R0=np.eye(3)):
    """Midline and frames of a constant-strain rod by matrix exponentials.

    The midline uses the augmented-matrix identity
    ``expm([[K, e1], [0, 0]] s)[:3, 3] = int_0^s expm(u K) e1 du``.
    """
    K = strain_matrix(k1, k2, w)
    A = np.zeros((4, 4))
    A[:3, :3] = K
    A[0, 3] = 1.0
    xs, Rs = [], []
    for si in np.atleast_1d(s):
        E = expm(si * A)
        Rs.append(R0 @ E[:3, :3])
        xs.append(np.asarray(x0, float) + R0 @ E[:3, 3])
    return np.array(xs), np.array(Rs)


def circle_gravity(L, radius_section, rho, g, x0, d0):
    """Gravity energy of a closed planar circle rod (disc section, ``k1 = 2 pi / L``).

    The midline centroid is the circle centre ``x0 + (L / 2 pi) d0``.
    """
    mass = rho * math.pi * radius_section ** 2 * L
    centre = np.asarray(x0, float) + L / (2 * math.pi) * np.asarray(d0, float)
    return -mass * float(np.dot(g, centre))


def dense_support(vertices, u, n_per_edge=20000):
    """``max_{zeta in polygon} zeta . u`` by dense boundary sampling."""
    P = np.asarray(vertices, float)
    Q = np.roll(P, -1, axis=0)
    f = np.linspace(0.0, 1.0, n_per_edge)
    pts = (P[:, None, :] * (1 - f)[None, :, None] + Q[:, None, :] * f[None, :, None]).reshape(-1, 2)
    return np.max(np.asarray(u) @ pts.T, axis=-1)


def torus_volume(R, r):
    return 2 * math.pi ** 2 * R * r ** 2


def voxel_tube_volume(centre_fn, n_mid, r, box, voxel):
    """Volume of points within ``r`` of a sampled midline, by voxel centres."""
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    axes = [np.arange(lo[k] + voxel / 2, hi[k], voxel) for k in range(3)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    mid = centre_fn(np.linspace(0, 1, n_mid, endpoint=False))
    from scipy.spatial import cKDTree

    d, _ = cKDTree(mid).query(G)
    return float(np.count_nonzero(d <= r)) * voxel ** 3


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------


def _seg_cross_2d(p, q, a, b):
    """Parameters ``(s, u)`` where segments ``p q`` and ``a b`` cross in the plane, or None."""
    r = q - p
    e = b - a
    den = r[0] * e[1] - r[1] * e[0]
    if abs(den) < 1e-15:
        return None
    w = a - p
    s = (w[0] * e[1] - w[1] * e[0]) / den
    u = (w[0] * r[1] - w[1] * r[0]) / den
    if 0 <= s < 1 and 0 <= u < 1:
        return s, u
    return None


def crossing_linking_number(P, Q, rotation):
    """Linking number from signed crossings of a projection along ``rotation[:, 2]``.

    Counts only crossings where ``P`` passes over ``Q``; each contributes
    ``+-1`` by the right-hand rule.
    """
    P = np.asarray(P) @ rotation
    Q = np.asarray(Q) @ rotation
    P1, Q1 = np.roll(P, -1, axis=0), np.roll(Q, -1, axis=0)
    total = 0
    for i in range(len(P)):
        for j in range(len(Q)):
            hit = _seg_cross_2d(P[i, :2], P1[i, :2], Q[j, :2], Q1[j, :2])
            if hit is None:
                continue
            s, u = hit
            zp = P[i, 2] + s * (P1[i, 2] - P[i, 2])
            zq = Q[j, 2] + u * (Q1[j, 2] - Q[j, 2])
            if zp <= zq:
                continue
            a = P1[i, :2] - P[i, :2]
            b = Q1[j, :2] - Q[j, :2]
            total += 1 if a[0] * b[1] - a[1] * b[0] > 0 else -1
    return total


def random_closed_curve(rng, n, n_modes=3, scale=1.0):
    """Random trigonometric closed curve sampled at ``n`` points."""
    th = 2 * np.pi * np.arange(n) / n
    out = np.zeros((n, 3))
    for k in range(1, n_modes + 1):
        a = rng.normal(size=3) / k
        b = rng.normal(size=3) / k
        out += np.cos(k * th)[:, None] * a + np.sin(k * th)[:, None] * b
    return scale * out


def trefoil(n, phase=0.0):
    th = phase + 2 * np.pi * np.arange(n) / n
    return np.stack(
        [np.sin(th) + 2 * np.sin(2 * th), np.cos(th) - 2 * np.cos(2 * th), -np.sin(3 * th)], axis=1
    )


def trefoil_derivative(n):
    th = 2 * np.pi * np.arange(n) / n
    return np.stack(
        [np.cos(th) + 4 * np.cos(2 * th), -np.sin(th) + 4 * np.sin(2 * th), -3 * np.cos(3 * th)], axis=1
    ) * (2 * np.pi / n)


def smooth_writhe(X, dX):
    """Periodic trapezoid rule for the writhe double integral of a smooth curve.

    The integrand vanishes on the diagonal, where it is set to zero.
    """
    total = 0.0
    for i in range(len(X)):
        r = X[i] - X
        cr = np.cross(dX[i], dX)
        num = np.einsum("ij,ij->i", cr, r)
        den = np.linalg.norm(r, axis=1) ** 3
        den[i] = np.inf
        total += float(np.sum(num / den))
    return total / (4 * np.pi)


def parallel_transport_frame(X):
    """Closed curve samples -> (tangents, normals) by discrete parallel transport.

    The normal at the end differs from the start by a holonomy rotation; the
    caller closes the frame by distributing that angle (and any extra full
    turns) along the curve.
    """
    n = len(X)
    T = np.roll(X, -1, axis=0) - X
    T /= np.linalg.norm(T, axis=1)[:, None]
    helper = np.array([0.3, 0.5, 0.81])
    d = np.cross(T[0], helper)
    d /= np.linalg.norm(d)
    D = [d]
    for i in range(1, n + 1):
        a, b = T[i - 1], T[i % n]
        v = np.cross(a, b)
        c = float(a @ b)
        s = np.linalg.norm(v)
        if s < 1e-15:
            D.append(D[-1])
            continue
        k = v / s
        dd = D[-1]
        ang = math.atan2(s, c)
        dd = dd * math.cos(ang) + np.cross(k, dd) * math.sin(ang) + k * (k @ dd) * (1 - math.cos(ang))
        D.append(dd)
    return T, np.array(D)


# ---------------------------------------------------------------------------
# spanning
# ---------------------------------------------------------------------------


def flat_disc_crossed(points, disc_boundary_xy, n_sub=2000):
    """Does a closed loop cross the flat disc ``z = 0`` inside a convex polygon?

    Each segment is sampled at ``n_sub`` points; a sign change of ``z``
    between consecutive samples locates a crossing, which counts if its
    ``(x, y)`` lies inside the polygon.
    """
    tri = Delaunay(np.asarray(disc_boundary_xy))
    P = np.asarray(points)
    Q = np.roll(P, -1, axis=0)
    f = np.linspace(0.0, 1.0, n_sub)
    for p, q in zip(P, Q):
        S = p[None, :] * (1 - f)[:, None] + q[None, :] * f[:, None]
        z = S[:, 2]
        idx = np.nonzero(np.sign(z[:-1]) * np.sign(z[1:]) <= 0)[0]
        for k in idx:
            if z[k] == z[k + 1]:
                continue
            lam = z[k] / (z[k] - z[k + 1])
            xy = S[k, :2] + lam * (S[k + 1, :2] - S[k, :2])
            if tri.find_simplex(xy) >= 0:
                return True
    return False


# ---------------------------------------------------------------------------
# films
# ---------------------------------------------------------------------------


def catenoid_parameter(h, r=1.0):
    """Stable catenoid ``rho(z) = a cosh(z / a)`` through rings of radius ``r`` at ``+-h/2``.

    Bisection of ``a cosh(h / 2a) = r`` on the branch with the larger ``a``;
    returns None if no catenoid exists.
    """
    def f(a):
        return a * math.cosh(h / (2 * a)) - r

    # f decreases then increases in 1/a; the minimiser of a cosh(h/2a)
    # satisfies tanh(x) = 1/x with x = h / 2a
    x_star = _bisect(lambda x: math.tanh(x) - 1.0 / x, 0.5, 3.0)
    a_star = h / (2 * x_star)
    if f(a_star) > 0:
        return None
    return _bisect(f, a_star, r)


def catenoid_area(h, r=1.0):
    a = catenoid_parameter(h, r)
    if a is None:
        return None
    return math.pi * a * (h + a * math.sinh(h / a))


def critical_ratio():
    """Largest ``h / r`` admitting a catenoid: ``h = 2 x r / cosh(x)`` at ``tanh x = 1 / x``."""
    x = _bisect(lambda x: math.tanh(x) - 1.0 / x, 0.5, 3.0)
    return 2 * x / math.cosh(x)


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scherk(x, y):
    return np.log(np.cos(y) / np.cos(x))


# ---------------------------------------------------------------------------
# repulsion
# ---------------------------------------------------------------------------


def circle_pair_repulsion(R, gap, h_epsilon, h_slope, n):
    """``int int 1 / h(|x1 - x2|)`` for two coaxial circles by the periodic trapezoid rule."""
    th = 2 * np.pi * np.arange(n) / n
    c1 = np.stack([R * np.cos(th), R * np.sin(th), np.zeros(n)], axis=1)
    c2 = c1 + np.array([0.0, 0.0, gap])
    ds = 2 * np.pi * R / n
    total = 0.0
    for i in range(n):
        d = np.linalg.norm(c1[i] - c2, axis=1)
        total += float(np.sum(1.0 / (h_slope * (d - h_epsilon))))
    return total * ds * ds


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------


def icosphere(level):
    t = (1 + 5 ** 0.5) / 2
    V = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
         (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    F = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    V = [np.array(v, float) / np.linalg.norm(v) for v in V]
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = V[a] + V[b]
                V.append(m / np.linalg.norm(m))
                cache[key] = len(V) - 1
            return cache[key]

        G = []
        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            G += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        F = G
    return np.array(V), np.array(F)
