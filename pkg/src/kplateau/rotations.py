"""Small SO(3) toolkit used by the rod integrator.

Everything here is batched over leading axes so that finite-difference
probes of a rod can be reconstructed in a single call.
"""
from __future__ import annotations

import numpy as np


def hat(v):
    """Skew-symmetric matrix of ``v`` (shape ``(..., 3)``) so that ``hat(v) @ u == v x u``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def expmap(v):
    """Rodrigues formula, ``exp(hat(v))`` for a batch of rotation vectors."""
    v = np.asarray(v, dtype=float)
    theta2 = np.einsum("...i,...i->...", v, v)
    theta = np.sqrt(theta2)
    small = theta2 < 1e-12
    safe = np.where(small, 1.0, theta)
    # series branches keep the coefficients accurate to round-off near 0
    a = np.where(small, 1.0 - theta2 / 6.0 + theta2 ** 2 / 120.0, np.sin(safe) / safe)
    b = np.where(
        small,
        0.5 - theta2 / 24.0 + theta2 ** 2 / 720.0,
        (1.0 - np.cos(safe)) / np.where(small, 1.0, theta2),
    )
    K = hat(v)
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a[..., None, None] * K + b[..., None, None] * (K @ K)


def logmap(R):
    """Rotation vector of ``R`` (inverse of :func:`expmap` for angles below pi)."""
    R = np.asarray(R, dtype=float)
    w = np.stack(
        [R[..., 2, 1] - R[..., 1, 2], R[..., 0, 2] - R[..., 2, 0], R[..., 1, 0] - R[..., 0, 1]],
        axis=-1,
    )
    cos = np.clip((np.trace(R, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    sin = 0.5 * np.linalg.norm(w, axis=-1)
    theta = np.arctan2(sin, cos)
    small = sin < 1e-8
    factor = np.where(small, 0.5 + theta ** 2 / 12.0, theta / (2.0 * np.where(small, 1.0, sin)))
    return factor[..., None] * w


def cumulative_matmul(M):
    """Inclusive prefix product ``P[k] = M[0] @ M[1] @ ... @ M[k]`` along axis -3.

    Uses a doubling scan, so round-off grows like ``log2(n)`` rather than ``n``.
    """
    P = np.array(M, dtype=float, copy=True)
    n = P.shape[-3]
    shift = 1
    while shift < n:
        nxt = P.copy()
        nxt[..., shift:, :, :] = P[..., :-shift, :, :] @ P[..., shift:, :, :]
        P = nxt
        shift *= 2
    return P


def orthogonality_error(R):
    """Max Frobenius norm of ``R^T R - I`` over a batch of matrices."""
    R = np.asarray(R, dtype=float)
    E = np.swapaxes(R, -1, -2) @ R - np.eye(3)
    return float(np.max(np.linalg.norm(E, axis=(-2, -1)))) if E.size else 0.0


def frame_from(t, d):
    """Rotation matrix with columns ``(t, d, t x d)``."""
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    return np.stack([t, d, np.cross(t, d)], axis=-1)
