"""Minimal graphs over rectangles by damped Newton on a conservative stencil.

The discrete operator at an interior node is the net flux

    -[F(i+1/2, j) - F(i-1/2, j) + G(i, j+1/2) - G(i, j-1/2)],

with edge fluxes ``F = u_x / sqrt(1 + |grad u|^2)`` (and ``G`` likewise).
The normal derivative on an edge is a one-sided difference and the
tangential one averages the two adjacent central differences.  The scheme
is second order and reproduces affine functions exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .params import SolverError


class GraphDivergence(SolverError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass
class GraphSolution:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    residual: float
    iterations: int
    picard_steps: int

    def area(self) -> float:
        """Area of the piecewise-bilinear graph, midpoint rule per cell."""
        h = self.x[1] - self.x[0]
        ux = (self.u[1:, 1:] + self.u[1:, :-1] - self.u[:-1, 1:] - self.u[:-1, :-1]) / (2 * h)
        uy = (self.u[1:, 1:] - self.u[1:, :-1] + self.u[:-1, 1:] - self.u[:-1, :-1]) / (2 * h)
        return float(np.sum(np.sqrt(1 + ux ** 2 + uy ** 2)) * h * h)

    def to_csv(self, path) -> None:
        """Grid dump with header ``i,j,x,y,u``."""
        rows = ["i,j,x,y,u"]
        for i, xv in enumerate(self.x):
            for j, yv in enumerate(self.y):
                rows.append(f"{i},{j},{xv:.17g},{yv:.17g},{self.u[i, j]:.17g}")
        Path(path).write_text("\n".join(rows) + "\n")


def _edge_fluxes(u, h, jac: bool):
    """Fluxes across x-edges (between (i,j),(i+1,j)) and y-edges, interior-row only."""
    nx1, ny1 = u.shape
    # x-edges for rows j = 1..ny-1
    gx = (u[1:, 1:-1] - u[:-1, 1:-1]) / h
    gy = (u[:-1, 2:] + u[1:, 2:] - u[:-1, :-2] - u[1:, :-2]) / (4 * h)
    qx = 1.0 / np.sqrt(1.0 + gx ** 2 + gy ** 2)
    F = qx * gx
    # y-edges for columns i = 1..nx-1
    hy = (u[1:-1, 1:] - u[1:-1, :-1]) / h
    hx = (u[2:, :-1] + u[2:, 1:] - u[:-2, :-1] - u[:-2, 1:]) / (4 * h)
    qy = 1.0 / np.sqrt(1.0 + hx ** 2 + hy ** 2)
    G = qy * hy
    if not jac:
        return F, G, qx, qy
    return F, G, qx, qy, (gx, gy), (hx, hy)


def _residual(u, h):
    F, G, _, _ = _edge_fluxes(u, h, jac=False)
    # node (i, j), i, j interior: F[i-1] - F[i] etc. on the interior slices
    R = -(F[1:, :] - F[:-1, :]) - (G[:, 1:] - G[:, :-1])
    return R


def _jacobian(u, h, interior_index):
    """Sparse Jacobian of the residual w.r.t. interior unknowns."""
    nx1, ny1 = u.shape
    F, G, qx, qy, (gx, gy), (hx, hy) = _edge_fluxes(u, h, jac=True)
    rows, cols, vals = [], [], []

    def node(i, j):
        return interior_index[i, j]

    # x-edge between (i, j) and (i+1, j): i = 0..nx-1, j = 1..ny-1
    I, J = np.meshgrid(np.arange(nx1 - 1), np.arange(1, ny1 - 1), indexing="ij")
    q = qx
    q3 = q ** 3
    deps = [
        (I + 1, J, 1.0 / h, 0.0),
        (I, J, -1.0 / h, 0.0),
        (I, J + 1, 0.0, 0.25 / h),
        (I + 1, J + 1, 0.0, 0.25 / h),
        (I, J - 1, 0.0, -0.25 / h),
        (I + 1, J - 1, 0.0, -0.25 / h),
    ]
    for (di, dj, cgx, cgy) in deps:
        dF = q * cgx - q3 * gx * (gx * cgx + gy * cgy)
        col = node(di, dj)
        # flux leaves node (I, J) -> residual -F ; enters node (I+1, J) -> +F
        for (ri, rj, sgn) in ((I, J, -1.0), (I + 1, J, 1.0)):
            row = node(ri, rj)
            m = (row >= 0) & (col >= 0)
            rows.append(row[m])
            cols.append(col[m])
            vals.append((sgn * dF)[m])
    # y-edge between (i, j) and (i, j+1): i = 1..nx-1, j = 0..ny-1
    I, J = np.meshgrid(np.arange(1, nx1 - 1), np.arange(ny1 - 1), indexing="ij")
    q = qy
    q3 = q ** 3
    deps = [
        (I, J + 1, 0.0, 1.0 / h),
        (I, J, 0.0, -1.0 / h),
        (I + 1, J, 0.25 / h, 0.0),
        (I + 1, J + 1, 0.25 / h, 0.0),
        (I - 1, J, -0.25 / h, 0.0),
        (I - 1, J + 1, -0.25 / h, 0.0),
    ]
    for (di, dj, cgx, cgy) in deps:
        dG = q * cgy - q3 * hy * (hx * cgx + hy * cgy)
        col = node(di, dj)
        for (ri, rj, sgn) in ((I, J, -1.0), (I, J + 1, 1.0)):
            row = node(ri, rj)
            m = (row >= 0) & (col >= 0)
            rows.append(row[m])
            cols.append(col[m])
            vals.append((sgn * dG)[m])
    n = int(interior_index.max()) + 1
    return sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def solve_minimal_graph(
    domain,
    u0: Union[Callable, np.ndarray],
    grid_h: float,
    tol: float = 1e-10,
    max_iters: int = 100,
    initial: np.ndarray | None = None,
) -> GraphSolution:
    """Solve the minimal surface equation with Dirichlet data on a rectangle.

    Parameters
    ----------
    domain : (x0, x1, y0, y1)
    u0 : callable or array
        ``u0(x, y)`` evaluated on the grid, or an array of grid values whose
        boundary entries are the Dirichlet data.
    grid_h : float
        Grid spacing; must divide both side lengths.
    tol : float
        Convergence threshold on the max-norm of the flux residual.

    Returns
    -------
    GraphSolution
        Raises :class:`GraphDivergence` (carrying the last residual) if the
        iteration does not converge within ``max_iters``.
    """
    x0, x1, y0, y1 = (float(v) for v in domain)
    if not grid_h > 0:
        raise ValueError("grid_h must be positive")
    nx = int(round((x1 - x0) / grid_h))
    ny = int(round((y1 - y0) / grid_h))
    if nx < 2 or ny < 2 or abs(nx * grid_h - (x1 - x0)) > 1e-9 * (x1 - x0) or abs(
        ny * grid_h - (y1 - y0)
    ) > 1e-9 * (y1 - y0):
        raise ValueError("grid_h must divide the domain sides into at least two cells")
    h = grid_h
    x = np.linspace(x0, x1, nx + 1)
    y = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    if callable(u0):
        data = np.asarray(u0(X, Y), dtype=float)
    else:
        data = np.array(u0, dtype=float)
        if data.shape != X.shape:
            raise ValueError(f"boundary data must have grid shape {X.shape}")
    if not np.all(np.isfinite(data[[0, -1], :])) or not np.all(np.isfinite(data[:, [0, -1]])):
        raise ValueError("boundary data must be finite")

    u = np.zeros_like(X) if initial is None else np.array(initial, dtype=float)
    u[0, :], u[-1, :], u[:, 0], u[:, -1] = data[0, :], data[-1, :], data[:, 0], data[:, -1]
    if initial is None:
        # transfinite (Coons) interpolation of the boundary data as a start
        s = (X - x0) / (x1 - x0)
        t = (Y - y0) / (y1 - y0)
        coons = (
            (1 - s) * data[0, :][None, :] + s * data[-1, :][None, :]
            + (1 - t) * data[:, 0][:, None] + t * data[:, -1][:, None]
            - ((1 - s) * (1 - t) * data[0, 0] + s * (1 - t) * data[-1, 0]
               + (1 - s) * t * data[0, -1] + s * t * data[-1, -1])
        )
        u[1:-1, 1:-1] = coons[1:-1, 1:-1]

    interior_index = -np.ones(X.shape, dtype=np.int64)
    interior_index[1:-1, 1:-1] = np.arange((nx - 1) * (ny - 1)).reshape(nx - 1, ny - 1)

    def rnorm(v):
        return float(np.max(np.abs(_residual(v, h))))

    res = rnorm(u)
    picard = 0
    for it in range(1, max_iters + 1):
        if res < tol:
            return GraphSolution(x, y, u, res, it - 1, picard)
        R = _residual(u, h).ravel()
        J = _jacobian(u, h, interior_index)
        try:
            delta = spla.spsolve(J, -R)
        except RuntimeError:
            delta = np.full_like(R, np.nan)
        accepted = False
        if np.all(np.isfinite(delta)):
            alpha = 1.0
            for _ in range(8):
                trial = u.copy()
                trial[1:-1, 1:-1] += alpha * delta.reshape(nx - 1, ny - 1)
                r_trial = rnorm(trial)
                if r_trial < res:
                    u, res, accepted = trial, r_trial, True
                    break
                alpha *= 0.5
        if not accepted:
            u = _picard_solve(u, h, interior_index)
            picard += 1
            res = rnorm(u)
    if res < tol:
        return GraphSolution(x, y, u, res, max_iters, picard)
    raise GraphDivergence(f"minimal graph solver did not converge, residual {res:.3e}", res)


def _picard_solve(u, h, interior_index):
    nx1, ny1 = u.shape
    _, _, qx, qy = _edge_fluxes(u, h, jac=False)
    n = int(interior_index.max()) + 1
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)

    def add(row_idx, col_i, col_j, coeff):
        ci = interior_index[col_i, col_j]
        m_row = row_idx >= 0
        inner = m_row & (ci >= 0)
        rows.append(row_idx[inner])
        cols.append(ci[inner])
        vals.append(coeff[inner])
        bnd = m_row & (ci < 0)
        np.add.at(rhs, row_idx[bnd], -(coeff * u[col_i, col_j])[bnd])

    I, J = np.meshgrid(np.arange(nx1 - 1), np.arange(1, ny1 - 1), indexing="ij")
    for (ri, sgn) in ((I, -1.0), (I + 1, 1.0)):
        row = interior_index[ri, J]
        add(row, I + 1, J, sgn * qx / h)
        add(row, I, J, -sgn * qx / h)
    I, J = np.meshgrid(np.arange(1, nx1 - 1), np.arange(ny1 - 1), indexing="ij")
    for (rj, sgn) in ((J, -1.0), (J + 1, 1.0)):
        row = interior_index[I, rj]
        add(row, I, J + 1, sgn * qy / h)
        add(row, I, J, -sgn * qy / h)
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    sol = spla.spsolve(A, rhs)
    out = u.copy()
    out[1:-1, 1:-1] = sol.reshape(nx1 - 2, ny1 - 2)
    return out
