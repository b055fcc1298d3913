"""Triangle meshes shared by the rod (tube surfaces) and film solvers."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for malformed or degenerate meshes."""


@dataclass
class SurfaceMesh:
    """Oriented triangle mesh with optional boundary bookkeeping.

    Parameters
    ----------
    vertices : (n, 3) float array
    triangles : (m, 3) int array
        Vertex indices, counter-clockwise about the oriented normal.
    boundary_loops : list of int arrays
        Each loop lists boundary vertex indices in cyclic order.
    boundary_binding : (n,) float array or None
        Arc-length parameter on the prescribed curve for every bound
        boundary vertex, NaN for free vertices.
    boundary_curve : (n,) int array or None
        Index of the prescribed curve a bound vertex lives on, -1 otherwise.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: list = field(default_factory=list)
    boundary_binding: np.ndarray | None = None
    boundary_curve: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.boundary_loops = [np.asarray(b, dtype=np.int64) for b in self.boundary_loops]
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must have shape (n, 3)")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise MeshError("triangle index out of range")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def copy(self) -> "SurfaceMesh":
        return SurfaceMesh(
            self.vertices.copy(),
            self.triangles.copy(),
            [b.copy() for b in self.boundary_loops],
            None if self.boundary_binding is None else self.boundary_binding.copy(),
            None if self.boundary_curve is None else self.boundary_curve.copy(),
        )

    def with_vertices(self, vertices) -> "SurfaceMesh":
        out = self.copy()
        out.vertices = np.ascontiguousarray(vertices, dtype=float)
        return out

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        for loop in self.boundary_loops:
            mask[loop] = True
        return mask

    def validate(self, rel_area_tol: float = 1e-14) -> None:
        """Check the degenerate-triangle and simple-boundary invariants."""
        if self.n_triangles == 0:
            raise MeshError("mesh has no triangles")
        ext = np.ptp(self.vertices, axis=0).max()
        areas = triangle_areas(self)
        if np.any(areas <= rel_area_tol * ext ** 2):
            raise MeshError(f"{int(np.sum(areas <= rel_area_tol * ext ** 2))} degenerate triangles")
        for loop in self.boundary_loops:
            if len(np.unique(loop)) != len(loop) or len(loop) < 3:
                raise MeshError("boundary loop is not a simple cycle")


def triangle_vectors(mesh: SurfaceMesh):
    V = mesh.vertices
    T = mesh.triangles
    return V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]


def triangle_normals(mesh: SurfaceMesh) -> np.ndarray:
    """Unnormalised normals, length equal to twice the triangle area."""
    a, b, c = triangle_vectors(mesh)
    return np.cross(b - a, c - a)


def triangle_areas(mesh: SurfaceMesh) -> np.ndarray:
    return 0.5 * np.linalg.norm(triangle_normals(mesh), axis=1)


def area(mesh: SurfaceMesh) -> float:
    """Total area, the sum of triangle areas."""
    return float(np.sum(triangle_areas(mesh)))


def film_energy(mesh: SurfaceMesh, sigma: float) -> float:
    """Energy ``2 sigma |K|`` of a two-leaflet liquid film."""
    if sigma < 0:
        raise ValueError("surface tension must be nonnegative")
    return 2.0 * sigma * area(mesh)


def edges(mesh: SurfaceMesh) -> tuple[np.ndarray, np.ndarray]:
    """Unique undirected edges and the number of incident triangles of each."""
    T = mesh.triangles
    e = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return uniq, counts


def boundary_edges(mesh: SurfaceMesh) -> np.ndarray:
    uniq, counts = edges(mesh)
    return uniq[counts == 1]


def euler_characteristic(mesh: SurfaceMesh) -> int:
    used = np.unique(mesh.triangles)
    uniq, _ = edges(mesh)
    return int(len(used) - len(uniq) + mesh.n_triangles)


def is_closed(mesh: SurfaceMesh) -> bool:
    _, counts = edges(mesh)
    return bool(np.all(counts == 2))


def signed_volume(mesh: SurfaceMesh) -> float:
    """Enclosed volume of a closed mesh by the divergence theorem."""
    a, b, c = triangle_vectors(mesh)
    return float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0)


def orient_outward(mesh: SurfaceMesh) -> SurfaceMesh:
    """Flip all triangles of a closed mesh if its signed volume is negative."""
    if signed_volume(mesh) < 0:
        out = mesh.copy()
        out.triangles = out.triangles[:, ::-1].copy()
        return out
    return mesh


def find_boundary_loops(triangles) -> list[np.ndarray]:
    """Chain boundary edges of a manifold triangulation into oriented cycles."""
    T = np.asarray(triangles, dtype=np.int64)
    directed = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    key = {tuple(e) for e in directed.tolist()}
    nxt = {}
    for a, b in directed.tolist():
        if (b, a) not in key:
            nxt[a] = b
    loops = []
    seen = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(np.asarray(loop, dtype=np.int64))
    return loops


def voxel_occupancy(mesh: SurfaceMesh, voxel: float, chunk: int = 20000):
    """Voxels whose centres have nonzero winding number with respect to ``mesh``.

    Winding numbers are accumulated by casting a ray in +z from every voxel
    column and adding the orientation sign of each crossed triangle.  Regions
    covered twice by a self-overlapping surface therefore count once.

    Returns
    -------
    occupied : (nx, ny, nz) bool array
    origin : (3,) float array
        Corner of the voxel grid; centre of voxel ``(i, j, k)`` is
        ``origin + (i + 0.5, j + 0.5, k + 0.5) * voxel``.
    """
    if voxel <= 0:
        raise ValueError("voxel edge length must be positive")
    V = mesh.vertices
    lo = V.min(axis=0)
    hi = V.max(axis=0)
    # irrational offset keeps voxel centres off mesh vertices and edges
    origin = lo - voxel * (1.0 + np.array([0.1234567, 0.2345678, 0.3456789]))
    shape = np.ceil((hi - origin) / voxel).astype(int) + 1
    nx, ny, nz = shape
    delta = np.zeros((nx, ny, nz + 1), dtype=np.int32)

    T = mesh.triangles
    for start in range(0, len(T), chunk):
        tri = V[T[start:start + chunk]]
        p0, p1, p2 = tri[:, 0], tri[:, 1], tri[:, 2]
        nz_sign = np.sign((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                          - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
        keep = nz_sign != 0
        if not np.any(keep):
            continue
        p0, p1, p2, nz_sign = p0[keep], p1[keep], p2[keep], nz_sign[keep]
        xy = np.stack([p0[:, :2], p1[:, :2], p2[:, :2]], axis=1)
        lo_ij = np.floor((xy.min(axis=1) - origin[:2]) / voxel - 0.5).astype(int) + 1
        hi_ij = np.floor((xy.max(axis=1) - origin[:2]) / voxel - 0.5).astype(int)
        cnt_i = np.maximum(hi_ij[:, 0] - lo_ij[:, 0] + 1, 0)
        cnt_j = np.maximum(hi_ij[:, 1] - lo_ij[:, 1] + 1, 0)
        cnt = cnt_i * cnt_j
        if cnt.sum() == 0:
            continue
        tri_idx = np.repeat(np.arange(len(cnt)), cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        ii = lo_ij[tri_idx, 0] + offs // np.maximum(cnt_j[tri_idx], 1)
        jj = lo_ij[tri_idx, 1] + offs % np.maximum(cnt_j[tri_idx], 1)
        cx = origin[0] + (ii + 0.5) * voxel
        cy = origin[1] + (jj + 0.5) * voxel
        a = p0[tri_idx]
        b = p1[tri_idx]
        c = p2[tri_idx]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        l1 = ((cx - a[:, 0]) * (c[:, 1] - a[:, 1]) - (cy - a[:, 1]) * (c[:, 0] - a[:, 0])) / det
        l2 = ((b[:, 0] - a[:, 0]) * (cy - a[:, 1]) - (b[:, 1] - a[:, 1]) * (cx - a[:, 0])) / det
        l0 = 1.0 - l1 - l2
        inside = (l0 > 0) & (l1 > 0) & (l2 > 0)
        if not np.any(inside):
            continue
        z = l0 * a[:, 2] + l1 * b[:, 2] + l2 * c[:, 2]
        # crossing at height z contributes to every centre strictly below it
        kmax = np.ceil((z - origin[2]) / voxel - 0.5).astype(int) - 1
        sel = inside & (kmax >= 0)
        kmax = np.minimum(kmax[sel], nz - 1)
        np.add.at(delta, (ii[sel], jj[sel], kmax), nz_sign[tri_idx][sel].astype(np.int32))
    winding = np.cumsum(delta[:, :, ::-1], axis=2)[:, :, ::-1][:, :, :nz]
    return winding != 0, origin


def voxel_volume(mesh: SurfaceMesh, voxel: float) -> float:
    """Volume of the nonzero-winding region measured by voxel counting."""
    occ, _ = voxel_occupancy(mesh, voxel)
    return float(np.count_nonzero(occ)) * voxel ** 3


def voxel_error_bound(mesh: SurfaceMesh, voxel: float) -> float:
    """Conservative bound on the voxel-counting error: half a voxel layer over the surface."""
    return 0.5 * voxel * area(mesh)


def write_obj(mesh: SurfaceMesh, path) -> None:
    """Write ``v x y z`` and 1-based ``f i j k`` lines only."""
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path) -> SurfaceMesh:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return SurfaceMesh(np.array(verts), np.array(faces, dtype=np.int64))
