"""Isotropic remeshing that never increases film area.

Three passes run in order: edge flips, splits of long interior edges and
collapses of short interior edges.  Splits insert the edge midpoint, so
they preserve area exactly.  A flip or collapse is applied only if the
area of the affected triangles does not grow and no triangle normal
reverses.  Boundary edges are left alone, so the bound boundary
vertices and loops survive unchanged, up to index renumbering.
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from ..mesh import SurfaceMesh


def _tri_area(P, tris):
    if len(tris) == 0:
        return 0.0
    t = np.asarray(tris)
    n = np.cross(P[t[:, 1]] - P[t[:, 0]], P[t[:, 2]] - P[t[:, 0]])
    return float(0.5 * np.linalg.norm(n, axis=1).sum())


def _normals(P, tris):
    t = np.asarray(tris)
    return np.cross(P[t[:, 1]] - P[t[:, 0]], P[t[:, 2]] - P[t[:, 0]])


def _edge_faces(T):
    ef = defaultdict(list)
    for f, (a, b, c) in enumerate(T):
        for u, v in ((a, b), (b, c), (c, a)):
            ef[(min(u, v), max(u, v))].append(f)
    return ef


def _opposite(tri, u, v):
    for w in tri:
        if w != u and w != v:
            return w
    raise ValueError("edge not in triangle")


def _opposite_angles(P, u, v, c):
    a = P[u] - P[c]
    b = P[v] - P[c]
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.einsum("ij,ij->i", a, b))


def flip_pass(P, T, boundary):
    """Delaunay-style flips that do not increase area."""
    T = [list(t) for t in T]
    ef = _edge_faces(T)
    inner = [(e, f) for e, f in sorted(ef.items()) if len(f) == 2]
    if not inner:
        return np.array(T, dtype=np.int64), 0
    uv = np.array([e for e, _ in inner])
    opp = np.array([[_opposite(T[f[0]], *e), _opposite(T[f[1]], *e)] for e, f in inner])
    angle_sum = _opposite_angles(P, uv[:, 0], uv[:, 1], opp[:, 0]) + _opposite_angles(P, uv[:, 0], uv[:, 1], opp[:, 1])
    locked = set()
    created = set()
    count = 0
    for idx in np.nonzero(angle_sum > np.pi + 1e-12)[0]:
        (u, v), (f0, f1) = inner[idx]
        if f0 in locked or f1 in locked:
            continue
        c = _opposite(T[f0], u, v)
        d = _opposite(T[f1], u, v)
        key = (min(c, d), max(c, d))
        if c == d or key in ef or key in created:
            continue
        # keep orientation of f0: it contains u->v or v->u
        t0 = T[f0]
        i = t0.index(u)
        if t0[(i + 1) % 3] == v:
            new0, new1 = [c, u, d], [c, d, v]
        else:
            new0, new1 = [c, d, u], [c, v, d]
        old = [T[f0], T[f1]]
        if _tri_area(P, [new0, new1]) > _tri_area(P, old):
            continue
        n_old = _normals(P, old).sum(axis=0)
        n_new = _normals(P, [new0, new1])
        if np.any(n_new @ n_old <= 0) or np.any(np.linalg.norm(n_new, axis=1) <= 1e-14 * np.dot(n_old, n_old) ** 0.5):
            continue
        T[f0], T[f1] = new0, new1
        locked.update((f0, f1))
        created.add(key)
        count += 1
    return np.array(T, dtype=np.int64), count


def split_pass(P, T, boundary, max_len):
    """Split interior edges longer than ``max_len`` at their midpoints."""
    T = [list(t) for t in T]
    P = list(P)
    ef = _edge_faces(T)
    locked = set()
    count = 0
    lengths = {e: np.linalg.norm(P[e[0]] - P[e[1]]) for e in ef}
    for (u, v) in sorted(ef, key=lambda e: (-lengths[e], e)):
        faces = ef[(u, v)]
        if lengths[(u, v)] <= max_len or len(faces) != 2:
            continue
        if any(f in locked for f in faces):
            continue
        m = len(P)
        P.append(0.5 * (P[u] + P[v]))
        for f in faces:
            t = T[f]
            w = _opposite(t, u, v)
            i = t.index(u)
            if t[(i + 1) % 3] == v:
                T[f] = [u, m, w]
                T.append([m, v, w])
            else:
                T[f] = [u, w, m]
                T.append([m, w, v])
            locked.add(f)
            locked.add(len(T) - 1)
        count += 1
    return np.array(P), np.array(T, dtype=np.int64), count


def collapse_pass(P, T, boundary, min_len, max_len):
    """Collapse interior edges shorter than ``min_len``."""
    P = np.array(P, dtype=float)
    T = [list(t) for t in T]
    alive = [True] * len(T)
    vf = defaultdict(set)
    for f, t in enumerate(T):
        for w in t:
            vf[w].add(f)
    ef = _edge_faces(T)
    is_b = np.zeros(len(P), dtype=bool)
    is_b[list(boundary)] = True
    touched = set()
    count = 0
    lengths = sorted((np.linalg.norm(P[u] - P[v]), u, v) for (u, v), fs in ef.items() if len(fs) == 2)
    for L, u, v in lengths:
        if L >= min_len:
            break
        if u in touched or v in touched or (is_b[u] and is_b[v]):
            continue
        if is_b[u]:
            keep, drop = u, v
        elif is_b[v]:
            keep, drop = v, u
        else:
            keep, drop = u, v
        ring_k = {w for f in vf[keep] for w in T[f]} - {keep}
        ring_d = {w for f in vf[drop] for w in T[f]} - {drop}
        if len(ring_k & ring_d) != 2:
            continue  # link condition
        shared = [f for f in vf[drop] if keep in T[f]]
        if len(shared) != 2:
            continue
        target = P[keep] if (is_b[keep] or is_b[drop]) else 0.5 * (P[u] + P[v])
        affected = sorted((vf[keep] | vf[drop]))
        old_tris = [T[f] for f in affected]
        new_tris = []
        for f in affected:
            if f in shared:
                continue
            new_tris.append([keep if w == drop else w for w in T[f]])
        Q = P.copy()
        Q[keep] = target
        if _tri_area(Q, new_tris) > _tri_area(P, old_tris):
            continue
        n_old = _normals(P, [T[f] for f in affected if f not in shared])
        n_new = _normals(Q, new_tris)
        if np.any(np.sum(n_old * n_new, axis=1) <= 0):
            continue
        if np.any(np.linalg.norm(n_new, axis=1) <= 1e-14 * L * L + 1e-300):
            continue
        new_edges = np.array([[Q[t[i]] - Q[t[(i + 1) % 3]] for i in range(3)] for t in new_tris])
        if np.linalg.norm(new_edges, axis=-1).max() > max_len:
            continue
        P[keep] = target
        for f in shared:
            alive[f] = False
            for w in T[f]:
                vf[w].discard(f)
        for f in list(vf[drop]):
            T[f] = [keep if w == drop else w for w in T[f]]
            vf[keep].add(f)
        vf[drop] = set()
        touched.update(ring_k | ring_d | {keep, drop})
        count += 1
    T = np.array([t for t, a in zip(T, alive) if a], dtype=np.int64)
    return P, T, count


def remesh(mesh: SurfaceMesh, target: float, min_factor: float = 0.5, max_factor: float = 2.0):
    """One flip/split/collapse round; returns ``(new_mesh, counts)``.

    Vertex indices are compacted; boundary loops, bindings and curve indices
    are carried over.
    """
    boundary = np.concatenate(mesh.boundary_loops) if mesh.boundary_loops else np.array([], int)
    P = mesh.vertices.copy()
    T, n_flip = flip_pass(P, mesh.triangles, boundary)
    P, T, n_split = split_pass(P, T, boundary, max_factor * target)
    P, T, n_coll = collapse_pass(P, T, boundary, min_factor * target, max_factor * target)
    T, n_flip2 = flip_pass(P, T, boundary)
    used = np.unique(T)
    remap = -np.ones(len(P), dtype=np.int64)
    remap[used] = np.arange(len(used))
    n_old = mesh.n_vertices

    def carry(arr, fill):
        if arr is None:
            return None
        ext = np.full(len(P), fill, dtype=arr.dtype)
        ext[:n_old] = arr
        return ext[used]

    out = SurfaceMesh(
        P[used],
        remap[T],
        [remap[b] for b in mesh.boundary_loops],
        carry(mesh.boundary_binding, np.nan),
        carry(mesh.boundary_curve, -1),
    )
    return out, {"flip": n_flip + n_flip2, "split": n_split, "collapse": n_coll}
