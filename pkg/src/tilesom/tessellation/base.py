"""Regular base maps: platonic solids, planar/hyperbolic patches, tori and Klein bottles."""

from __future__ import annotations

import math
from collections import deque
from functools import lru_cache

import numpy as np

from ..geometry import E, GeometryClass, H, S, normalize, rotation, translation_x
from .goldberg import triangle_side_length
from .maps import GluingError, GluingTable, table_from_polygons

_PHI = (1 + 5 ** 0.5) / 2


def _dual_vertices(p: int) -> np.ndarray:
    """Vertices of the platonic solid dual to {p,3}."""
    if p == 5:
        pts = []
        for s1 in (-1, 1):
            for s2 in (-1, 1):
                pts += [(0, s1, s2 * _PHI), (s1, s2 * _PHI, 0), (s2 * _PHI, 0, s1)]
        return np.array(pts, dtype=float)
    if p == 4:
        return np.array([(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)], dtype=float)
    if p == 3:
        return np.array([(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)], dtype=float)
    raise GluingError(f"{{{p},3}} is not spherical")


def platonic_polygons(p: int):
    """Faces of the {p,3} solid as cyclic vertex-id lists, plus unit face centers."""
    from scipy.spatial import ConvexHull

    pts = _dual_vertices(p)
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    hull = ConvexHull(pts)
    tris = []
    for simplex in hull.simplices:
        i, j, k = (int(x) for x in simplex)
        if np.dot(np.cross(pts[j] - pts[i], pts[k] - pts[i]), pts[i]) < 0:
            j, k = k, j
        tris.append((i, j, k))
    polygons = []
    for v in range(len(pts)):
        around = [t for t in tris if v in t]
        # successor: triangle (v, x, y) is followed by the triangle (v, y, .)
        rot = {}
        for idx, t in enumerate(around):
            r = t.index(v)
            x, y = t[(r + 1) % 3], t[(r + 2) % 3]
            rot[x] = (y, idx)
        start = min(rot)
        cyc, x = [], start
        while True:
            y, idx = rot[x]
            cyc.append(tris.index(around[idx]))
            x = y
            if x == start:
                break
        polygons.append(cyc)
    return polygons, pts


def platonic_table(p: int) -> GluingTable:
    polygons, _ = platonic_polygons(p)
    return table_from_polygons(polygons, meta={"schlafli": f"{p} 3", "geometry": "spherical"})


def antipodal_table(p: int) -> GluingTable:
    """Quotient of the {p,3} solid by the antipodal map (elliptic plane)."""
    polygons, centers = platonic_polygons(p)
    nf = len(polygons)
    anti = {}
    for f in range(nf):
        j = int(np.argmin(np.linalg.norm(centers + centers[f], axis=1)))
        anti[f] = j
    # vertex ids are dual triangles; pair them through their barycenters
    _, tri_pts = _triangle_barycenters(p)
    vanti = {}
    for v in range(len(tri_pts)):
        vanti[v] = int(np.argmin(np.linalg.norm(tri_pts + tri_pts[v], axis=1)))
    reps = []
    for f in range(nf):
        if anti[f] > f:
            reps.append(f)
    rep_index = {f: i for i, f in enumerate(reps)}
    canon_v = {v: min(v, vanti[v]) for v in vanti}
    new_polys = []
    for f in reps:
        new_polys.append([canon_v[v] for v in polygons[f]])
    if anti[reps[0]] == reps[0]:
        raise GluingError("antipodal map has a fixed face")
    return table_from_polygons(new_polys, meta={"schlafli": f"{p} 3", "geometry": "spherical"})


def _triangle_barycenters(p: int):
    from scipy.spatial import ConvexHull

    pts = _dual_vertices(p)
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    hull = ConvexHull(pts)
    tris = []
    for simplex in hull.simplices:
        i, j, k = (int(x) for x in simplex)
        if np.dot(np.cross(pts[j] - pts[i], pts[k] - pts[i]), pts[i]) < 0:
            j, k = k, j
        tris.append((i, j, k))
    bary = np.array([pts[list(t)].mean(axis=0) for t in tris])
    return tris, bary


@lru_cache(maxsize=16)
def patch_polygons(p: int, radius: int):
    """Faces of the regular {p,3} tiling within ``radius`` face-hops of a central face.

    Returns (polygons, face_centers, face_hops) with face 0 central.
    """
    geom = GeometryClass.of_schlafli(p, 3)
    if geom is S:
        raise GluingError("spherical tilings are finite; use platonic_table")
    L = triangle_side_length(p, geom)
    if geom is E:
        circ = L / math.sqrt(3)
    else:
        # circumradius of the regular p-gon with inradius L/2 and interior angle 2pi/3
        circ = math.acosh(1 / (math.tan(math.pi / p) * math.tan(math.pi / 3)))
    vert_local = []
    for k in range(p):
        m = rotation(2 * math.pi * k / p, geom) @ translation_x(circ, geom)
        vert_local.append(m.matrix @ np.array([0.0, 0.0, 1.0]))
    vert_local = np.array(vert_local)
    half_turns = []
    for k in range(p):
        th = (2 * k + 1) * math.pi / p
        m = (rotation(th, geom) @ translation_x(L / 2, geom) @ rotation(math.pi, geom)
             @ translation_x(-L / 2, geom) @ rotation(-th, geom))
        half_turns.append(m.matrix)

    def coords(v):
        v = normalize(v, geom)
        # hyperboloid (x, y) or planar (x, y): well separated for distinct vertices
        return v[:2] if geom is H else v[:2] / v[2]

    vid = _SnapIndex()
    seen = _SnapIndex()
    polygons, centers, hops = [], [], []
    queue = deque([(np.eye(3), 0)])
    while queue:
        M, h = queue.popleft()
        c = M @ np.array([0.0, 0.0, 1.0])
        if seen.find(coords(c)) is not None:
            continue
        seen.add(coords(c), len(polygons))
        poly = []
        for v in vert_local:
            x = coords(M @ v)
            k = vid.find(x)
            if k is None:
                k = vid.add(x, len(vid))
            poly.append(k)
        polygons.append(poly)
        centers.append(normalize(c, geom))
        hops.append(h)
        if h < radius:
            for k in range(p):
                M2 = M @ half_turns[k]
                if seen.find(coords(M2[:, 2])) is not None:
                    continue
                if geom is H:
                    # keep the matrix on the Lorentz group
                    M2 = _relorentz(M2)
                queue.append((M2, h + 1))
    return tuple(tuple(x) for x in polygons), np.array(centers), np.array(hops)


class _SnapIndex:
    """Points keyed by position up to a small tolerance (bucketed lookup)."""

    def __init__(self, cell: float = 1e-3, tol: float = 1e-5):
        self.cell, self.tol = cell, tol
        self.buckets: dict = {}
        self.count = 0

    def __len__(self):
        return self.count

    def find(self, x):
        bx, by = int(math.floor(x[0] / self.cell)), int(math.floor(x[1] / self.cell))
        scale = self.tol * (1.0 + abs(x[0]) + abs(x[1]))
        for i in (bx - 1, bx, bx + 1):
            for j in (by - 1, by, by + 1):
                for y, val in self.buckets.get((i, j), ()):
                    if abs(y[0] - x[0]) <= scale and abs(y[1] - x[1]) <= scale:
                        return val
        return None

    def add(self, x, val):
        key = (int(math.floor(x[0] / self.cell)), int(math.floor(x[1] / self.cell)))
        self.buckets.setdefault(key, []).append((np.array(x[:2]), val))
        self.count += 1
        return val


def _relorentz(M):
    J = np.diag([1.0, 1.0, -1.0])
    # one Newton step towards M^T J M = J
    return M @ (1.5 * np.eye(3) - 0.5 * J @ M.T @ J @ M)


def patch_table(p: int, radius: int) -> GluingTable:
    polygons, _, _ = patch_polygons(p, radius)
    geom = GeometryClass.of_schlafli(p, 3)
    return table_from_polygons(polygons, closed=False, meta={"schlafli": f"{p} 3", "geometry": geom.value})


def hex_torus_polygons(u, v, klein: bool = False):
    """Hexagonal {6,3} torus or Klein bottle on the triangular lattice of tile centers.

    Axial coordinates (x, y) stand for x + y*w with w = exp(i pi/3), so rows
    of tiles are horizontal.  The torus is the quotient by the translations
    ``u`` and ``v``.  For a Klein bottle ``u`` must be horizontal and the
    second generator is the glide p -> mirror(p) + v, mirroring across a
    vertical axis.
    """
    u = (int(u[0]), int(u[1]))
    v = (int(v[0]), int(v[1]))
    det = u[0] * v[1] - u[1] * v[0]
    if det == 0:
        raise GluingError("degenerate torus periods")
    if klein and (u[1] != 0 or v[1] == 0):
        raise GluingError("Klein bottle requires a horizontal period and a glide with vertical offset")
    reduce = _klein_reducer(u, v) if klein else _torus_reducer(u, v)
    n = abs(det)
    cells = set()
    span = abs(u[0]) + abs(u[1]) + abs(v[0]) + abs(v[1])
    for y in range(-span, span + 1):
        for x in range(-2 * span, 2 * span + 1):
            cells.add(reduce(x, y)[0])
    cells = sorted(cells, key=lambda c: (c[1], c[0]))
    if len(cells) != n:
        raise GluingError(f"torus enumeration found {len(cells)} cells, expected {n}")
    index = {c: i for i, c in enumerate(cells)}
    polygons = []
    for (x, y) in cells:
        poly = []
        for k in range(6):
            d1, d2 = _UNITS[k], _UNITS[(k + 1) % 6]
            tri = [(x, y), (x + d1[0], y + d1[1]), (x + d2[0], y + d2[1])]
            poly.append(_canon_triangle(tri, reduce))
        polygons.append(poly)
    return polygons, cells, index, reduce


def _floordiv(num: int, den: int) -> int:
    return -((-num) // den) if den < 0 else num // den


def _torus_reducer(u, v):
    det = u[0] * v[1] - u[1] * v[0]

    def reduce(x, y):
        fa = _floordiv(x * v[1] - y * v[0], det) if det > 0 else _floordiv(-(x * v[1] - y * v[0]), -det)
        fb = _floordiv(u[0] * y - u[1] * x, det) if det > 0 else _floordiv(-(u[0] * y - u[1] * x), -det)
        return (x - fa * u[0] - fb * v[0], y - fa * u[1] - fb * v[1]), False

    return reduce


def _vmirror(x, y):
    # Cartesian x -> -x in axial coordinates
    return (-x - y, y)


def _klein_reducer(u, v):
    W, H = u[0], v[1]

    def reduce(x, y):
        m = y // H
        flipped = False
        for _ in range(abs(m)):
            if m > 0:
                x, y = _vmirror(x - v[0], y - v[1])
            else:
                x, y = _vmirror(x, y)
                x, y = x + v[0], y + v[1]
            flipped = not flipped
        return (x % W, y), flipped

    return reduce


_UNITS = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]


def _canon_triangle(tri, reduce):
    """Name a lattice triangle up to the period group: min over its corners of
    (reduced corner, offset to centroid in thirds)."""
    cx = sum(p[0] for p in tri)
    cy = sum(p[1] for p in tri)
    reps = []
    for p in tri:
        (qx, qy), fl = reduce(*p)
        ex, ey = cx - 3 * p[0], cy - 3 * p[1]
        if fl:
            ex, ey = _vmirror(ex, ey)
        reps.append((qx, qy, ex, ey))
    return min(reps)


def hex_torus_table(u, v, klein: bool = False, meta=None) -> GluingTable:
    polygons, _, _, _ = hex_torus_polygons(u, v, klein)
    return table_from_polygons(polygons, meta=meta)
