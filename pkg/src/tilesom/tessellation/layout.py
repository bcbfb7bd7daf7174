"""Geometric placement of tiles: development into the covering space."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..geometry import E, GeometryClass, H, S, normalize, recentering_matrix
from .goldberg import Subdivision
from .graph import TessellationError, TileGraph

_J = np.diag([1.0, 1.0, -1.0])


@dataclass(eq=False)
class Layout:
    """Local geometry of a subdivision, indexed by subdivision tile id.

    ``home_pos[t]`` is the tile position in its home chart frame and
    ``transition[(t, u)]`` maps the home frame of u into that of t.
    ``triangles`` are the dual triangles (one per trivalent vertex) as tile
    triples, ``corners[i]`` the vertex position of triangle i in the home
    frame of each of its tiles.
    """

    geometry: GeometryClass
    home_pos: np.ndarray
    transition: dict
    triangles: list
    corners: list

    @classmethod
    def from_subdivision(cls, sd: Subdivision) -> "Layout":
        tris, corners = [], []
        for (tiles, _, centroid), Zinv in zip(sd.small_tris, sd.small_inv):
            tris.append(tuple(tiles))
            corners.append(Zinv @ centroid)
        return cls(sd.geom, sd.home_pos, sd.transitions(), tris, corners)


def _fix(M: np.ndarray, geom: GeometryClass) -> np.ndarray:
    """One Newton step back onto the isometry group."""
    if geom is H:
        return M @ (1.5 * np.eye(3) - 0.5 * _J @ M.T @ _J @ M)
    if geom is S:
        return M @ (1.5 * np.eye(3) - 0.5 * M.T @ M)
    return M


def develop(g: TileGraph):
    """Place every tile by a breadth-first walk from the center tile.

    Returns (frames, deck) where ``frames[t]`` maps the home frame of tile t
    into the common drawing frame (center tile at the origin) and ``deck`` is
    the list of distinct nontrivial deck transformations met on non-tree
    edges (the period group generators seen from this fundamental domain).
    """
    lay = g.layout
    if lay is None:
        raise TessellationError(f"{g.name} has no geometric layout")
    src = g.source
    geom = lay.geometry
    n = g.n
    frames = np.zeros((n, 3, 3))
    done = np.zeros(n, dtype=bool)
    c = g.center_tile
    frames[c] = recentering_matrix(lay.home_pos[src[c]], geom)
    done[c] = True
    queue = deque([c])
    parent = np.full(n, -1)
    while queue:
        t = queue.popleft()
        for u in g.adjacency[t]:
            if done[u]:
                continue
            M = frames[t] @ lay.transition[(int(src[t]), int(src[u]))]
            frames[u] = _fix(M, geom)
            if not np.all(np.isfinite(frames[u])):
                raise TessellationError("tile placement overflowed the floating point range")
            done[u] = True
            parent[u] = t
            queue.append(u)
    deck = []
    for t, nb in enumerate(g.adjacency):
        for u in nb:
            if parent[u] == t or parent[t] == u:
                continue
            D = frames[t] @ lay.transition[(int(src[t]), int(src[u]))] @ np.linalg.inv(frames[u])
            if np.abs(D - np.eye(3)).max() < 1e-6:
                continue
            if not any(np.abs(D - K).max() < 1e-6 for K in deck):
                deck.append(D)
    return frames, deck


def tile_centers(g: TileGraph) -> np.ndarray:
    """Tile centers (rows, model coordinates) of one fundamental domain."""
    if "centers" not in g.extra:
        frames, deck = develop(g)
        pos = g.layout.home_pos[g.source]
        v = np.einsum("nij,nj->ni", frames, pos)
        g.extra["frames"] = frames
        g.extra["deck"] = deck
        g.extra["centers"] = normalize(v, g.geometry)
    return g.extra["centers"]


def tile_polygons(g: TileGraph) -> list[np.ndarray]:
    """Polygon vertices of each tile (rows, homogeneous), in angular order."""
    tile_centers(g)
    frames = g.extra["frames"]
    lay = g.layout
    local = {int(s): i for i, s in enumerate(g.source)}
    verts = [[] for _ in range(g.n)]
    for tiles, corner in zip(lay.triangles, lay.corners):
        for k, t in enumerate(tiles):
            i = local.get(t)
            if i is not None:
                verts[i].append(frames[i] @ corner[k])
    out = []
    centers = g.extra["centers"]
    for i, vs in enumerate(verts):
        vs = normalize(np.array(vs), g.geometry)
        R = recentering_matrix(centers[i], g.geometry)
        loc = vs @ R.T
        ang = np.arctan2(loc[:, 1], loc[:, 0])
        out.append(vs[np.argsort(ang, kind="stable")])
    return out


def neighbor_angles(g_geom: GeometryClass, center: np.ndarray, others: np.ndarray) -> np.ndarray:
    """Direction angles of ``others`` seen from ``center``."""
    R = recentering_matrix(center, g_geom)
    loc = np.asarray(others) @ R.T
    return np.mod(np.arctan2(loc[:, 1], loc[:, 0]), 2 * math.pi)


def face_area(p: int, q: int = 3) -> float:
    """Area of one p-gon of the regular {p,q} tiling (curvature +-1)."""
    return abs(math.pi * (p - 2 - 2 * p / q))


def dual_face_area(p: int, q: int = 3) -> float:
    """Area of one q-gon of the dual {q,p} tiling, pi (q (p-2)/p - 2) in absolute value."""
    return abs(math.pi * (q * (p - 2) / p - 2))


def triangle_area(a: np.ndarray, b: np.ndarray, c: np.ndarray, geom: GeometryClass) -> float:
    """Area of a geodesic triangle from its angular excess (or defect)."""
    if geom is E:
        pa, pb, pc = (x[:2] / x[2] for x in (a, b, c))
        return 0.5 * abs((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    Q = np.eye(3) if geom is S else _J
    pts = [normalize(x, geom) for x in (a, b, c)]
    angles = []
    for i in range(3):
        p0, p1, p2 = pts[i], pts[(i + 1) % 3], pts[(i + 2) % 3]
        # tangent vectors at p0 towards p1 and p2
        t1 = p1 - (p0 @ Q @ p1) / (p0 @ Q @ p0) * p0
        t2 = p2 - (p0 @ Q @ p2) / (p0 @ Q @ p0) * p0
        cosang = (t1 @ Q @ t2) / math.sqrt((t1 @ Q @ t1) * (t2 @ Q @ t2))
        angles.append(math.acos(max(-1.0, min(1.0, cosang))))
    total = sum(angles)
    return total - math.pi if geom is S else math.pi - total
