"""Goldberg-Coxeter subdivision of trivalent maps.

Each vertex of a trivalent {p,3} map is a triangle of the dual {3,p}
triangulation.  Every such triangle gets a chart in the Eisenstein lattice
with corners 0, z and z*w, where z = a + b*w and w = exp(i*pi/3).  Lattice
points inside the closed charts become tiles; points on chart borders are
identified across triangles by the affine lattice maps fixed by the gluing.

Eisenstein integers are stored as integer pairs (x, y) meaning x + y*w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import E, GeometryClass, S, normalize
from .maps import FlagMap

UNITS = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]


class GoldbergError(ValueError):
    """Illegal Goldberg-Coxeter parameters for the given base."""


def emul(p, q):
    a, b = p
    c, d = q
    return (a * c - b * d, a * d + b * c + b * d)


def econj(p):
    return (p[0] + p[1], -p[1])


def enorm(p):
    return p[0] * p[0] + p[0] * p[1] + p[1] * p[1]


def eadd(p, q):
    return (p[0] + q[0], p[1] + q[1])


def esub(p, q):
    return (p[0] - q[0], p[1] - q[1])


def ediv(p, q):
    """Exact quotient p/q, or None when q does not divide p."""
    num = emul(p, econj(q))
    n = enorm(q)
    if num[0] % n or num[1] % n:
        return None
    return (num[0] // n, num[1] // n)


def ecross(p, q):
    """Sign-carrying cross product (proportional to Im(conj(p) q))."""
    return p[0] * q[1] - p[1] * q[0]


def to_complex(p):
    return complex(p[0] + 0.5 * p[1], p[1] * math.sqrt(3) / 2)


@dataclass(frozen=True)
class ChartMap:
    """w -> alpha*w + beta, or alpha*conj(w) + beta when ``flip``."""

    alpha: tuple
    beta: tuple
    flip: bool

    def __call__(self, w):
        return eadd(emul(self.alpha, econj(w) if self.flip else w), self.beta)

    def scaled(self, w3):
        """Apply to a point given in thirds of lattice units."""
        return eadd(emul(self.alpha, econj(w3) if self.flip else w3), (3 * self.beta[0], 3 * self.beta[1]))


def triangle_side_length(p: int, geom: GeometryClass) -> float:
    """Distance between adjacent face centers of the regular {p,3} tiling."""
    if geom is E:
        return 1.0
    c = math.cos(2 * math.pi / p)
    x = c / (1 - c)
    return math.acos(x) if geom is S else math.acosh(x)


def standard_triangle(p: int, geom: GeometryClass) -> np.ndarray:
    """Corners (rows) of the standard dual triangle: origin, +x axis, rotated by 2pi/p."""
    L = triangle_side_length(p, geom)
    ang = 2 * math.pi / p
    if geom is E:
        r = np.array([[0.0, 0.0, 1.0], [L, 0.0, 1.0], [L * math.cos(ang), L * math.sin(ang), 1.0]])
        return r
    if geom is S:
        s, c = math.sin(L), math.cos(L)
    else:
        s, c = math.sinh(L), math.cosh(L)
    return np.array([[0.0, 0.0, 1.0], [s, 0.0, c], [s * math.cos(ang), s * math.sin(ang), c]])


def reflect_point(x, a, b, geom: GeometryClass) -> np.ndarray:
    """Reflect homogeneous point x in the geodesic through a and b."""
    if geom is E:
        pa, pb, px = a[:2] / a[2], b[:2] / b[2], x[:2] / x[2]
        d = (pb - pa) / np.linalg.norm(pb - pa)
        v = px - pa
        r = pa + 2 * np.dot(v, d) * d - v
        return np.array([r[0], r[1], 1.0])
    q = np.diag([1.0, 1.0, -1.0]) if geom is not S else np.eye(3)
    n = q @ np.cross(a, b)
    return x - 2 * (x @ q @ n) / (n @ q @ n) * n


class Subdivision:
    """Result of the subdivision: tiles, adjacency, dual triangles and local geometry.

    Attributes of note:
      ``home_pos[t]``   tile position in the frame of its home chart triangle.
      ``small_tris``    list of (tiles, Z, centroid); ``Z[k]`` maps the home frame
                        of ``tiles[k]`` into the frame in which ``centroid`` lives.
    """

    def __init__(self, fm: FlagMap, a: int, b: int, p: int, geom: GeometryClass):
        if (a, b) == (0, 0) or a < 0 or b < 0:
            raise GoldbergError("Goldberg parameters must be nonnegative and not both zero")
        self.fm = fm
        self.a, self.b, self.p, self.geom = a, b, p, geom
        self.z = (a, b)
        self.corners = [(0, 0), self.z, emul(self.z, (0, 1))]
        self._inside_cache = {}
        self._bary_cache = {}
        self._build_triangles()
        self._build_charts()
        self._build_tiles()
        self._build_small_triangles()

    # ----- dual triangles ---------------------------------------------------
    def _build_triangles(self):
        fm = self.fm
        color = fm.orientation()
        tri_flags = []
        for orb in fm.vertex_orbits():
            if len(orb) != 6 or any(fm.r2[f] < 0 for f in orb):
                continue
            cands = sorted(orb) if color is None else sorted(f for f in orb if color[f] == 0)
            f0 = cands[0]
            seq = [f0]
            for k in range(5):
                g = fm.r1 if k % 2 == 0 else fm.r2
                seq.append(int(g[seq[-1]]))
            if int(fm.r2[seq[-1]]) != f0:
                raise GoldbergError("vertex orbit is not a 3-cycle")
            tri_flags.append(seq)
        self.tri_flags = np.array(tri_flags, dtype=np.int64).reshape(-1, 6)
        self.n_tri = len(tri_flags)
        self.tri_of_flag = np.full(fm.n_flags, -1)
        self.pos_of_flag = np.full(fm.n_flags, -1)
        for t, seq in enumerate(tri_flags):
            for k, f in enumerate(seq):
                self.tri_of_flag[f] = t
                self.pos_of_flag[f] = k
        self.tri_faces = np.array([[fm.face[s[0]], fm.face[s[2]], fm.face[s[4]]] for s in tri_flags],
                                  dtype=np.int64).reshape(-1, 3)

    def _build_charts(self):
        fm = self.fm
        V = standard_triangle(self.p, self.geom)
        self.V = V
        # neighbor across side s: flags (corner s, side s) and (corner s+1, side s)
        side_flags = {0: (1, 2), 1: (3, 4), 2: (5, 0)}
        self.nbr = np.full((self.n_tri, 3), -1)
        self.maps: list[list[ChartMap | None]] = [[None] * 3 for _ in range(self.n_tri)]
        self.trans = np.zeros((self.n_tri, 3, 3, 3))
        self.trans_inv = np.zeros((self.n_tri, 3, 3, 3))
        cache = {}
        for t in range(self.n_tri):
            seq = self.tri_flags[t]
            for s in range(3):
                i, j = side_flags[s]
                fc, fd = int(fm.r0[seq[i]]), int(fm.r0[seq[j]])
                t2 = self.tri_of_flag[fc]
                if t2 < 0:
                    continue
                c, d = i // 2, j // 2
                c2, d2 = self.pos_of_flag[fc] // 2, self.pos_of_flag[fd] // 2
                key = (c, d, int(c2), int(d2))
                if key not in cache:
                    e, e2 = 3 - c - d, 3 - c2 - d2
                    m = self._solve_map(c, d, e, c2, d2, e2)
                    A = np.column_stack([V[c2], V[d2], V[e2]])
                    B = np.column_stack([V[c], V[d], reflect_point(V[e], V[c], V[d], self.geom)])
                    T = B @ np.linalg.inv(A)
                    cache[key] = (m, T, np.linalg.inv(T))
                m, T, Tinv = cache[key]
                self.nbr[t, s] = t2
                self.maps[t][s] = m
                self.trans[t, s] = T
                self.trans_inv[t, s] = Tinv

    def _solve_map(self, c, d, e, c2, d2, e2) -> ChartMap:
        P, Q = self.corners, self.corners
        dq = esub(Q[d2], Q[c2])
        dp = esub(P[d], P[c])
        side_e2 = ecross(dq, esub(Q[e2], Q[c2]))
        alpha = ediv(dq, dp)
        if alpha is not None:
            m = ChartMap(alpha, esub(Q[c2], emul(alpha, P[c])), False)
            if ecross(dq, esub(m(P[e]), Q[c2])) * side_e2 < 0:
                return m
        alpha = ediv(dq, econj(dp))
        if alpha is None:
            raise GoldbergError(
                f"GC({self.a},{self.b}) is not compatible with an orientation-reversing gluing; "
                "use b=0 or b=a"
            )
        m = ChartMap(alpha, esub(Q[c2], emul(alpha, econj(P[c]))), True)
        if ecross(dq, esub(m(P[e]), Q[c2])) * side_e2 >= 0:
            raise GoldbergError("inconsistent chart gluing")
        return m

    # ----- lattice helpers --------------------------------------------------
    def inside(self, w, scale=1):
        """Closed-triangle test; ``w`` in units of 1/scale."""
        key = (w, scale)
        hit = self._inside_cache.get(key)
        if hit is not None:
            return hit
        hit = self._inside(w, scale)
        self._inside_cache[key] = hit
        return hit

    def _inside(self, w, scale):
        P = [(c[0] * scale, c[1] * scale) for c in self.corners]
        for k in range(3):
            if ecross(esub(P[(k + 1) % 3], P[k]), esub(w, P[k])) < 0:
                return False
        return True

    def on_side(self, w, scale=1):
        P = [(c[0] * scale, c[1] * scale) for c in self.corners]
        return [k for k in range(3) if ecross(esub(P[(k + 1) % 3], P[k]), esub(w, P[k])) == 0]

    def lattice_points(self):
        a, b = self.a, self.b
        pts = []
        for x in range(-b, a + 1):
            for y in range(0, a + b + 1):
                if self.inside((x, y)):
                    pts.append((x, y))
        return pts

    def locate(self, t, w):
        """Find a chart containing lattice point ``w`` given relative to triangle ``t``.

        Returns (triangle, point, side) where side is -1 when ``w`` is in ``t``.
        """
        if self.inside(w):
            return t, w, -1
        for s in range(3):
            t2 = self.nbr[t, s]
            if t2 < 0:
                continue
            w2 = self.maps[t][s](w)
            if self.inside(w2):
                return t2, w2, s
        return None

    def bary_position(self, w, scale=1):
        key = (w, scale)
        if key not in self._bary_cache:
            self._bary_cache[key] = self._bary_position(w, scale)
        return self._bary_cache[key]

    def _bary_position(self, w, scale):
        u = to_complex(w) / (scale * to_complex(self.z))
        b2 = u.imag / (math.sqrt(3) / 2)
        b1 = u.real - 0.5 * b2
        b0 = 1.0 - b1 - b2
        v = b0 * self.V[0] + b1 * self.V[1] + b2 * self.V[2]
        return normalize(v, self.geom)

    # ----- tiles --------------------------------------------------------------
    def _build_tiles(self):
        pts = self.lattice_points()
        self.chart_points = pts
        index = {}
        occ = []
        for t in range(self.n_tri):
            for w in pts:
                index[(t, w)] = len(occ)
                occ.append((t, w))
        parent = list(range(len(occ)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        # identification edges with transition: frame(o2) -> frame(o1)
        links = [[] for _ in occ]
        for o, (t, w) in enumerate(occ):
            for s in self.on_side(w):
                t2 = self.nbr[t, s]
                if t2 < 0:
                    continue
                o2 = index[(t2, self.maps[t][s](w))]
                links[o].append((o2, self.trans[t, s]))
                ra, rb = find(o), find(o2)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        roots = sorted({find(o) for o in range(len(occ))})
        tile_of_root = {r: i for i, r in enumerate(roots)}
        self.n = len(roots)
        self.tile_of_occ = np.array([tile_of_root[find(o)] for o in range(len(occ))])
        self.occ = occ
        self.occ_index = index
        # frames: W[o] maps the frame of occurrence o into its tile's home frame
        W = [None] * len(occ)
        self.home = [None] * self.n
        for r in roots:
            W[r] = np.eye(3)
            self.home[tile_of_root[r]] = occ[r]
            stack = [r]
            while stack:
                x = stack.pop()
                for y, M in links[x]:
                    if W[y] is None:
                        W[y] = W[x] @ M
                        stack.append(y)
        self.W = W
        self.W_inv = [np.linalg.inv(m) for m in W]
        self.home_pos = np.array([self.bary_position(w) for (_, w) in self.home])
        corner_face = np.full(self.n, -1)
        for t in range(self.n_tri):
            for k, c in enumerate(self.corners):
                corner_face[self.tile_of_occ[index[(t, c)]]] = self.tri_faces[t, k]
        self.corner_face = corner_face
        # tiles sitting at the vertices of the base map (triangle centroids)
        cen = emul(self.z, (1, 1))
        self.vertex_tile = np.full(self.n_tri, -1)
        if cen[0] % 3 == 0 and cen[1] % 3 == 0:
            w = (cen[0] // 3, cen[1] // 3)
            for t in range(self.n_tri):
                self.vertex_tile[t] = self.tile_of_occ[index[(t, w)]]
        self.sides = np.where(corner_face >= 0, self.fm.sides[np.maximum(corner_face, 0)], 6)

    # ----- small triangles and edges -----------------------------------------
    def _build_small_triangles(self):
        a, b = self.a, self.b
        cand = []
        for x in range(-b - 1, a + 2):
            for y in range(-1, a + b + 2):
                cand.append(((x, y), (x + 1, y), (x, y + 1)))
                cand.append(((x, y), (x, y + 1), (x - 1, y + 1)))
        small = []
        self.small_inv = []
        seen = set()
        for t in range(self.n_tri):
            for tri in cand:
                c3 = (sum(v[0] for v in tri), sum(v[1] for v in tri))
                if not self.inside(c3, 3):
                    continue
                sides = self.on_side(c3, 3)
                dup = False
                for s in sides:
                    t2 = self.nbr[t, s]
                    if t2 >= 0 and (t2, self.maps[t][s].scaled(c3)) < (t, c3):
                        dup = True
                if dup:
                    continue
                tiles, Z, Zinv = [], [], []
                ok = True
                for v in tri:
                    loc = self.locate(t, v)
                    if loc is None:
                        ok = False
                        break
                    t2, w2, s = loc
                    o = self.occ_index[(t2, w2)]
                    tiles.append(int(self.tile_of_occ[o]))
                    if s < 0:
                        Z.append(self.W_inv[o])
                        Zinv.append(self.W[o])
                    else:
                        Z.append(self.trans[t, s] @ self.W_inv[o])
                        Zinv.append(self.W[o] @ self.trans_inv[t, s])
                if not ok:
                    continue
                key = (t, c3)
                if key in seen:
                    continue
                seen.add(key)
                small.append((tuple(tiles), np.array(Z), self.bary_position(c3, 3)))
                self.small_inv.append(np.array(Zinv))
        self.small_tris = small
        edges = set()
        for tiles, _, _ in small:
            for i in range(3):
                u, v = tiles[i], tiles[(i + 1) % 3]
                if u != v:
                    edges.add((min(u, v), max(u, v)))
        self.edges = sorted(edges)

    def transitions(self):
        """Directed edge transitions: G[(t,u)] maps u's home frame into t's home frame."""
        G = {}
        for (tiles, Z, _), Zinv in zip(self.small_tris, self.small_inv):
            for i in range(3):
                for j in range(3):
                    if i != j and (tiles[i], tiles[j]) not in G:
                        G[(tiles[i], tiles[j])] = Zinv[i] @ Z[j]
        return G
