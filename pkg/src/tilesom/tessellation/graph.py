"""Tile graphs and the combinatorial measurements on them."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from ..geometry import GeometryClass


class TessellationError(ValueError):
    """Invalid request for a tessellation (bad parameters, disconnected graph, ...)."""


@dataclass(frozen=True)
class Schlafli:
    p: int
    q: int = 3

    def __post_init__(self):
        if self.p < 3 or self.q < 3:
            raise TessellationError(f"{{{self.p},{self.q}}} is not a valid Schlafli symbol")

    @property
    def geometry(self) -> GeometryClass:
        return GeometryClass.of_schlafli(self.p, self.q)

    def __str__(self):
        return f"{{{self.p},{self.q}}}"


@dataclass(eq=False)
class TileGraph:
    """A finite tessellation.

    ``adjacency[t]`` lists the neighbours of tile ``t`` in cyclic order around
    it (a path rather than a cycle for boundary tiles of a disk).  ``sides``
    keeps the true polygon size, so for a disk ``sides[t] - len(adjacency[t])``
    counts neighbours outside the sample.
    """

    name: str
    adjacency: tuple
    sides: np.ndarray
    geometry: GeometryClass
    closed: bool
    orientable: bool | None
    euler_characteristic: int | None
    schlafli: Schlafli
    goldberg: tuple = (1, 0)
    center_tile: int = 0
    layout: object = field(default=None, repr=False)
    source: np.ndarray | None = field(default=None, repr=False)
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.adjacency)

    def __len__(self):
        return self.n

    @property
    def meta(self) -> dict:
        return {
            "name": self.name,
            "geometry": self.geometry.value,
            "closed": self.closed,
            "orientable": self.orientable,
            "euler_characteristic": self.euler_characteristic,
            "schlafli": (self.schlafli.p, self.schlafli.q),
            "goldberg": tuple(self.goldberg),
        }

    def edges(self) -> np.ndarray:
        out = [(t, u) for t, nb in enumerate(self.adjacency) for u in nb if t < u]
        return np.array(sorted(out), dtype=np.int64).reshape(-1, 2)

    @property
    def n_edges(self) -> int:
        return sum(len(nb) for nb in self.adjacency) // 2

    def degree(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.adjacency], dtype=np.int64)

    def sparse_adjacency(self):
        e = self.edges()
        n = self.n
        a = csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    def check(self) -> None:
        """Raise if the adjacency is asymmetric, has loops, or is disconnected."""
        for t, nb in enumerate(self.adjacency):
            if t in nb or len(set(nb)) != len(nb):
                raise TessellationError(f"tile {t} has a loop or repeated neighbour")
            for u in nb:
                if t not in self.adjacency[u]:
                    raise TessellationError(f"adjacency {t}-{u} is not symmetric")
            if self.closed and len(nb) != self.sides[t]:
                raise TessellationError(f"tile {t} has {len(nb)} neighbours but {self.sides[t]} sides")
        if connected_components(self.sparse_adjacency(), directed=False)[0] != 1:
            raise TessellationError("tile graph is disconnected")


def graph_distance_all(g: TileGraph) -> np.ndarray:
    """All-pairs hop distances as an int32 matrix."""
    d = shortest_path(g.sparse_adjacency(), unweighted=True, directed=False)
    if np.isinf(d).any():
        raise TessellationError("tile graph is disconnected")
    return d.astype(np.int32)


def hop_distances(g: TileGraph) -> np.ndarray:
    """graph_distance_all, memoized on the graph."""
    d = g.extra.get("dist_discrete_hops")
    if d is None:
        d = g.extra["dist_discrete_hops"] = graph_distance_all(g)
    return d


def diameter(g: TileGraph, dist: np.ndarray | None = None) -> int:
    return int((graph_distance_all(g) if dist is None else dist).max())


def bfs_distances(adjacency, source: int) -> np.ndarray:
    dist = np.full(len(adjacency), -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        t = queue.popleft()
        for u in adjacency[t]:
            if dist[u] < 0:
                dist[u] = dist[t] + 1
                queue.append(u)
    return dist


def discrete_curvature(g: TileGraph) -> float:
    """2q/(q-2) minus the mean neighbour count, counting neighbours outside a disk."""
    q = g.schlafli.q
    return 2 * q / (q - 2) - float(np.mean(g.sides))


def non_hexagon_counts(g: TileGraph) -> dict:
    vals, counts = np.unique(g.sides, return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts) if v != 6}


# ----------------------------------------------------------------- zig-zags
@dataclass(frozen=True)
class ZigZagLine:
    """A zig-zag line, stored as the tile adjacencies it crosses, in order."""

    id: int
    edges: tuple
    closed: bool


def _triangle_index(triangles):
    by_edge: dict = {}
    for tri in triangles:
        a, b, c = tri
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            by_edge.setdefault((min(x, y), max(x, y)), []).append(z)
    return by_edge


def trace_zigzags(triangles, keep_edge=None):
    """All zig-zag lines of a trivalent map given by its dual triangles.

    A line walks along polygon edges; in the dual, along tile pairs.  The
    state (k, o, c) means we are on the edge between tiles k and o, having
    arrived through the triangle (k, o, c).  The next triangle on {k, o} has
    third tile c2 and the walk continues on {c2, k}: the retained tile
    alternates, which is the alternating left/right turn.
    """
    by_edge = _triangle_index(triangles)
    for key, thirds in by_edge.items():
        if len(thirds) > 2:
            raise TessellationError(f"edge {key} lies on {len(thirds)} triangles; vertices are not trivalent")

    def other_third(k, o, c):
        thirds = by_edge[(min(k, o), max(k, o))]
        if len(thirds) < 2:
            return None
        return thirds[1] if thirds[0] == c else thirds[0]

    def reverse(s):
        c2 = other_third(*s)
        return None if c2 is None else (s[1], s[0], c2)

    def walk(state):
        states, s = [state], state
        while True:
            c2 = other_third(*s)
            if c2 is None:
                return states, False
            s = (c2, s[0], s[1])
            if s == state:
                return states, True
            states.append(s)

    visited = set()
    lines = []
    for (k, o), thirds in sorted(by_edge.items()):
        for c in thirds:
            for start in ((k, o, c), (o, k, c)):
                if start in visited:
                    continue
                states, closed = walk(start)
                if not closed:
                    rev = reverse(start)
                    back = walk(rev)[0][1:] if rev is not None else []
                    states = back[::-1] + states
                for s in states:
                    visited.add(s)
                    r = reverse(s)
                    if r is not None:
                        visited.add(r)
                edges = tuple((min(s[0], s[1]), max(s[0], s[1])) for s in states)
                if keep_edge is not None:
                    edges = tuple(e for e in edges if keep_edge(e))
                if edges:
                    lines.append((edges, closed))
    return lines


def zigzag_lines(g: TileGraph) -> list[ZigZagLine]:
    """Zig-zag lines crossing the tiles of a disk (or any trivalent tile graph)."""
    if g.layout is None:
        raise TessellationError("zig-zag lines need the dual triangulation of the tile graph")
    src = g.source
    local = {int(s): i for i, s in enumerate(src)}
    tris = [tuple(tiles) for tiles in g.layout.triangles]
    in_graph = set(local)
    degrees = {}
    for tri in tris:
        for t in tri:
            degrees[t] = degrees.get(t, 0) + 1
    for t in in_graph:
        if degrees.get(t, 0) > g.sides[local[t]]:
            raise TessellationError("non-trivalent vertex in tile graph")

    def keep(e):
        return e[0] in in_graph and e[1] in in_graph

    raw = trace_zigzags(tris, keep)
    out = []
    seen = set()
    for edges, closed in raw:
        loc = tuple((min(local[a], local[b]), max(local[a], local[b])) for a, b in edges)
        key = frozenset(loc)
        if key in seen:
            continue
        seen.add(key)
        out.append(ZigZagLine(len(out), loc, closed))
    return out


def split_by_lines(g: TileGraph, lines) -> tuple[int, np.ndarray]:
    """Connected components after removing every adjacency crossed by ``lines``."""
    cut = set()
    for line in lines:
        cut.update(line.edges)
    e = [(t, u) for t, u in g.edges() if (int(t), int(u)) not in cut]
    e = np.array(e, dtype=np.int64).reshape(-1, 2)
    a = csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(g.n, g.n))
    return connected_components(a, directed=False)


# ------------------------------------------------------------- translations
def hex_directions(g: TileGraph) -> np.ndarray:
    """Neighbour of every tile in each of the six lattice directions.

    Only defined for orientable all-hexagon closed graphs (hexagonal tori):
    directions are propagated from tile 0, direction d seen from the other
    side being d+3.  Raises when the labels cannot be made consistent.
    """
    if not g.closed or np.any(g.sides != 6):
        raise TessellationError(f"{g.name} is not a hexagonal torus")
    n = g.n
    nb = np.full((n, 6), -1, dtype=np.int64)
    adj = g.adjacency
    nb[0] = adj[0]
    queue = deque([0])
    done = np.zeros(n, dtype=bool)
    done[0] = True
    while queue:
        t = queue.popleft()
        for d in range(6):
            u = int(nb[t, d])
            cyc = adj[u]
            idx = cyc.index(t)
            w_plus = nb[t, (d + 1) % 6]
            if cyc[(idx - 1) % 6] == w_plus:
                sign = 1
            elif cyc[(idx + 1) % 6] == w_plus:
                sign = -1
            else:
                raise TessellationError(f"{g.name}: inconsistent hexagon corners at tiles {t}, {u}")
            row = np.array([cyc[(idx + sign * ((e - d - 3) % 6)) % 6] for e in range(6)])
            if done[u]:
                if not np.array_equal(nb[u], row):
                    raise TessellationError(f"{g.name} has no consistent lattice directions")
                continue
            nb[u] = row
            done[u] = True
            queue.append(u)
    return nb


def torus_translations(g: TileGraph) -> np.ndarray:
    """``T[i, x]``: image of tile x under the translation taking tile 0 to tile i."""
    nb = hex_directions(g)
    n = g.n
    order, parent, direction = [0], [-1], [-1]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    k = 0
    while k < len(order):
        t = order[k]
        for d in range(6):
            u = int(nb[t, d])
            if not seen[u]:
                seen[u] = True
                order.append(u)
                parent.append(t)
                direction.append(d)
        k += 1
    T = np.empty((n, n), dtype=np.int64)
    T[:, 0] = np.arange(n)
    for x, par, d in zip(order[1:], parent[1:], direction[1:]):
        T[:, x] = nb[T[:, par], d]
    # every translation must be an automorphism
    for d in range(6):
        if not np.array_equal(nb[T, d], T[:, nb[:, d]]):
            raise TessellationError(f"{g.name} is not translation invariant")
    return T
