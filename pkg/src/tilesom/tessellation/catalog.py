"""Named manifolds and the builders behind them."""

from __future__ import annotations

import hashlib
import json
import math
import os
import pickle
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from ..geometry import S, distance_array
from .base import hex_torus_polygons, patch_polygons, platonic_table
from .goldberg import GoldbergError, Subdivision
from .graph import Schlafli, TessellationError, TileGraph, bfs_distances
from .layout import Layout, neighbor_angles
from .maps import FlagMap, GluingError, GluingTable, table_from_polygons

DATA = resources.files("tilesom") / "data"


def tile_count_formula(u: int, p: int, a: int, b: int) -> int:
    """n = u + (A-1)/2 * t with t = p*u/3 dual triangles and A = ((2a+b)^2 + 3b^2)/4."""
    A = ((2 * a + b) ** 2 + 3 * b * b) // 4
    t = p * u // 3
    return u + (A - 1) * t // 2


def _cyclic_neighbors(n: int, triangles) -> list[tuple]:
    """Neighbour lists in cyclic order, chained through the dual triangles."""
    pairs = [dict() for _ in range(n)]
    for tri in triangles:
        for k in range(3):
            t, u, v = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
            pairs[t].setdefault(u, []).append(v)
            pairs[t].setdefault(v, []).append(u)
    out = []
    for t in range(n):
        link = pairs[t]
        if not link:
            out.append(())
            continue
        # a boundary tile has a path; start at one of its ends
        ends = sorted(u for u, vs in link.items() if len(vs) == 1)
        start = ends[0] if ends else min(link)
        order, prev, cur = [start], None, start
        while True:
            nxt = [v for v in link[cur] if v != prev]
            if not nxt or nxt[0] == start:
                break
            prev, cur = cur, nxt[0]
            order.append(cur)
        out.append(tuple(order))
    return out


def _graph_from_subdivision(sd: Subdivision, name: str, schlafli: Schlafli, closed: bool,
                            orientable, chi, goldberg) -> TileGraph:
    layout = Layout.from_subdivision(sd)
    adjacency = _cyclic_neighbors(sd.n, layout.triangles)
    return TileGraph(
        name=name,
        adjacency=tuple(adjacency),
        sides=np.asarray(sd.sides, dtype=np.int64),
        geometry=schlafli.geometry,
        closed=closed,
        orientable=orientable,
        euler_characteristic=chi,
        schlafli=schlafli,
        goldberg=tuple(goldberg),
        layout=layout,
        source=np.arange(sd.n),
        extra={"subdivision": sd, "base_face": sd.corner_face.copy(), "vertex_tiles": sd.vertex_tile.copy()},
    )


def build_base(s: Schlafli, extent: int = 3) -> TileGraph:
    """The regular {p,3} tiling: the platonic solid, or a patch of ``extent`` face rings."""
    if s.q != 3:
        raise TessellationError(f"{s}: only trivalent tilings are supported")
    if s.geometry is S:
        return build_quotient(platonic_table(s.p), (1, 0), name=f"{{{s.p},3}}", schlafli=s)
    return _build_patch(s, (1, 0), extent)


def _build_patch(s: Schlafli, goldberg, radius: int) -> TileGraph:
    polygons, _, _ = patch_polygons(s.p, radius)
    table = table_from_polygons(polygons, closed=False)
    fm = FlagMap.from_table(table)
    fm.check_trivalent()
    sd = Subdivision(fm, *goldberg, s.p, s.geometry)
    g = _graph_from_subdivision(sd, f"patch{s}", s, False, True, None, goldberg)
    g.extra["base_table"] = table
    g.center_tile = int(np.flatnonzero(sd.corner_face == 0)[0])
    return g


def goldberg_coxeter(base: TileGraph, a: int, b: int) -> TileGraph:
    """Apply GC(a,b) to a regular base graph (one built with GC(1,0))."""
    if tuple(base.goldberg) != (1, 0) or "subdivision" not in base.extra:
        raise TessellationError("Goldberg-Coxeter needs a regular base graph")
    fm = base.extra["subdivision"].fm
    sd = Subdivision(fm, a, b, base.schlafli.p, base.geometry)
    g = _graph_from_subdivision(sd, f"{base.name}-gc{a}{b}", base.schlafli, base.closed,
                                base.orientable, base.euler_characteristic, (a, b))
    if not base.closed:
        g.center_tile = int(np.flatnonzero(sd.corner_face == 0)[0])
    g.extra.update({k: v for k, v in base.extra.items() if k in ("base_table", "periods")})
    return g


def build_quotient(table: GluingTable, goldberg=(1, 0), name: str = "quotient",
                   schlafli: Schlafli | None = None) -> TileGraph:
    """Closed surface glued from ``table``, subdivided by GC(a,b)."""
    fm = FlagMap.from_table(table)
    fm.require_closed()
    fm.check_trivalent()
    sides = set(int(x) for x in fm.sides)
    if schlafli is None:
        if len(sides) != 1:
            raise GluingError("mixed polygon sizes need an explicit Schlafli symbol")
        schlafli = Schlafli(sides.pop())
    chi = fm.euler_characteristic()
    orientable = fm.orientable
    declared = table.meta.get("euler_characteristic")
    if declared is not None and int(declared) != chi:
        raise GluingError(f"table declares chi={declared} but the gluing has chi={chi}")
    sd = Subdivision(fm, *goldberg, schlafli.p, schlafli.geometry)
    g = _graph_from_subdivision(sd, name, schlafli, True, orientable, chi, goldberg)
    g.extra["base_table"] = table
    return g


def _spiral_order(g: TileGraph, centers: np.ndarray, max_hops: int | None = None) -> np.ndarray:
    """Breadth-first order from the center tile, visiting each tile's
    neighbours counterclockwise starting after its parent (the center tile
    starts from the direction of the positive x axis).  With ``max_hops``
    only tiles up to that distance are ordered."""
    n = g.n
    c = g.center_tile
    order = [c]
    parent = {c: None}
    hops = {c: 0}
    i = 0
    while i < len(order):
        t = order[i]
        i += 1
        nb = list(g.adjacency[t])
        if not nb or (max_hops is not None and hops[t] >= max_hops):
            continue
        ang = neighbor_angles(g.geometry, centers[t], centers[nb])
        if parent[t] is None:
            base = 0.0
        else:
            base = neighbor_angles(g.geometry, centers[t], centers[[parent[t]]])[0] + 1e-9
        rank = np.mod(ang - base, 2 * math.pi)
        for k in np.argsort(rank, kind="stable"):
            u = nb[k]
            if u not in parent:
                parent[u] = t
                hops[u] = hops[t] + 1
                order.append(u)
    if max_hops is None and len(order) != n:
        raise TessellationError("patch is disconnected")
    return np.array(order)


def _circumradius(patch: TileGraph, centers: np.ndarray, tiles) -> np.ndarray:
    """Largest center-to-corner distance of the given tiles of a patch."""
    frames = patch.extra["frames"]
    lay = patch.layout
    out = np.zeros(len(tiles))
    where = {int(t): i for i, t in enumerate(tiles)}
    for tri, corner in zip(lay.triangles, lay.corners):
        for k, t in enumerate(tri):
            i = where.get(int(t))
            if i is not None:
                v = frames[t] @ corner[k]
                out[i] = max(out[i], float(distance_array(v, centers[t], patch.geometry)))
    return out


def build_disk(s: Schlafli, goldberg=(1, 0), n: int = 520, name: str | None = None) -> TileGraph:
    """The ``n`` tiles whose centers are closest to the center of a central tile.

    Ties at equal distance are broken by spiral order (breadth-first,
    counterclockwise).
    """
    if n < 1:
        raise TessellationError("a disk needs at least one tile")
    if s.geometry is S:
        raise TessellationError("disks are only built for Euclidean and hyperbolic tilings")
    from .layout import tile_centers

    a, b = goldberg
    A = ((2 * a + b) ** 2 + 3 * b * b) / 4
    radius = 1
    while True:
        polygons, _, _ = patch_polygons(s.p, radius)
        if len(polygons) * (1 + (A - 1) * s.p / 6) >= n:
            break
        radius += 1
    radius += 1
    while True:
        patch = _build_patch(s, goldberg, radius)
        if patch.n >= n:
            counts = np.zeros(patch.n, dtype=np.int64)
            for tri in patch.layout.triangles:
                for t in tri:
                    counts[t] += 1
            complete = counts == patch.sides
            centers = tile_centers(patch)
            geo = np.round(distance_array(centers, centers[patch.center_tile], s.geometry), 9)
            cut = np.sort(geo)[n - 1]
            dist = bfs_distances(patch.adjacency, patch.center_tile)
            spiral = np.full(patch.n, patch.n, dtype=np.int64)
            ordered = _spiral_order(patch, centers, max_hops=int(dist[geo <= cut].max()))
            spiral[ordered] = np.arange(len(ordered))
            chosen = np.lexsort((spiral, geo))[:n]
            # margin: selected tiles are complete, and a tile outside the patch is
            # no closer than the nearest point of an incomplete tile
            if complete[chosen].all():
                far = np.flatnonzero(~complete)
                if len(far) == 0 or (geo[far] - _circumradius(patch, centers, far)).min() > cut:
                    break
        if patch.n > 200 * n + 20000:
            raise TessellationError("disk is too large to build")
        radius += 1
    local = {int(t): i for i, t in enumerate(chosen)}
    adjacency = tuple(tuple(local[u] for u in patch.adjacency[t] if u in local) for t in chosen)
    g = TileGraph(
        name=name or f"disk{s}-gc{a}{b}-{n}",
        adjacency=adjacency,
        sides=patch.sides[chosen].copy(),
        geometry=s.geometry,
        closed=False,
        orientable=True,
        euler_characteristic=None,
        schlafli=s,
        goldberg=(a, b),
        center_tile=0,
        layout=patch.layout,
        source=chosen.copy(),
        extra={"patch": patch},
    )
    return g


# -------------------------------------------------------------------- registry
@lru_cache(maxsize=1)
def manifest() -> dict:
    return json.loads((DATA / "manifest.json").read_text())


def manifold_names() -> list[str]:
    return list(manifest()["manifolds"])


def _torus_cells(g: TileGraph, entry: dict) -> None:
    u, v = entry["periods"]
    _, cells, _, _ = hex_torus_polygons(u, v, klein=entry.get("klein", False))
    sd = g.extra["subdivision"]
    # tile -> axial lattice cell, for GC(1,0) tori the tiles are the base faces
    if tuple(g.goldberg) == (1, 0):
        g.extra["cells"] = np.array([cells[f] for f in sd.corner_face], dtype=np.int64)
    g.extra["periods"] = (tuple(u), tuple(v))
    g.extra["klein"] = bool(entry.get("klein", False))


CACHE_FORMAT = 2


def cache_dir() -> Path:
    """Directory for cached artifacts (``TILESOM_CACHE_DIR`` overrides)."""
    env = os.environ.get("TILESOM_CACHE_DIR")
    return Path(env) if env else Path.home() / ".cache" / "tilesom"


def build(name: str, density: int = 1, use_cache: bool = True) -> TileGraph:
    """Build a named manifold; ``density=2`` doubles the Goldberg parameters
    (and quadruples the sample size of disks).

    Built graphs are memoized in memory and, with ``use_cache``, pickled to
    the cache directory keyed by the manifest entry and gluing-table text.
    """
    if not use_cache:
        return _build_uncached(name, density)
    return _build_cached(name, density)


def _cache_key(name: str, density: int) -> str:
    e = manifest()["manifolds"][name]
    h = hashlib.sha256(json.dumps([CACHE_FORMAT, name, density, e], sort_keys=True).encode())
    if "table" in e:
        h.update((DATA / e["table"]).read_bytes())
    return h.hexdigest()[:20]


@lru_cache(maxsize=32)
def _build_cached(name: str, density: int) -> TileGraph:
    if name not in manifest()["manifolds"]:
        raise TessellationError(f"unknown manifold {name!r}; known: {', '.join(manifold_names())}")
    path = cache_dir() / "manifolds" / f"{name}-x{density}-{_cache_key(name, density)}.pkl"
    if path.exists():
        try:
            with open(path, "rb") as fh:
                return pickle.load(fh)
        except (OSError, pickle.UnpicklingError, EOFError, AttributeError):
            pass
    g = _build_uncached(name, density)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        with open(tmp, "wb") as fh:
            pickle.dump(g, fh, protocol=pickle.HIGHEST_PROTOCOL)
        os.replace(tmp, path)
    except OSError:
        pass
    return g


def _build_uncached(name: str, density: int) -> TileGraph:
    entries = manifest()["manifolds"]
    if name not in entries:
        raise TessellationError(f"unknown manifold {name!r}; known: {', '.join(entries)}")
    if density not in (1, 2):
        raise TessellationError("density must be 1 or 2")
    e = entries[name]
    a, b = e["goldberg"]
    gc = (a * density, b * density)
    s = Schlafli(e["p"], 3)
    if e["kind"] == "disk":
        g = build_disk(s, gc, e["n"] * density * density, name=name)
    else:
        table = GluingTable.read(DATA / e["table"])
        try:
            g = build_quotient(table, gc, name=name, schlafli=s)
        except GoldbergError as exc:
            raise TessellationError(f"{name}: {exc}") from exc
        if "periods" in e:
            _torus_cells(g, e)
    g.extra["manifest"] = e
    # drop construction scaffolding that is not needed downstream
    g.extra.pop("subdivision", None)
    g.extra.pop("patch", None)
    return g


# --------------------------------------------------------------------- census
CENSUS_FIELDS = ("n", "edges", "diameter", "curvature", "euler_characteristic", "orientable")
CURVATURE_TOLERANCE = 1e-6


def census(g: TileGraph) -> dict:
    """Tile and edge counts, diameter, discrete curvature and topology of g."""
    from .graph import discrete_curvature, hop_distances, non_hexagon_counts

    return {
        "n": g.n,
        "edges": g.n_edges,
        "diameter": int(hop_distances(g).max()),
        "curvature": discrete_curvature(g),
        "euler_characteristic": g.euler_characteristic,
        "orientable": g.orientable,
        "non_hexagons": non_hexagon_counts(g),
    }


def reference_mismatches(name: str, g: TileGraph | None = None, enforced_only: bool = False) -> list[tuple]:
    """(field, constructed, reference, enforced) for every census value that
    differs from the manifest entry of ``name`` (density 1)."""
    ref = manifest()["manifolds"][name]
    got = census(g if g is not None else build(name))
    loose = set(ref.get("informational", ()))
    out = []
    for key in CENSUS_FIELDS:
        if key == "curvature":
            bad = abs(got[key] - ref[key]) > CURVATURE_TOLERANCE
        else:
            bad = got[key] != ref[key]
        if bad and not (enforced_only and key in loose):
            out.append((key, got[key], ref[key], key not in loose))
    return out
