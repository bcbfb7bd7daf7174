"""Synthetic datasets: one sample per tile of an original manifold O."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import S
from .som import Dataset, SomError
from .tessellation.graph import (TessellationError, TileGraph, hop_distances, hex_directions,
                                 zigzag_lines)
from .tessellation.layout import tile_centers


class DatagenError(ValueError):
    """Unsupported manifold or parameters for an embedding method."""


METHODS = ("natural", "signpost", "landscape_random", "landscape_deterministic")
DEFAULT_LANDSCAPE_DIM = 60


@dataclass(eq=False)
class ManifoldDataset(Dataset):
    """A Dataset with sample t taken from tile t of ``origin_graph``."""

    origin_graph: TileGraph | None = field(default=None, repr=False)
    method: str = "natural"
    method_params: dict = field(default_factory=dict)


def _wrap(O: TileGraph, x: np.ndarray, method: str, **params) -> ManifoldDataset:
    return ManifoldDataset(x, source_tile=np.arange(O.n), origin_graph=O, method=method, method_params=params)


# ---------------------------------------------------------- natural embedding
_UNITS = np.array([(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)], dtype=np.int64)


def _axial_length(v) -> float:
    x, y = float(v[0]), float(v[1])
    return math.sqrt(x * x + x * y + y * y)


def lattice_coordinates(g: TileGraph):
    """Axial lattice coordinates of a hexagonal torus (tile 0 at the origin)
    and a basis of its period lattice."""
    nb = hex_directions(g)
    coords = np.zeros((g.n, 2), dtype=np.int64)
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        t = queue.popleft()
        for d in range(6):
            u = nb[t, d]
            if not seen[u]:
                seen[u] = True
                coords[u] = coords[t] + _UNITS[d]
                queue.append(u)
    jumps = coords[:, None, :] + _UNITS[None, :, :] - coords[nb]
    basis = _lattice_basis({tuple(int(a) for a in v) for v in jumps.reshape(-1, 2)})
    if abs(_det(*basis)) != g.n:
        raise DatagenError(f"{g.name}: period lattice does not match the tile count")
    return coords, basis


def _det(u, v) -> int:
    return u[0] * v[1] - u[1] * v[0]


def _lattice_basis(vectors):
    """Basis of the 2-D integer lattice generated by ``vectors`` (echelon form)."""
    vecs = [v for v in vectors if v != (0, 0)]
    while sum(1 for v in vecs if v[0] != 0) > 1:
        k = min((i for i, v in enumerate(vecs) if v[0] != 0), key=lambda i: abs(vecs[i][0]))
        piv = vecs[k]
        out = [piv]
        for i, v in enumerate(vecs):
            if i == k:
                continue
            if v[0] != 0:
                q = v[0] // piv[0]
                v = (v[0] - q * piv[0], v[1] - q * piv[1])
            if v != (0, 0):
                out.append(v)
        vecs = out
    first = [v for v in vecs if v[0] != 0]
    g = 0
    for v in vecs:
        if v[0] == 0:
            g = math.gcd(g, abs(v[1]))
    if len(first) != 1 or g == 0:
        raise DatagenError("period lattice is degenerate")
    return first[0], (0, g)


def _in_lattice(w, basis) -> bool:
    u, v = basis
    det = _det(u, v)
    a = _det(w, v)
    b = _det(u, w)
    return a % det == 0 and b % det == 0


def _hex_symmetries():
    def rot(w):
        return (-w[1], w[0] + w[1])

    def mirror(w):
        return (w[1], w[0])

    out = []
    for flip in (False, True):
        for k in range(6):
            def f(w, k=k, flip=flip):
                if flip:
                    w = mirror(w)
                for _ in range(k):
                    w = rot(w)
                return w
            out.append(f)
    return out


def _torus_frame(g: TileGraph, coords, basis):
    """Period vectors (u, v) of the fundamental domain in the graph's own frame.

    Uses the periods recorded for named tori (scaled by the Goldberg factor),
    matched to the lattice up to a symmetry of the hexagonal grid; otherwise a
    reduced basis of the period lattice.
    """
    entry = g.extra.get("manifest", {})
    periods = entry.get("periods")
    if periods is not None:
        scale = int(g.goldberg[0]) // int(entry["goldberg"][0]) if g.goldberg[1] == 0 else 0
        if scale >= 1:
            u0 = (periods[0][0] * scale, periods[0][1] * scale)
            v0 = (periods[1][0] * scale, periods[1][1] * scale)
            for f in _hex_symmetries():
                u, v = f(u0), f(v0)
                if abs(_det(u, v)) == g.n and _in_lattice(u, basis) and _in_lattice(v, basis):
                    return u, v
    u, v = basis
    # Lagrange reduction (shortest basis)
    while True:
        if _axial_length(u) > _axial_length(v):
            u, v = v, u
        best = v
        for q in range(-50, 51):
            w = (v[0] - q * u[0], v[1] - q * u[1])
            if _axial_length(w) < _axial_length(best) - 1e-12:
                best = w
        if best == v:
            return u, v
        v = best


def natural_embedding(O: TileGraph) -> ManifoldDataset:
    """Sphere: tile centers on the unit sphere.  Tori: products of circles
    with radius (loop length in tiles)/2pi; hexagonal tori use three circles,
    one per lattice axis."""
    if O.closed and O.geometry is S and O.euler_characteristic == 2:
        x = np.array(tile_centers(O), dtype=float)
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        return _wrap(O, x, "natural", kind="sphere")
    try:
        coords, basis = lattice_coordinates(O)
    except TessellationError as exc:
        raise DatagenError(f"{O.name} has no natural embedding (sphere or torus expected)") from exc
    u, v = _torus_frame(O, coords, basis)
    det = _det(u, v)
    # real coefficients: coords = alpha u + beta v
    alpha = (coords[:, 0] * v[1] - coords[:, 1] * v[0]) / det
    beta = (u[0] * coords[:, 1] - u[1] * coords[:, 0]) / det
    Ru, Rv = _axial_length(u) / (2 * math.pi), _axial_length(v) / (2 * math.pi)
    L = _axial_length(u)
    sixty = abs(_axial_length(v) - L) < 1e-9 and abs(_axial_length((u[0] - v[0], u[1] - v[1])) - L) < 1e-9
    dim = O.extra.get("manifest", {}).get("dimension")
    three = dim == 6 if dim is not None else sixty
    if three and not sixty:
        raise DatagenError(f"{O.name}: three-circle embedding needs a 60-degree period basis")
    phases = [alpha, beta] + ([alpha + beta] if three else [])
    radii = [Ru, Rv] + ([Ru] if three else [])
    cols = []
    for ph, r in zip(phases, radii):
        cols += [r * np.cos(2 * math.pi * ph), r * np.sin(2 * math.pi * ph)]
    return _wrap(O, np.stack(cols, axis=1), "natural", kind="torus", periods=[list(u), list(v)])


# --------------------------------------------------------- signpost embedding
def signpost_tiles(O: TileGraph, strategy: str = "auto") -> np.ndarray:
    """Signpost tiles: non-hexagons; a regular grid for the Klein bottle;
    non-hexagons plus the tiles at the base-map vertices for Bolza-like maps."""
    entry = O.extra.get("manifest", {})
    if strategy == "auto":
        strategy = entry.get("signposts", "default")
    if strategy == "default":
        return np.flatnonzero(O.sides != 6)
    if strategy == "base_vertices":
        vt = np.asarray(O.extra.get("vertex_tiles", []), dtype=np.int64)
        vt = np.unique(vt[vt >= 0])
        if len(vt) == 0:
            raise DatagenError(f"{O.name}: no tiles sit at the base-map vertices for this Goldberg parameter")
        return np.union1d(np.flatnonzero(O.sides != 6), vt)
    if strategy == "grid":
        cells = O.extra.get("cells")
        if cells is None:
            raise DatagenError(f"{O.name}: grid signposts need lattice cells")
        rows, cols = entry.get("grid", (13, 4))
        (W, _), (_, H) = O.extra["periods"]
        index = {(int(x), int(y)): t for t, (x, y) in enumerate(cells)}
        out = []
        for r in range(rows):
            y = r * (H // rows)
            for c in range(cols):
                # columns aligned in the plane: axial x shifts by half a tile per row
                x = (c * (W // cols) - y // 2) % W
                out.append(index[(x, y)])
        return np.array(sorted(set(out)), dtype=np.int64)
    raise DatagenError(f"unknown signpost strategy {strategy!r}")


def signpost_embedding(O: TileGraph, strategy: str = "auto") -> ManifoldDataset:
    """m(t) = hop distances from t to each signpost."""
    if not O.closed:
        raise DatagenError("signpost embedding needs a closed manifold")
    posts = signpost_tiles(O, strategy)
    if len(posts) < 2:
        raise DatagenError(f"{O.name}: fewer than 2 signposts available")
    d = hop_distances(O)[:, posts].astype(float)
    return _wrap(O, d, "signpost", strategy=strategy, signposts=[int(t) for t in posts])


# -------------------------------------------------------- landscape embedding
def separation_matrix(O: TileGraph, lines=None) -> np.ndarray:
    """S[t, l] = 1 when line l separates tile t from the central tile."""
    if O.closed:
        raise DatagenError("landscape embedding needs a disk")
    if lines is None:
        lines = zigzag_lines(O)
    out = np.zeros((O.n, len(lines)), dtype=np.int8)
    c = O.center_tile
    edges = O.edges()
    index = {(int(t), int(u)): k for k, (t, u) in enumerate(edges)}
    for k, line in enumerate(lines):
        keep = np.ones(len(edges), dtype=bool)
        keep[[index[e] for e in line.edges]] = False
        e = edges[keep]
        a = csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(O.n, O.n))
        _, labels = connected_components(a, directed=False)
        out[:, k] = labels != labels[c]
    return out


def landscape_embedding(O: TileGraph, d: int | None = DEFAULT_LANDSCAPE_DIM, seed: int = 0,
                        deterministic: bool = False, lines=None) -> ManifoldDataset:
    """m(t) = sum of v_l over the zig-zag lines l separating t from the center.

    Random mode draws v_l with standard normal coordinates in R^d;
    deterministic mode uses a distinct unit vector per line (d = |L|).
    """
    if O.closed:
        raise DatagenError("landscape embedding needs a disk")
    if lines is None:
        lines = zigzag_lines(O)
    sep = separation_matrix(O, lines).astype(float)
    if deterministic:
        if d is not None and d != len(lines):
            raise DatagenError(f"deterministic landscape has dimension {len(lines)} (one per line), not {d}")
        return _wrap(O, sep, "landscape_deterministic", d=len(lines))
    if d is None or d < 1:
        raise DatagenError("landscape dimension must be at least 1")
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((len(lines), d))
    return _wrap(O, sep @ vecs, "landscape_random", d=d, seed=seed)


def embed(O: TileGraph, method: str | None = None, seed: int = 0, dim: int | None = None) -> ManifoldDataset:
    """Dataset for O by ``method`` (default: the method recorded for named manifolds,
    else natural/signpost/landscape by kind)."""
    if method is None:
        method = O.extra.get("manifest", {}).get("embedding")
        if method is None:
            method = "landscape" if not O.closed else "signpost"
    if method == "natural":
        return natural_embedding(O)
    if method == "signpost":
        return signpost_embedding(O)
    if method in ("landscape", "landscape_random"):
        return landscape_embedding(O, dim or DEFAULT_LANDSCAPE_DIM, seed)
    if method == "landscape_deterministic":
        return landscape_embedding(O, None, deterministic=True)
    raise DatagenError(f"unknown embedding method {method!r}")


# ------------------------------------------------------------------------ CSV
def write_csv(data: Dataset, path) -> None:
    """One row per sample: ``tile_id`` then the coordinates (and ``label`` if any)."""
    k = data.k
    names = data.columns if data.columns and len(data.columns) == k else [f"x{i}" for i in range(k)]
    tiles = data.source_tile if data.source_tile is not None else np.arange(len(data))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tile_id", *names] + (["label"] if data.labels is not None else []))
        for i, row in enumerate(data.samples):
            extra = [data.labels[i]] if data.labels is not None else []
            w.writerow([int(tiles[i]), *(repr(float(v)) for v in row), *extra])


def read_csv(path, label_column: str | None = None) -> Dataset:
    """Generic CSV: a header row, numeric columns, an optional label column
    (named ``label_column``, or the single non-numeric column) and an optional
    ``tile_id`` column."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise SomError(f"{path}: expected a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if any(len(r) != len(header) for r in body):
        raise SomError(f"{path}: ragged rows")

    def numeric(col):
        try:
            for r in body:
                float(r[col])
            return True
        except ValueError:
            return False

    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise SomError(f"{path}: no column {label_column!r}")
        label_idx = header.index(label_column)
    else:
        text_cols = [i for i in range(len(header)) if not numeric(i)]
        if len(text_cols) > 1:
            raise SomError(f"{path}: more than one non-numeric column: {[header[i] for i in text_cols]}")
        label_idx = text_cols[0] if text_cols else (header.index("label") if "label" in header else None)
    tile_idx = header.index("tile_id") if "tile_id" in header else None
    cols = [i for i in range(len(header)) if i not in (label_idx, tile_idx)]
    if not cols:
        raise SomError(f"{path}: no numeric columns")
    x = np.array([[float(r[i]) for i in cols] for r in body])
    labels = np.array([r[label_idx] for r in body]) if label_idx is not None else None
    tiles = np.array([int(float(r[tile_idx])) for r in body]) if tile_idx is not None else None
    return Dataset(x, labels=labels, source_tile=tiles, columns=[header[i] for i in cols])


def load_dataset(path) -> Dataset:
    return read_csv(Path(path))
