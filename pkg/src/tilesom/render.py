"""Static SVG drawings of tile graphs, U-matrices and embeddings."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import GeometryError, Projection, S, normalize, project_array, recentering_matrix
from .metrics import EmbeddingResult
from .tessellation.graph import TessellationError, TileGraph
from .tessellation.layout import tile_centers


class RenderError(ValueError):
    """Invalid render request."""


@dataclass
class RenderSpec:
    projection: Projection | str | None = None
    center_tile: int | None = None
    # per-tile scalars (grayscale) or color strings; None draws white tiles
    shading: object = None
    size: int = 800
    stroke: str = "#404040"
    stroke_width: float = 0.6
    periodic_copies: bool = True
    circle_radius: float = 3.0


# ------------------------------------------------------------------ geometry
def _polygon_data(g: TileGraph):
    """Per tile: corner vertices in the drawing frame (angular order) and, for
    each corner, the tiles of its dual triangle (local ids, -1 outside g)."""
    centers = tile_centers(g)
    frames = g.extra["frames"]
    lay = g.layout
    local = {int(s): i for i, s in enumerate(g.source)}
    verts = [[] for _ in range(g.n)]
    owners = [[] for _ in range(g.n)]
    for tiles, corner in zip(lay.triangles, lay.corners):
        loc = tuple(local.get(int(t), -1) for t in tiles)
        for k, i in enumerate(loc):
            if i >= 0:
                verts[i].append(frames[i] @ corner[k])
                owners[i].append(loc)
    polys, corner_tiles = [], []
    for i in range(g.n):
        vs = normalize(np.array(verts[i]), g.geometry)
        loc = vs @ recentering_matrix(centers[i], g.geometry).T
        order = np.argsort(np.arctan2(loc[:, 1], loc[:, 0]), kind="stable")
        polys.append(vs[order])
        corner_tiles.append([owners[i][k] for k in order])
    return centers, polys, corner_tiles


def _boundary_segments(g: TileGraph, polys, corner_tiles):
    """Polygon sides whose neighbour is not drawn next to them (the outline of
    the fundamental domain of a quotient)."""
    frames = g.extra["frames"]
    lay = g.layout
    src = g.source
    out = []
    for t in range(g.n):
        P = polys[t]
        m = len(P)
        for k in range(m):
            a, b = corner_tiles[t][k], corner_tiles[t][(k + 1) % m]
            across = (set(a) & set(b)) - {t, -1}
            if len(across) != 1:
                continue
            u = across.pop()
            D = frames[t] @ lay.transition[(int(src[t]), int(src[u]))] @ np.linalg.inv(frames[u])
            if np.abs(D - np.eye(3)).max() > 1e-6:
                out.append((P[k], P[(k + 1) % m]))
    return out


class _Canvas:
    def __init__(self, g: TileGraph, spec: RenderSpec):
        self.g = g
        self.spec = spec
        proj = spec.projection or Projection.default_for(g.geometry)
        try:
            self.proj = Projection(proj)
        except ValueError as exc:
            raise RenderError(f"unknown projection {proj!r}") from exc
        if not self.proj.compatible(g.geometry):
            raise RenderError(f"{self.proj.value} projection does not apply to {g.geometry.value} geometry")
        if g.layout is None:
            raise RenderError(f"{g.name} has no geometric layout")
        self.centers, self.polys, self.corner_tiles = _polygon_data(g)
        c = g.center_tile if spec.center_tile is None else int(spec.center_tile)
        if not 0 <= c < g.n:
            raise RenderError(f"center tile {c} outside 0..{g.n - 1}")
        self.R = recentering_matrix(self.centers[c], g.geometry)
        deck = g.extra.get("deck", []) if (g.closed and spec.periodic_copies) else []
        self.copies = [np.eye(3)] + [np.asarray(D) for D in deck]
        self.scale = None

    def map(self, v, copy: int = 0) -> np.ndarray:
        """Project homogeneous points (rows) of copy ``copy``."""
        w = np.asarray(v) @ (self.R @ self.copies[copy]).T
        w = normalize(w, self.g.geometry)
        try:
            return project_array(w, self.proj, self.g.geometry)
        except GeometryError as exc:
            raise RenderError(str(exc)) from exc

    def fit(self, points: np.ndarray):
        half = self.spec.size / 2.0
        if self.proj in (Projection.POINCARE_DISK, Projection.ORTHOGRAPHIC):
            extent = 1.0
        else:
            extent = float(np.abs(points).max()) if len(points) else 1.0
        self.scale = 0.96 * half / max(extent, 1e-12)

    def xy(self, p) -> tuple[float, float]:
        half = self.spec.size / 2.0
        return half + self.scale * float(p[0]), half - self.scale * float(p[1])

    def front(self, v, copy: int = 0) -> bool:
        if self.g.geometry is not S or self.proj is not Projection.ORTHOGRAPHIC:
            return True
        w = np.asarray(v) @ (self.R @ self.copies[copy]).T
        return float(np.mean(w[..., 2])) >= 0


def _fills(g: TileGraph, shading) -> list[str]:
    if shading is None:
        return ["#ffffff"] * g.n
    vals = list(shading)
    if len(vals) != g.n:
        raise RenderError(f"shading has {len(vals)} entries for {g.n} tiles")
    if all(isinstance(v, str) for v in vals):
        return vals
    x = np.asarray(vals, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    level = np.ones(g.n) if hi - lo <= 0 else (x - lo) / (hi - lo)
    return ["#{0:02x}{0:02x}{0:02x}".format(int(round(255 * v))) for v in level]


def _f(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _points(canvas: _Canvas, pts) -> str:
    return " ".join(f"{_f(a)},{_f(b)}" for a, b in (canvas.xy(p) for p in pts))


def _header(size: int, title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f"<title>{_escape(title)}</title>",
    ]


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _tile_layers(canvas: _Canvas, fills, stroke, class_fmt="tile"):
    g = canvas.g
    projected = [[canvas.map(P, c) for P in canvas.polys] for c in range(len(canvas.copies))]
    if canvas.scale is None:
        canvas.fit(np.concatenate([np.concatenate(pp) for pp in projected]))
    out = []
    back, front = [], []
    for c in range(len(canvas.copies)):
        cls = class_fmt if c == 0 else "copy"
        for t in range(g.n):
            fill = fills[t]
            line = (f'<polygon class="{cls}" data-tile="{t}" points="{_points(canvas, projected[c][t])}" '
                    f'fill="{fill}" stroke="{stroke}" stroke-width="{_f(canvas.spec.stroke_width)}"')
            if canvas.front(canvas.polys[t], c):
                front.append(line + "/>")
            else:
                back.append(line + ' fill-opacity="0.35" stroke-opacity="0.35"/>')
    if back:
        out.append('<g id="back">')
        out += back
        out.append("</g>")
    out.append('<g id="tiles">')
    out += front
    out.append("</g>")
    return out


def render_manifold(g: TileGraph, spec: RenderSpec | None = None) -> str:
    """SVG of the tiles (one fundamental domain plus one ring of periodic
    copies for quotients); grayscale shading maps min to black, max to white."""
    spec = spec or RenderSpec()
    try:
        canvas = _Canvas(g, spec)
    except TessellationError as exc:
        raise RenderError(str(exc)) from exc
    lines = _header(spec.size, g.name)
    if canvas.proj is Projection.POINCARE_DISK or canvas.proj is Projection.ORTHOGRAPHIC:
        h = spec.size / 2.0
        lines.append(f'<circle class="horizon" cx="{_f(h)}" cy="{_f(h)}" r="{_f(0.96 * h)}" fill="none" '
                     f'stroke="#000000" stroke-width="1"/>')
    lines += _tile_layers(canvas, _fills(g, spec.shading), spec.stroke)
    if g.closed and len(canvas.copies) > 1:
        lines += _domain_outline(canvas)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _domain_outline(canvas: _Canvas) -> list[str]:
    segs = _boundary_segments(canvas.g, canvas.polys, canvas.corner_tiles)
    out = ['<g id="domain" fill="none" stroke="#c00000" stroke-width="1.5">']
    for a, b in segs:
        pa, pb = canvas.map(np.array([a, b]))
        (x1, y1), (x2, y2) = canvas.xy(pa), canvas.xy(pb)
        out.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}"/>')
    out.append("</g>")
    return out


def render_umatrix(g: TileGraph, values, spec: RenderSpec | None = None) -> str:
    """Inverted U-matrix: darker tiles are closer to their neighbours in data space."""
    spec = spec or RenderSpec()
    spec = RenderSpec(**{**spec.__dict__, "shading": np.asarray(values, dtype=float)})
    return render_manifold(g, spec)


def render_embedding(res: EmbeddingResult, spec: RenderSpec | None = None) -> str:
    """Gray outlines of E, one circle per O-tile at its image, a segment per
    O-edge (drawn to the nearest periodic copy) and the fundamental domain."""
    spec = spec or RenderSpec()
    E = res.E
    try:
        canvas = _Canvas(E, spec)
    except TessellationError as exc:
        raise RenderError(str(exc)) from exc
    lines = _header(spec.size, f"{res.O.name} in {E.name}")
    lines += _tile_layers(canvas, ["#f4f4f4"] * E.n, "#a0a0a0")
    if E.closed and len(canvas.copies) > 1:
        lines += _domain_outline(canvas)
    # circle positions: stacked images spread on a small ring around the tile center
    centers = [canvas.map(canvas.centers, c) for c in range(len(canvas.copies))]
    stack: dict = {}
    offsets = np.zeros((res.O.n, 2))
    for t in range(res.O.n):
        stack.setdefault(int(res.e[t]), []).append(t)
    rad = spec.circle_radius * 1.6 / canvas.scale
    for tiles in stack.values():
        if len(tiles) > 1:
            for k, t in enumerate(tiles):
                ang = 2 * np.pi * k / len(tiles)
                offsets[t] = rad * np.array([np.cos(ang), np.sin(ang)])
    pos = centers[0][res.e] + offsets
    lines.append(f'<g id="edges" stroke="#1f5fbf" stroke-width="{_f(spec.stroke_width * 1.5)}">')
    for a, b in res.O.edges():
        pa = pos[a]
        # nearest copy of b's image, so edges across the domain boundary stay short
        cand = [centers[c][res.e[b]] + offsets[b] for c in range(len(centers))]
        pb = min(cand, key=lambda q: float(np.sum((q - pa) ** 2)))
        (x1, y1), (x2, y2) = canvas.xy(pa), canvas.xy(pb)
        lines.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}"/>')
    lines.append("</g>")
    lines.append('<g id="samples" fill="#e06000" stroke="#000000" stroke-width="0.4">')
    for t in range(res.O.n):
        x, y = canvas.xy(pos[t])
        lines.append(f'<circle data-tile="{t}" cx="{_f(x)}" cy="{_f(y)}" r="{_f(spec.circle_radius)}"/>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(text: str, path) -> None:
    Path(path).write_text(text)
