import xml.etree.ElementTree as ET

import numpy as np
import pytest

from tilesom.metrics import EmbeddingResult
from tilesom.render import RenderError, RenderSpec, render_embedding, render_manifold, render_umatrix, write_svg

SVG = "{http://www.w3.org/2000/svg}"


def parse(text):
    return ET.fromstring(text.encode())


def polygons(root, cls=None):
    out = root.iter(f"{SVG}polygon")
    return [p for p in out if cls is None or p.get("class") == cls]


def points(poly):
    return np.array([[float(v) for v in pair.split(",")] for pair in poly.get("points").split()])


def test_disk_polygon_count(build):
    g = build("disk10")
    root = parse(render_manifold(g))
    assert len(polygons(root)) == g.n
    assert sorted(int(p.get("data-tile")) for p in polygons(root)) == list(range(g.n))


def test_quotient_has_copies(build):
    g = build("torus-hex")
    root = parse(render_manifold(g))
    tiles = polygons(root, "tile")
    copies = polygons(root, "copy")
    assert len(tiles) == g.n
    assert len(copies) > 0 and len(copies) % g.n == 0
    assert len(list(root.iter(f"{SVG}line"))) > 0


def test_constant_shading(build):
    g = build("kq")
    root = parse(render_umatrix(g, np.full(g.n, 2.5)))
    assert {p.get("fill") for p in polygons(root, "tile")} == {"#ffffff"}


def test_grayscale_range(build):
    g = build("disk10")
    values = np.arange(g.n, dtype=float)
    fills = {int(p.get("data-tile")): p.get("fill") for p in polygons(parse(render_umatrix(g, values)))}
    assert fills[0] == "#000000" and fills[g.n - 1] == "#ffffff"
    with pytest.raises(RenderError):
        render_umatrix(g, values[:-1])


@pytest.mark.parametrize("name,center", [("disk10", 37), ("kq", 100), ("sphere", 200), ("torus-sq", 55)])
def test_recentering(name, center, build):
    g = build(name)
    size = 600
    root = parse(render_manifold(g, RenderSpec(center_tile=center, size=size)))
    poly = next(p for p in polygons(root, "tile") if int(p.get("data-tile")) == center)
    c = points(poly).mean(axis=0)
    assert np.all(np.abs(c - size / 2) <= 0.01 * size)


def test_poincare_inside_circle(build):
    g = build("disk10")
    size = 500
    root = parse(render_manifold(g, RenderSpec(size=size)))
    pts = np.concatenate([points(p) for p in polygons(root)])
    r = np.linalg.norm(pts - size / 2, axis=1)
    assert r.max() <= 0.96 * size / 2 + 1e-3


def test_projection_mismatch(build):
    with pytest.raises(RenderError):
        render_manifold(build("disk10"), RenderSpec(projection="gnomonic"))
    with pytest.raises(RenderError):
        render_manifold(build("sphere"), RenderSpec(projection="poincare_disk"))
    with pytest.raises(RenderError):
        render_manifold(build("kq"), RenderSpec(center_tile=10 ** 6))


def test_embedding_identity(build):
    g = build("torus-hex")
    root = parse(render_embedding(EmbeddingResult(np.arange(g.n), g, g)))
    circles = [c for c in root.iter(f"{SVG}circle") if c.get("data-tile") is not None]
    assert len(circles) == g.n
    edges = next(x for x in root.iter(f"{SVG}g") if x.get("id") == "edges")
    assert len(list(edges)) == g.n_edges
    # one circle per tile: each sits at its own tile polygon
    centers = {int(p.get("data-tile")): points(p).mean(axis=0) for p in polygons(root, "tile")}
    for c in circles:
        t = int(c.get("data-tile"))
        xy = np.array([float(c.get("cx")), float(c.get("cy"))])
        nearest = min(centers, key=lambda u: np.sum((centers[u] - xy) ** 2))
        assert nearest == t


def test_embedding_counts_cross_manifold(build):
    O, E = build("kq"), build("sphere")
    rng = np.random.default_rng(0)
    res = EmbeddingResult(rng.integers(0, E.n, O.n), O, E)
    root = parse(render_embedding(res))
    circles = [c for c in root.iter(f"{SVG}circle") if c.get("data-tile") is not None]
    assert len(circles) == O.n
    edges = next(x for x in root.iter(f"{SVG}g") if x.get("id") == "edges")
    assert len(list(edges)) == O.n_edges


def test_deterministic_bytes(tmp_path, build):
    g = build("kq")
    values = np.random.default_rng(1).random(g.n)
    write_svg(render_umatrix(g, values), tmp_path / "a.svg")
    write_svg(render_umatrix(g, values), tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
