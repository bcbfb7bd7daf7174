import math

import numpy as np
import pytest

from tilesom.geometry import (E, H, S, GeometryError, Isometry, Point, Projection, distance, project,
                              recentering_isometry, rotation, translation_x)

GEOMS = (S, E, H)


def random_point(rng, geom):
    r = rng.uniform(0, 2.5 if geom is not S else math.pi)
    return Point.polar(r, rng.uniform(0, 2 * math.pi), geom)


def random_isometry(rng, geom):
    return rotation(rng.uniform(0, 6.3), geom) @ translation_x(rng.uniform(-2, 2), geom) @ rotation(
        rng.uniform(0, 6.3), geom)


def test_distance_examples():
    assert distance(Point((0, 0, 1), S), Point((0, 0, -1), S)) == pytest.approx(math.pi, abs=1e-12)
    assert distance(Point((0, 0, 1), H), Point((0, math.sinh(1), math.cosh(1)), H)) == pytest.approx(1, abs=1e-12)
    assert distance(Point((0, 0, 0), E), Point((3, 4, 0), E)) == pytest.approx(5, abs=1e-12)


def test_distance_geometry_mismatch():
    with pytest.raises(GeometryError):
        distance(Point((0, 0, 1), S), Point((0, 0, 1), H))


def test_point_validation():
    with pytest.raises(GeometryError):
        Point((0, 0, 2), S)
    with pytest.raises(GeometryError):
        Point((0, 0, -1), H)
    assert Point((1, 2, 7), E).coords == (1.0, 2.0, 0.0)


@pytest.mark.parametrize("geom", GEOMS)
def test_metric_axioms(geom):
    rng = np.random.default_rng(1)
    for _ in range(1000):
        a, b, c = (random_point(rng, geom) for _ in range(3))
        ab, bc, ac = distance(a, b), distance(b, c), distance(a, c)
        assert ab >= 0
        assert ab == pytest.approx(distance(b, a), abs=1e-9)
        assert distance(a, a) == pytest.approx(0, abs=1e-7)
        assert ac <= ab + bc + 1e-9


def test_projection_examples():
    assert project(Point((0, 0, 1), H), Projection.POINCARE_DISK) == (0.0, 0.0)
    assert project(Point((0.6, 0.8, 0), S), Projection.ORTHOGRAPHIC) == pytest.approx((0.6, 0.8))
    north = Point((0, 0, 1), S)
    assert project(north, Projection.STEREOGRAPHIC, center=north) == pytest.approx((0, 0))


def test_stereographic_singularity():
    with pytest.raises(GeometryError):
        project(Point((0, 0, -1), S), Projection.STEREOGRAPHIC)


def test_projection_compatibility():
    with pytest.raises(GeometryError):
        project(Point((0, 0, 1), S), Projection.POINCARE_DISK)
    with pytest.raises(GeometryError):
        project(Point((0, 0, 1), H), Projection.ORTHOGRAPHIC)


def test_poincare_inside_unit_disk():
    rng = np.random.default_rng(2)
    for _ in range(500):
        p = Point.polar(rng.uniform(0, 8), rng.uniform(0, 6.3), H)
        assert np.hypot(*project(p, Projection.POINCARE_DISK)) < 1


@pytest.mark.parametrize("geom", GEOMS)
def test_recentering(geom):
    rng = np.random.default_rng(3)
    origin = Point.origin(geom)
    assert np.allclose(recentering_isometry(origin).matrix, np.eye(3))
    for _ in range(200):
        target, p, q = (random_point(rng, geom) for _ in range(3))
        iso = recentering_isometry(target)
        assert distance(iso.apply(target), origin) == pytest.approx(0, abs=1e-7)
        assert distance(iso.apply(p), iso.apply(q)) == pytest.approx(distance(p, q), abs=1e-9)
        assert iso.form_defect() < 1e-9


@pytest.mark.parametrize("geom", GEOMS)
def test_isometry_composition(geom):
    rng = np.random.default_rng(4)
    for _ in range(200):
        a, b = random_isometry(rng, geom), random_isometry(rng, geom)
        p = random_point(rng, geom)
        lhs = (a @ b).apply(p)
        rhs = a.apply(b.apply(p))
        assert distance(lhs, rhs) == pytest.approx(0, abs=1e-7)
        assert (a @ b).form_defect() < 1e-9


def test_isometry_geometry_mismatch():
    with pytest.raises(GeometryError):
        Isometry.identity(S).apply(Point((0, 0, 1), H))
