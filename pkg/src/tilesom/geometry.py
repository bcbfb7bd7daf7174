"""Constant-curvature model surfaces.

Points live in R^3: on the unit sphere, on the upper sheet of the Minkowski
hyperboloid x^2 + y^2 - z^2 = -1, or in the plane (z fixed to 0).  Planar
isometries act on homogeneous coordinates (x, y, 1), so all three geometries
share 3x3 matrices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

TOL = 1e-9


class GeometryError(ValueError):
    """Raised on geometry mismatches or singular projections."""


class GeometryClass(str, enum.Enum):
    SPHERICAL = "spherical"
    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"

    @property
    def curvature_sign(self) -> int:
        return {"spherical": 1, "euclidean": 0, "hyperbolic": -1}[self.value]

    @classmethod
    def of_schlafli(cls, p: int, q: int) -> "GeometryClass":
        k = (p - 2) * (q - 2)
        if k < 4:
            return cls.SPHERICAL
        if k == 4:
            return cls.EUCLIDEAN
        return cls.HYPERBOLIC


S, E, H = GeometryClass.SPHERICAL, GeometryClass.EUCLIDEAN, GeometryClass.HYPERBOLIC

ORIGIN = np.array([0.0, 0.0, 1.0])
_J = np.diag([1.0, 1.0, -1.0])


def quadratic_form(geom: GeometryClass) -> np.ndarray:
    """Form preserved by the isometries of ``geom`` (acting on homogeneous coords)."""
    if geom is H:
        return _J.copy()
    if geom is S:
        return np.eye(3)
    return np.diag([1.0, 1.0, 0.0])


def to_homogeneous(coords, geom: GeometryClass) -> np.ndarray:
    v = np.array(coords, dtype=float)
    if geom is E:
        v = v.copy()
        v[..., 2] = 1.0
    return v


def from_homogeneous(v: np.ndarray, geom: GeometryClass) -> np.ndarray:
    if geom is E:
        out = np.array(v, dtype=float)
        out[..., :2] = out[..., :2] / out[..., 2:3]
        out[..., 2] = 0.0
        return out
    return normalize(v, geom)


def normalize(v: np.ndarray, geom: GeometryClass) -> np.ndarray:
    """Project homogeneous vectors back onto the model quadric."""
    v = np.asarray(v, dtype=float)
    if geom is S:
        return v / np.linalg.norm(v, axis=-1, keepdims=True)
    if geom is H:
        m = v[..., 2:3] ** 2 - v[..., 0:1] ** 2 - v[..., 1:2] ** 2
        out = v / np.sqrt(np.abs(m))
        return out * np.sign(out[..., 2:3])
    return v / v[..., 2:3]


def distance_array(a: np.ndarray, b: np.ndarray, geom: GeometryClass) -> np.ndarray:
    """Vectorized distance between homogeneous points (last axis of length 3)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if geom is E:
        pa = a[..., :2] / a[..., 2:3]
        pb = b[..., :2] / b[..., 2:3]
        return np.linalg.norm(pa - pb, axis=-1)
    d = a - b
    if geom is S:
        chord = np.linalg.norm(d, axis=-1)
        return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
    m = d[..., 0] ** 2 + d[..., 1] ** 2 - d[..., 2] ** 2
    return 2.0 * np.arcsinh(np.sqrt(np.maximum(m, 0.0)) / 2.0)


@dataclass(frozen=True)
class Point:
    """A location on one of the model surfaces."""

    coords: tuple[float, float, float]
    geometry: GeometryClass

    def __post_init__(self):
        x, y, z = (float(c) for c in self.coords)
        g = GeometryClass(self.geometry)
        object.__setattr__(self, "geometry", g)
        if g is E:
            z = 0.0
        elif g is S:
            if abs(x * x + y * y + z * z - 1.0) > TOL:
                raise GeometryError(f"({x}, {y}, {z}) is not on the unit sphere")
        else:
            # relative tolerance: far from the origin z*z carries rounding of order eps*z*z
            if abs(x * x + y * y + 1.0 - z * z) > TOL * max(1.0, z * z) or z <= 0:
                raise GeometryError(f"({x}, {y}, {z}) is not on the hyperboloid")
        object.__setattr__(self, "coords", (x, y, z))

    @classmethod
    def origin(cls, geom: GeometryClass) -> "Point":
        return cls((0.0, 0.0, 0.0 if geom is E else 1.0), geom)

    @classmethod
    def from_array(cls, v, geom: GeometryClass, renormalize: bool = True) -> "Point":
        v = np.asarray(v, dtype=float)
        if renormalize:
            v = from_homogeneous(to_homogeneous(v, geom) if geom is E else v, geom)
        return cls(tuple(v), geom)

    @classmethod
    def polar(cls, r: float, theta: float, geom: GeometryClass) -> "Point":
        """Point at distance ``r`` from the origin in direction ``theta``."""
        c, s = math.cos(theta), math.sin(theta)
        if geom is S:
            return cls((math.sin(r) * c, math.sin(r) * s, math.cos(r)), geom)
        if geom is H:
            return cls((math.sinh(r) * c, math.sinh(r) * s, math.cosh(r)), geom)
        return cls((r * c, r * s, 0.0), geom)

    @property
    def homogeneous(self) -> np.ndarray:
        return to_homogeneous(self.coords, self.geometry)


def distance(a: Point, b: Point) -> float:
    if a.geometry is not b.geometry:
        raise GeometryError("points belong to different geometries")
    return float(distance_array(a.homogeneous, b.homogeneous, a.geometry))


@dataclass(frozen=True, eq=False)
class Isometry:
    matrix: np.ndarray
    geometry: GeometryClass

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, geom: GeometryClass) -> "Isometry":
        return cls(np.eye(3), geom)

    def apply(self, p: Point) -> Point:
        if p.geometry is not self.geometry:
            raise GeometryError("isometry and point belong to different geometries")
        v = self.matrix @ p.homogeneous
        return Point(tuple(from_homogeneous(v, self.geometry)), self.geometry)

    def apply_array(self, v: np.ndarray) -> np.ndarray:
        """Apply to homogeneous row vectors, renormalizing to the quadric."""
        return normalize(np.asarray(v) @ self.matrix.T, self.geometry)

    def compose(self, other: "Isometry") -> "Isometry":
        """``self`` after ``other``."""
        return Isometry(self.matrix @ other.matrix, self.geometry)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return self.compose(other)

    def inverse(self) -> "Isometry":
        return Isometry(np.linalg.inv(self.matrix), self.geometry)

    def form_defect(self) -> float:
        """How far the matrix is from preserving the geometry's quadratic form."""
        m = self.matrix
        if self.geometry is E:
            r = m[:2, :2]
            return float(max(np.abs(r.T @ r - np.eye(2)).max(), np.abs(m[2] - [0, 0, 1]).max()))
        q = quadratic_form(self.geometry)
        return float(np.abs(m.T @ q @ m - q).max())


def rotation(theta: float, geom: GeometryClass) -> Isometry:
    c, s = math.cos(theta), math.sin(theta)
    return Isometry(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), geom)


def translation_x(d: float, geom: GeometryClass) -> Isometry:
    """Isometry moving the origin a distance ``d`` along the positive x axis."""
    if geom is E:
        m = np.array([[1.0, 0.0, d], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    elif geom is S:
        c, s = math.cos(d), math.sin(d)
        m = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    else:
        c, s = math.cosh(d), math.sinh(d)
        m = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    return Isometry(m, geom)


def recentering_isometry(target: Point) -> Isometry:
    """Isometry mapping ``target`` to the model origin."""
    g = target.geometry
    x, y, z = target.coords
    theta = math.atan2(y, x)
    if g is E:
        r = math.hypot(x, y)
    elif g is S:
        r = math.atan2(math.hypot(x, y), z)
    else:
        r = math.asinh(math.hypot(x, y))
    if r == 0.0:
        return Isometry.identity(g)
    # rotate target onto the +x axis, then slide it back to the origin
    return translation_x(-r, g) @ rotation(-theta, g)


def recentering_matrix(v: np.ndarray, geom: GeometryClass) -> np.ndarray:
    """Matrix form of :func:`recentering_isometry` for a homogeneous vector."""
    return recentering_isometry(Point.from_array(from_homogeneous(v, geom), geom)).matrix


class Projection(str, enum.Enum):
    POINCARE_DISK = "poincare_disk"
    ORTHOGRAPHIC = "orthographic"
    STEREOGRAPHIC = "stereographic"
    PLANAR_IDENTITY = "planar_identity"

    def compatible(self, geom: GeometryClass) -> bool:
        return {
            "poincare_disk": geom is H,
            "orthographic": geom is S,
            "stereographic": geom is S,
            "planar_identity": geom is E,
        }[self.value]

    @classmethod
    def default_for(cls, geom: GeometryClass) -> "Projection":
        return {S: cls.ORTHOGRAPHIC, E: cls.PLANAR_IDENTITY, H: cls.POINCARE_DISK}[geom]


def project_array(v: np.ndarray, proj: Projection, geom: GeometryClass) -> np.ndarray:
    """Project homogeneous points (already recentered) to the plane."""
    proj = Projection(proj)
    if not proj.compatible(geom):
        raise GeometryError(f"{proj.value} projection does not apply to {geom.value} geometry")
    v = np.asarray(v, dtype=float)
    if proj is Projection.PLANAR_IDENTITY:
        return v[..., :2] / v[..., 2:3]
    if proj is Projection.ORTHOGRAPHIC:
        return v[..., :2].copy()
    denom = 1.0 + v[..., 2:3]
    if proj is Projection.STEREOGRAPHIC:
        if np.any(np.abs(denom) < 1e-12):
            raise GeometryError("stereographic projection is singular at (0, 0, -1)")
        # central projection from (0,0,-1) onto the plane z = 1
        return 2.0 * v[..., :2] / denom
    return v[..., :2] / denom


def project(p: Point, proj: Projection, center: Point | None = None) -> tuple[float, float]:
    v = p.homogeneous
    if center is not None:
        if center.geometry is not p.geometry:
            raise GeometryError("projection center and point belong to different geometries")
        v = recentering_isometry(center).matrix @ v
    xy = project_array(v, proj, p.geometry)
    return float(xy[0]), float(xy[1])
