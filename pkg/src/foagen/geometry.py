"""Spherical geometry: directions, angular distance, and the DoA search grid."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Direction:
    """A direction on the unit sphere.

    Azimuth is wrapped into [-pi, pi). Elevation outside [-pi/2, pi/2] is an
    error; wrapping elevation has no physical meaning.
    """

    azimuth: float
    elevation: float

    def __post_init__(self) -> None:
        el = float(self.elevation)
        if not np.isfinite(el) or not np.isfinite(self.azimuth):
            raise ValueError("direction angles must be finite")
        if el < -np.pi / 2 - 1e-12 or el > np.pi / 2 + 1e-12:
            raise ValueError(f"elevation {el} outside [-pi/2, pi/2]")
        az = (float(self.azimuth) + np.pi) % TWO_PI - np.pi
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", min(max(el, -np.pi / 2), np.pi / 2))

    @classmethod
    def from_degrees(cls, azimuth_deg: float, elevation_deg: float) -> "Direction":
        return cls(np.radians(azimuth_deg), np.radians(elevation_deg))


def dir_to_unit_vector(d: Direction) -> np.ndarray:
    """Spherical to Cartesian: x = cos(el)cos(az), y = cos(el)sin(az), z = sin(el)."""
    ce = np.cos(d.elevation)
    return np.array([ce * np.cos(d.azimuth), ce * np.sin(d.azimuth), np.sin(d.elevation)])


def unit_vector_to_dir(v: np.ndarray) -> Direction:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector has no direction")
    v = v / n
    return Direction(np.arctan2(v[1], v[0]), np.arcsin(np.clip(v[2], -1.0, 1.0)))


def angular_distance(a: Direction, b: Direction) -> float:
    """Great-circle distance in radians, in [0, pi]."""
    if a == b:  # arccos near 1 would otherwise leak ~1e-8 of roundoff
        return 0.0
    dot = float(np.dot(dir_to_unit_vector(a), dir_to_unit_vector(b)))
    return float(np.arccos(np.clip(dot, -1.0, 1.0)))


@dataclass(frozen=True)
class SphereGrid:
    """A deterministic set of unit vectors used as a DoA search grid."""

    unit_vectors: np.ndarray
    count: int = field(default=0)

    def __post_init__(self) -> None:
        vs = np.asarray(self.unit_vectors, dtype=float)
        vs = vs / np.linalg.norm(vs, axis=1, keepdims=True)
        vs.setflags(write=False)
        object.__setattr__(self, "unit_vectors", vs)
        object.__setattr__(self, "count", len(vs))

    @functools.cached_property
    def points(self) -> tuple[Direction, ...]:
        return tuple(unit_vector_to_dir(v) for v in self.unit_vectors)


def _fibonacci_lattice(n: int, eps: float = 0.33) -> np.ndarray:
    i = np.arange(n)
    z = 1.0 - 2.0 * (i + eps) / (n - 1.0 + 2.0 * eps)
    az = TWO_PI * i / ((1.0 + np.sqrt(5.0)) / 2.0)
    el = np.arcsin(np.clip(z, -1.0, 1.0))
    return np.stack(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1
    )


def _delaunay_cover_grad(v: np.ndarray, q: float, c0: float) -> tuple[np.ndarray, float]:
    # Spherical Delaunay triangles come from the convex hull of unit vectors.
    # Each triangle's circumcenter is min-distance from its vertices; the max
    # circumradius over triangles is the exact covering radius of the set.
    s_idx = ConvexHull(v).simplices
    a, b, c = v[s_idx[:, 0]], v[s_idx[:, 1]], v[s_idx[:, 2]]
    u = np.cross(a, b) + np.cross(b, c) + np.cross(c, a)
    rho = np.linalg.norm(u, axis=1)
    tau = np.einsum("ij,ij->i", a, np.cross(b, c))
    sgn = np.sign(tau)
    f = sgn * tau / rho
    # energy sum((1-cosR)/c0)^q concentrates on the largest circumradii
    r = (1.0 - f) / c0
    coef = -(q / c0) * r ** (q - 1)
    grad = np.zeros_like(v)
    t3 = sgn * tau / rho**3
    np.add.at(grad, s_idx[:, 0],
              coef[:, None] * ((sgn / rho)[:, None] * np.cross(b, c) - t3[:, None] * np.cross(b - c, u)))
    np.add.at(grad, s_idx[:, 1],
              coef[:, None] * ((sgn / rho)[:, None] * np.cross(c, a) - t3[:, None] * np.cross(c - a, u)))
    np.add.at(grad, s_idx[:, 2],
              coef[:, None] * ((sgn / rho)[:, None] * np.cross(a, b) - t3[:, None] * np.cross(a - b, u)))
    cover = float(np.degrees(np.arccos(np.clip(f.min(), -1.0, 1.0))))
    return grad, cover


def _repulsion_grad(v: np.ndarray, barrier_cos: float, lam: float) -> np.ndarray:
    # quadratic penalty on pairs closer than the barrier angle
    d = v @ v.T
    np.fill_diagonal(d, -1.0)
    x = d - barrier_cos
    return np.where(x > 0, 2.0 * lam * x, 0.0) @ v


def _refine_covering(v: np.ndarray) -> np.ndarray:
    """Reduce the covering radius of a point set while keeping spacing even.

    Adam ascent against a smooth surrogate of the max Delaunay circumradius,
    with a short-range repulsion barrier so nearest-neighbor spacing stays
    near the natural lattice value. The schedule is fixed, so the result is a
    deterministic function of the input points.
    """
    n = len(v)
    char = np.sqrt(4.0 * np.pi / n)  # natural spacing in radians
    c0 = 1.0 - np.cos(0.62 * char)
    barrier_cos = np.cos(0.857 * char)
    lam = 300.0
    v = v.copy()
    m1 = np.zeros_like(v)
    m2 = np.zeros_like(v)
    step = 0
    for iters, q, lr in [(150, 8.0, 3e-3), (200, 16.0, 2e-3), (150, 32.0, 1e-3)]:
        for _ in range(iters):
            g_cov, _ = _delaunay_cover_grad(v, q, c0)
            g = g_cov + _repulsion_grad(v, barrier_cos, lam)
            g -= np.einsum("ij,ij->i", g, v)[:, None] * v  # tangent projection
            m1 = 0.9 * m1 + 0.1 * g
            m2 = 0.999 * m2 + 0.001 * g * g
            step += 1
            mh = m1 / (1.0 - 0.9**step)
            vh = m2 / (1.0 - 0.999**step)
            v = v - lr * mh / (np.sqrt(vh) + 1e-12)
            v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


@functools.lru_cache(maxsize=8)
def fibonacci_grid(n: int) -> SphereGrid:
    """Build an n-point near-uniform sphere grid.

    Starts from a Fibonacci lattice. For n >= 64 a fixed relaxation pass
    tightens the covering radius (the raw lattice leaves slightly oversized
    gaps near its spiral seams), keeping the construction deterministic.

    Args:
        n: number of points, at least 2.

    Returns:
        SphereGrid with n unit vectors.
    """
    if n < 2:
        raise ValueError(f"grid needs at least 2 points, got {n}")
    v = _fibonacci_lattice(n)
    if n >= 64:
        v = _refine_covering(v)
    return SphereGrid(v)
