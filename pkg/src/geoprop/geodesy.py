"""WGS84 constants and transforms among geodetic, Earth-fixed, and local ENU coordinates.

Angles are degrees at the API boundary and radians internally.  The ellipsoid
radii (a, b) drive the geodetic conversions; the mean radius feeds the
spherical orbit-shell model used when placing satellites.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

WGS84_A = 6378137.0
WGS84_B = 6356752.31424518
EARTH_RADIUS = 6371000.0

_E2 = 1.0 - (WGS84_B / WGS84_A) ** 2

_INVERSE_MAX_ITER = 10
_INVERSE_TOL_RAD = 1e-12


@dataclass(frozen=True)
class GeodeticPoint:
    """WGS84 position: lon/lat in degrees, height in meters above the ellipsoid."""

    lon: float
    lat: float
    h: float = 0.0

    def __post_init__(self):
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")


def geodetic_to_ecf(lon, lat, h):
    """Geodetic (degrees, meters) to Earth-centered-Earth-fixed, shape (..., 3)."""
    lam = np.radians(np.asarray(lon, dtype=float))
    phi = np.radians(np.asarray(lat, dtype=float))
    h = np.asarray(h, dtype=float)
    sin_phi = np.sin(phi)
    cos_phi = np.cos(phi)
    n = WGS84_A / np.sqrt(1.0 - _E2 * sin_phi**2)
    x = (n + h) * cos_phi * np.cos(lam)
    y = (n + h) * cos_phi * np.sin(lam)
    z = (n * (1.0 - _E2) + h) * sin_phi
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def point_to_ecf(p: GeodeticPoint) -> np.ndarray:
    return geodetic_to_ecf(p.lon, p.lat, p.h)


def ecf_to_geodetic(xyz):
    """Invert geodetic_to_ecf by iterative latitude refinement.

    Bounded at 10 iterations with a 1e-12 rad convergence test, which brings
    the forward/backward roundtrip under 1e-4 m everywhere off the Earth core.
    Raises GeometryError for points closer to the Earth center than b/2.
    """
    v = np.asarray(xyz, dtype=float)
    norm = np.linalg.norm(v, axis=-1)
    if np.any(norm < WGS84_B / 2.0):
        raise GeometryError("point too close to Earth center for geodetic inversion")
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    lon = np.degrees(np.arctan2(y, x))
    p = np.hypot(x, y)
    phi = np.arctan2(z, p * (1.0 - _E2))
    h = np.zeros_like(p)
    for _ in range(_INVERSE_MAX_ITER):
        sin_phi = np.sin(phi)
        w = np.sqrt(1.0 - _E2 * sin_phi**2)
        n = WGS84_A / w
        h = p * np.cos(phi) + z * sin_phi - WGS84_A * w
        phi_new = np.arctan2(z, p * (1.0 - _E2 * n / (n + h)))
        delta = np.max(np.abs(phi_new - phi))
        phi = phi_new
        if delta < _INVERSE_TOL_RAD:
            break
    sin_phi = np.sin(phi)
    w = np.sqrt(1.0 - _E2 * sin_phi**2)
    h = p * np.cos(phi) + z * sin_phi - WGS84_A * w
    return lon, np.degrees(phi), h


def enu_to_ecf_rotation(origin: GeodeticPoint) -> np.ndarray:
    """Rotation whose columns are the local East, North, Up axes expressed in ecf.

    At the poles the (degenerate) longitude is taken from the origin as given,
    which keeps the columns orthonormal.
    """
    lam = np.radians(origin.lon)
    phi = np.radians(origin.lat)
    sl, cl = np.sin(lam), np.cos(lam)
    sp, cp = np.sin(phi), np.cos(phi)
    return np.array(
        [
            [-sl, -sp * cl, cp * cl],
            [cl, -sp * sl, cp * sl],
            [0.0, cp, sp],
        ]
    )


class TangentFrame:
    """Local East-North-Up Cartesian frame tangent to the ellipsoid at an origin."""

    def __init__(self, origin: GeodeticPoint):
        self.origin = origin
        self.rotation = enu_to_ecf_rotation(origin)  # enu -> ecf
        self.origin_ecf = point_to_ecf(origin)

    def enu_to_ecf(self, pts):
        return np.asarray(pts, dtype=float) @ self.rotation.T + self.origin_ecf

    def ecf_to_enu(self, pts):
        return (np.asarray(pts, dtype=float) - self.origin_ecf) @ self.rotation

    def enu_vector_to_ecf(self, vec):
        return np.asarray(vec, dtype=float) @ self.rotation.T

    def ecf_vector_to_enu(self, vec):
        return np.asarray(vec, dtype=float) @ self.rotation

    def enu_to_geodetic(self, pts):
        return ecf_to_geodetic(self.enu_to_ecf(pts))

    def geodetic_to_enu(self, lon, lat, h):
        return self.ecf_to_enu(geodetic_to_ecf(lon, lat, h))

    def __repr__(self):
        return f"TangentFrame(origin={self.origin})"
