"""RPC projection, per-tile affine camera fitting, and geometric image rays.

The rational polynomial model maps geodetic (lon, lat, h) to image
(line, sample) through ratios of cubic polynomials in normalized coordinates.
Coefficients follow the conventional 20-term ordering; ``RPC_EXPONENTS`` is
the normative statement of that ordering and is mirrored by the JSON schema
documented in the README.

Over a tile small enough that its rays are effectively parallel, the model is
replaced by an affine camera: a 2x4 matrix whose two linear rows span the
plane orthogonal to the shared ray direction.  Rays are represented in a
local ENU frame with an orthonormal in-plane basis (u_hat, v_hat) attached,
along which ray-origin displacement errors are later expressed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FitError, GeometryError, ProjectionError
from .geodesy import TangentFrame

#: Exponent triples (lon, lat, height) of the 20 cubic terms, in coefficient order.
RPC_EXPONENTS = (
    (0, 0, 0),
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (1, 1, 0), (1, 0, 1), (0, 1, 1),
    (2, 0, 0), (0, 2, 0), (0, 0, 2),
    (1, 1, 1),
    (3, 0, 0), (1, 2, 0), (1, 0, 2), (2, 1, 0),
    (0, 3, 0), (0, 1, 2), (2, 0, 1), (0, 2, 1),
    (0, 0, 3),
)

_DEN_FLOOR = 1e-12

_RPC_COEFF_FIELDS = ("line_num", "line_den", "samp_num", "samp_den")
_RPC_SCALAR_FIELDS = (
    "lon_off", "lon_scale", "lat_off", "lat_scale", "height_off", "height_scale",
    "line_off", "line_scale", "samp_off", "samp_scale",
)


def poly_terms(l, p, h):
    """Stack the 20 cubic basis terms for normalized (lon, lat, height), shape (..., 20)."""
    l, p, h = np.broadcast_arrays(
        np.asarray(l, dtype=float), np.asarray(p, dtype=float), np.asarray(h, dtype=float)
    )
    one = np.ones_like(l)
    return np.stack(
        [
            one, l, p, h,
            l * p, l * h, p * h,
            l * l, p * p, h * h,
            l * p * h,
            l**3, l * p * p, l * h * h, l * l * p,
            p**3, p * h * h, l * l * h, p * p * h,
            h**3,
        ],
        axis=-1,
    )


@dataclass(frozen=True)
class RpcModel:
    """Rational polynomial camera; coefficient vectors in the RPC_EXPONENTS order."""

    line_num: np.ndarray
    line_den: np.ndarray
    samp_num: np.ndarray
    samp_den: np.ndarray
    lon_off: float
    lon_scale: float
    lat_off: float
    lat_scale: float
    height_off: float
    height_scale: float
    line_off: float
    line_scale: float
    samp_off: float
    samp_scale: float

    def __post_init__(self):
        for name in _RPC_COEFF_FIELDS:
            coeff = np.asarray(getattr(self, name), dtype=float)
            if coeff.shape != (20,):
                raise ValueError(f"{name} must have 20 coefficients, got {coeff.shape}")
            object.__setattr__(self, name, coeff)
        for name in ("line_den", "samp_den"):
            if abs(getattr(self, name)[0]) < _DEN_FLOOR:
                raise ValueError(f"{name} constant coefficient must be nonzero")
        for name in _RPC_SCALAR_FIELDS:
            if name.endswith("_scale") and getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def normalize(self, lon, lat, h):
        l = (np.asarray(lon, dtype=float) - self.lon_off) / self.lon_scale
        p = (np.asarray(lat, dtype=float) - self.lat_off) / self.lat_scale
        w = (np.asarray(h, dtype=float) - self.height_off) / self.height_scale
        return l, p, w

    def project(self, lon, lat, h):
        """Forward projection to (line, sample) pixels.

        Raises ProjectionError when a denominator polynomial falls under 1e-12
        in magnitude (outside the model's rational validity).
        """
        terms = poly_terms(*self.normalize(lon, lat, h))
        den_l = terms @ self.line_den
        den_s = terms @ self.samp_den
        if np.any(np.abs(den_l) < _DEN_FLOOR) or np.any(np.abs(den_s) < _DEN_FLOOR):
            raise ProjectionError("RPC denominator vanished; projection singular")
        line = (terms @ self.line_num) / den_l * self.line_scale + self.line_off
        samp = (terms @ self.samp_num) / den_s * self.samp_scale + self.samp_off
        return line, samp

    def project_point(self, point):
        line, samp = self.project(point.lon, point.lat, point.h)
        return float(line), float(samp)

    def to_dict(self):
        d = {f"{name}_coeff": getattr(self, name).tolist() for name in _RPC_COEFF_FIELDS}
        d.update({name: float(getattr(self, name)) for name in _RPC_SCALAR_FIELDS})
        return d

    @classmethod
    def from_dict(cls, d):
        kwargs = {name: np.asarray(d[f"{name}_coeff"], dtype=float) for name in _RPC_COEFF_FIELDS}
        kwargs.update({name: float(d[name]) for name in _RPC_SCALAR_FIELDS})
        return cls(**kwargs)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _complete_ray_frame(direction):
    """Deterministic orthonormal (u_hat, v_hat) completing a unit ray direction.

    Gram-Schmidt against local up, falling back to North for near-vertical rays,
    so that (u_hat, v_hat, direction) is right handed.
    """
    ref = np.array([0.0, 0.0, 1.0])
    if abs(direction @ ref) > 0.99:
        ref = np.array([0.0, 1.0, 0.0])
    u_hat = np.cross(ref, direction)
    u_hat = u_hat / np.linalg.norm(u_hat)
    v_hat = np.cross(direction, u_hat)
    return u_hat, v_hat


@dataclass(frozen=True)
class Ray:
    """Image ray in a local ENU frame.

    ``direction`` points from the scene toward the sensor; ``origin`` is any
    point on the ray; (u_hat, v_hat) span the plane orthogonal to the ray and
    carry the ray-displacement error coordinates; ``slant_range`` is the
    sensor-to-scene distance used to convert attitude error to displacement.
    """

    direction: np.ndarray
    origin: np.ndarray
    u_hat: np.ndarray
    v_hat: np.ndarray
    slant_range: float

    def __post_init__(self):
        for name in ("direction", "origin", "u_hat", "v_hat"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        r, u, v = self.direction, self.u_hat, self.v_hat
        if abs(np.linalg.norm(r) - 1.0) > 1e-12:
            raise GeometryError("ray direction must be a unit vector")
        if max(abs(u @ r), abs(v @ r), abs(u @ v)) > 1e-12:
            raise GeometryError("ray frame (u_hat, v_hat, direction) must be orthogonal")
        if not self.slant_range > 0:
            raise GeometryError("slant_range must be positive")


def _resolve_ray_frame(direction, state):
    """Frame and slant basis for a ray: sensor axes when a pose is given."""
    if state is None:
        return _complete_ray_frame(direction)
    u0 = state.m_enu[0]
    u_hat = u0 - (u0 @ direction) * direction
    nrm = np.linalg.norm(u_hat)
    if nrm < 1e-9:
        raise GeometryError("sensor X axis is parallel to the ray direction")
    u_hat = u_hat / nrm
    v_hat = np.cross(direction, u_hat)
    return u_hat, v_hat


def _resolve_slant_range(direction, state, altitude, slant_range):
    if slant_range is not None:
        return float(slant_range)
    if state is not None:
        return float(state.slant_range)
    if altitude is not None:
        up = direction[2]
        if up <= 1e-9:
            raise GeometryError("ray does not point above the horizon; cannot infer slant range")
        return float(altitude) / up
    raise GeometryError("one of state, altitude, or slant_range is required")


@dataclass
class AffineCamera:
    """Parallel-projection camera over a tile: (u, v) = (A0.x + a03, A1.x + a13).

    The 2x2 Gram matrix inverse used for back-projection is computed once and
    cached; it is identical for every pixel within the tile.
    """

    a0: np.ndarray
    a03: float
    a1: np.ndarray
    a13: float
    bounds: np.ndarray  # (3, 2) validity box, local meters
    rms_residual: float = 0.0
    _gram_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.a0 = np.asarray(self.a0, dtype=float)
        self.a1 = np.asarray(self.a1, dtype=float)
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(3, 2)
        cross = np.cross(self.a0, self.a1)
        if np.linalg.norm(cross) <= 1e-12 * np.linalg.norm(self.a0) * np.linalg.norm(self.a1):
            raise GeometryError("affine camera rows are linearly dependent")
        gram = np.array(
            [
                [self.a0 @ self.a0, self.a0 @ self.a1],
                [self.a0 @ self.a1, self.a1 @ self.a1],
            ]
        )
        det = np.linalg.det(gram)
        if abs(det) < 1e-12 * max(gram[0, 0], gram[1, 1]) ** 2:
            raise GeometryError("affine camera Gram matrix is singular")
        self._gram_inv = np.linalg.inv(gram)

    def project(self, xyz):
        xyz = np.asarray(xyz, dtype=float)
        return xyz @ self.a0 + self.a03, xyz @ self.a1 + self.a13

    @property
    def direction(self):
        """Shared unit ray direction, oriented from scene toward sensor."""
        r = np.cross(self.a0, self.a1)
        r = r / np.linalg.norm(r)
        return -r if r[2] < 0 else r

    def to_dict(self):
        return {
            "a0": self.a0.tolist(),
            "a03": float(self.a03),
            "a1": self.a1.tolist(),
            "a13": float(self.a13),
            "bounds": self.bounds.tolist(),
            "rms_residual": float(self.rms_residual),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            a0=np.asarray(d["a0"], dtype=float),
            a03=float(d["a03"]),
            a1=np.asarray(d["a1"], dtype=float),
            a13=float(d["a13"]),
            bounds=np.asarray(d["bounds"], dtype=float),
            rms_residual=float(d.get("rms_residual", 0.0)),
        )


def fit_affine_camera(model: RpcModel, tile, frame: TangentFrame, n_samples=100, seed=0):
    """Least-squares affine camera over a tile of the RPC model.

    Correspondences are generated by projecting uniformly sampled local-ENU
    points through the RPC; the 8 affine parameters come from two independent
    linear regressions.  The reported residual is the in-sample RMS
    reprojection error in pixels.
    """
    tile = np.asarray(tile, dtype=float).reshape(3, 2)
    if n_samples < 8:
        raise FitError("affine fit needs at least 8 samples")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(tile[:, 0], tile[:, 1], size=(int(n_samples), 3))
    lon, lat, h = frame.enu_to_geodetic(pts)
    line, samp = model.project(lon, lat, h)
    design = np.column_stack([pts, np.ones(len(pts))])
    sol, _, rank, _ = np.linalg.lstsq(design, np.column_stack([line, samp]), rcond=None)
    if rank < 4:
        raise FitError("degenerate tile: affine normal equations are rank deficient")
    a0, a03 = sol[:3, 0], sol[3, 0]
    a1, a13 = sol[:3, 1], sol[3, 1]
    fitted = design @ sol
    resid = np.column_stack([line, samp]) - fitted
    rms = float(np.sqrt(np.mean(np.sum(resid**2, axis=1) / 2.0)))
    return AffineCamera(a0=a0, a03=a03, a1=a1, a13=a13, bounds=tile, rms_residual=rms)


def affine_ray(cam: AffineCamera, u, v, state=None, altitude=None, slant_range=None) -> Ray:
    """Ray of pixel (u, v) under an affine camera.

    The ray origin is the minimum-norm point p = b0*A0 + b1*A1 solving the
    projection equations; the direction is the cached cross product of the
    camera rows, oriented skyward.
    """
    beta = cam._gram_inv @ np.array([u - cam.a03, v - cam.a13], dtype=float)
    origin = beta[0] * cam.a0 + beta[1] * cam.a1
    direction = cam.direction
    u_hat, v_hat = _resolve_ray_frame(direction, state)
    slant = _resolve_slant_range(direction, state, altitude, slant_range)
    return Ray(direction=direction, origin=origin, u_hat=u_hat, v_hat=v_hat, slant_range=slant)


def _invert_rpc_at_height(model: RpcModel, u, v, h, max_iter=20, tol_px=1e-9):
    """Newton solve for the geodetic (lon, lat) projecting to (u, v) at height h."""
    l = 0.0
    p = 0.0
    w = (h - model.height_off) / model.height_scale
    delta = 1e-6

    def residual(lv, pv):
        terms = poly_terms(lv, pv, w)
        den_l = terms @ model.line_den
        den_s = terms @ model.samp_den
        if abs(den_l) < _DEN_FLOOR or abs(den_s) < _DEN_FLOOR:
            raise ProjectionError("RPC denominator vanished during back-projection")
        line = (terms @ model.line_num) / den_l * model.line_scale + model.line_off
        samp = (terms @ model.samp_num) / den_s * model.samp_scale + model.samp_off
        return np.array([line - u, samp - v])

    for _ in range(max_iter):
        r0 = residual(l, p)
        if np.max(np.abs(r0)) < tol_px:
            break
        jac = np.column_stack(
            [(residual(l + delta, p) - r0) / delta, (residual(l, p + delta) - r0) / delta]
        )
        try:
            step = np.linalg.solve(jac, r0)
        except np.linalg.LinAlgError as exc:
            raise ProjectionError("singular Jacobian in two-plane back-projection") from exc
        l -= step[0]
        p -= step[1]
    else:
        if np.max(np.abs(residual(l, p))) >= tol_px:
            raise ProjectionError("two-plane back-projection did not converge")
    return l * model.lon_scale + model.lon_off, p * model.lat_scale + model.lat_off


def back_project_two_planes(
    model: RpcModel, u, v, h0, h1, frame: TangentFrame,
    state=None, altitude=None, slant_range=None,
) -> Ray:
    """Ray through the two constant-height solutions of the RPC inverse.

    Solves the forward projection for (u, v) at heights h0 and h1 by 2-d
    Newton iteration and joins the solutions in the local ENU frame, oriented
    from the h0 plane upward.
    """
    if h0 == h1:
        raise GeometryError("two-plane back-projection requires distinct heights")
    if h1 < h0:
        h0, h1 = h1, h0
    lon0, lat0 = _invert_rpc_at_height(model, u, v, h0)
    lon1, lat1 = _invert_rpc_at_height(model, u, v, h1)
    p0 = frame.geodetic_to_enu(lon0, lat0, h0)
    p1 = frame.geodetic_to_enu(lon1, lat1, h1)
    direction = p1 - p0
    nrm = np.linalg.norm(direction)
    if nrm < 1e-12:
        raise GeometryError("degenerate two-plane solutions")
    direction = direction / nrm
    if direction[2] < 0:
        direction = -direction
    u_hat, v_hat = _resolve_ray_frame(direction, state)
    slant = _resolve_slant_range(direction, state, altitude, slant_range)
    return Ray(direction=direction, origin=p0, u_hat=u_hat, v_hat=v_hat, slant_range=slant)
