"""Satellite pose frames, pose covariance assembly, and ray-displacement propagation.

Pose error per image is a 5-vector over (dI, dC, dR, omega, phi): position
error in the in-track/cross-track/radial orbital frame plus small attitude
angles about the sensor X and Y axes.  Rotation about the boresight (kappa)
never moves the ray intersection point and is dropped from the covariance.
The Jacobian maps those errors to ray-origin displacements

    eps_u = dU + |R| * phi        eps_v = dV - |R| * omega

where (dU, dV) is the position error rotated into the sensor frame and |R|
is the sensor-to-scene slant range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CovarianceError, GeometryError
from .geodesy import EARTH_RADIUS, GeodeticPoint, TangentFrame, enu_to_ecf_rotation

_PARAMS_PER_IMAGE = 5  # (dI, dC, dR, omega, phi)


@dataclass(frozen=True)
class ImagePoseSpec:
    """Viewing geometry of one satellite image, from standard metadata.

    Azimuth is degrees clockwise from North; elevation is degrees above the
    tangent plane (90 = nadir).  The scan direction is given as an angle from
    East in the local ENU plane; 270 is the common North-to-South scan.
    """

    image_id: str
    azimuth_deg: float
    elevation_deg: float
    altitude_m: float
    inclination_deg: float
    origin: GeodeticPoint
    scan_theta_deg: float = 270.0
    pass_id: str | None = None

    def __post_init__(self):
        if not 0.0 < self.elevation_deg <= 90.0:
            raise ValueError(f"elevation {self.elevation_deg} outside (0, 90]")
        if self.altitude_m <= 0:
            raise ValueError("orbit altitude must be positive")


@dataclass(frozen=True)
class PoseErrorSpec:
    """Per-image pose error variances (m^2 and rad^2) and same-pass correlation."""

    pos_var: float
    omega_var: float
    phi_var: float
    kappa_var: float = 0.0
    rho: float = 0.8

    def __post_init__(self):
        for name in ("pos_var", "omega_var", "phi_var", "kappa_var"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("correlation rho must lie strictly inside (-1, 1)")


def _spec_from_stddev(pos_std, att_std, rho=0.8):
    return PoseErrorSpec(
        pos_var=pos_std**2,
        omega_var=att_std**2,
        phi_var=att_std**2,
        kappa_var=2.0 * att_std**2,
        rho=rho,
    )


#: Published per-platform pose error standard deviations (position m, attitude rad).
SENSOR_ERROR_SPECS = {
    "geoeye1": _spec_from_stddev(0.7071, 2.0e-6),
    "quickbird": _spec_from_stddev(1.0, 23.203e-6),
    "worldview1": _spec_from_stddev(0.7071, 3.742e-6),
    "worldview2": _spec_from_stddev(0.7071, 2.83e-6),
    "worldview3": _spec_from_stddev(0.7071, 2.83e-6),
}


@dataclass(frozen=True)
class SatelliteState:
    """Satellite position and frames for one image.

    ``m`` rotates ecf into the sensor frame (rows are the sensor axes in ecf);
    ``m_enu`` rotates the local ENU frame into the sensor frame, so its rows
    are the sensor axes expressed in ENU.
    """

    position_ecf: np.ndarray
    t_icr_to_ecf: np.ndarray
    m: np.ndarray
    m_enu: np.ndarray
    slant_range: float

    def __post_init__(self):
        for name in ("position_ecf", "t_icr_to_ecf", "m", "m_enu"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("t_icr_to_ecf", "m", "m_enu"):
            rot = getattr(self, name)
            if np.max(np.abs(rot @ rot.T - np.eye(3))) > 1e-9:
                raise GeometryError(f"{name} is not orthonormal")
        if self.slant_range <= 0:
            raise GeometryError("slant_range must be positive")


@dataclass(frozen=True)
class PoseCovariance:
    """Joint 5n x 5n covariance of (dI, dC, dR, omega, phi) across n images."""

    matrix: np.ndarray
    n_images: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        dim = _PARAMS_PER_IMAGE * self.n_images
        if m.shape != (dim, dim):
            raise CovarianceError(f"pose covariance must be {dim}x{dim}, got {m.shape}")
        m = 0.5 * (m + m.T)
        _require_psd(m, "pose covariance")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class RayCovariance:
    """2n x 2n covariance of per-ray displacements (eps_u, eps_v), meters^2."""

    matrix: np.ndarray
    n_images: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        dim = 2 * self.n_images
        if m.shape != (dim, dim):
            raise CovarianceError(f"ray covariance must be {dim}x{dim}, got {m.shape}")
        m = 0.5 * (m + m.T)
        _require_psd(m, "ray covariance")
        object.__setattr__(self, "matrix", m)


def _require_psd(m, label):
    trace = float(np.trace(m))
    min_eig = float(np.linalg.eigvalsh(m)[0]) if m.size else 0.0
    if min_eig < -1e-10 * max(trace, 1.0):
        raise CovarianceError(f"{label} is not positive semidefinite (min eig {min_eig:g})")


def ground_track_angle_deg(inclination_deg):
    """Counter-clockwise ground-track angle from East for a descending pass."""
    return 360.0 - inclination_deg


def satellite_direction_enu(azimuth_deg, elevation_deg):
    """Unit vector from the scene origin toward the satellite, in local ENU."""
    az = np.radians(azimuth_deg)
    el = np.radians(elevation_deg)
    return np.array([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)])


def satellite_position(origin_ecf, u_hat_ecf, orbit_radius):
    """Intersect the skyward ray from the origin with the orbit sphere.

    Returns R_s = R_o + k * u_hat with |R_s| = orbit_radius, taking the
    positive root of the ray-sphere quadratic.
    """
    r_o = np.asarray(origin_ecf, dtype=float)
    u = np.asarray(u_hat_ecf, dtype=float)
    b = r_o @ u
    c = r_o @ r_o - orbit_radius**2
    disc = b * b - c
    if disc < 0:
        raise GeometryError("ray from origin does not reach the orbit sphere")
    k = -b + np.sqrt(disc)
    if k <= 0:
        raise GeometryError("orbit sphere intersection lies behind the origin")
    return r_o + k * u


def icr_frame(position_ecf, inclination_deg):
    """In-track/cross-track/radial frame at the satellite, as columns of a rotation.

    The ground-track direction comes from the descending-pass angle
    360 - inclination measured from East in the satellite-nadir ENU frame.
    """
    r_s = np.asarray(position_ecf, dtype=float)
    z_u = r_s / np.linalg.norm(r_s)
    z_ecf = np.array([0.0, 0.0, 1.0])
    x_u = np.cross(z_ecf, z_u)
    nrm = np.linalg.norm(x_u)
    if nrm < 1e-9:
        raise GeometryError("satellite directly over a pole; nadir ENU frame undefined")
    x_u = x_u / nrm
    y_u = np.cross(z_u, x_u)
    theta = np.radians(ground_track_angle_deg(inclination_deg))
    v_enu = np.array([np.cos(theta), np.sin(theta), 0.0])
    v_ecf = np.column_stack([x_u, y_u, z_u]) @ v_enu
    i_hat = v_ecf / np.linalg.norm(v_ecf)
    c_vec = np.cross(r_s, i_hat)
    nrm = np.linalg.norm(c_vec)
    if nrm < 1e-9:
        raise GeometryError("degenerate cross-track direction")
    c_hat = c_vec / nrm
    r_hat = np.cross(i_hat, c_hat)
    return np.column_stack([i_hat, c_hat, r_hat])


def sensor_frame(position_ecf, origin_ecf, scan_enu, origin: GeodeticPoint):
    """Sensor frame rotations (M, M_enu) for a satellite over a scene origin.

    sZ points from the origin to the satellite; sY is normal to the scan
    direction and sZ; sX completes the right-handed frame.  M maps ecf to
    sensor coordinates; M_enu maps the origin's ENU frame to sensor
    coordinates, so its rows are the sensor axes in ENU.
    """
    r_s = np.asarray(position_ecf, dtype=float)
    r_o = np.asarray(origin_ecf, dtype=float)
    t_enu = enu_to_ecf_rotation(origin)
    scan_ecf = t_enu @ np.asarray(scan_enu, dtype=float)
    boresight = r_s - r_o
    nrm = np.linalg.norm(boresight)
    if nrm < 1e-9:
        raise GeometryError("satellite coincides with the scene origin")
    s_z = boresight / nrm
    s_y = np.cross(s_z, scan_ecf)
    nrm = np.linalg.norm(s_y)
    if nrm < 1e-9:
        raise GeometryError("scan direction parallel to the boresight")
    s_y = s_y / nrm
    s_x = np.cross(s_y, s_z)
    m = np.vstack([s_x, s_y, s_z])
    m_enu = m @ t_enu
    return m, m_enu


def build_satellite_state(spec: ImagePoseSpec) -> SatelliteState:
    """Compose position, icr, and sensor frames for one image pose."""
    frame = TangentFrame(spec.origin)
    u_s = satellite_direction_enu(spec.azimuth_deg, spec.elevation_deg)
    u_o = frame.enu_vector_to_ecf(u_s)
    r_o = frame.origin_ecf
    orbit_radius = EARTH_RADIUS + spec.altitude_m
    r_s = satellite_position(r_o, u_o, orbit_radius)
    if abs(np.linalg.norm(r_s) - orbit_radius) > 1e-6:
        raise GeometryError("satellite position does not lie on the orbit sphere")
    t_icr = icr_frame(r_s, spec.inclination_deg)
    theta = np.radians(spec.scan_theta_deg)
    scan_enu = np.array([np.cos(theta), np.sin(theta), 0.0])
    m, m_enu = sensor_frame(r_s, r_o, scan_enu, spec.origin)
    slant = float(np.linalg.norm(r_s - r_o))
    return SatelliteState(
        position_ecf=r_s, t_icr_to_ecf=t_icr, m=m, m_enu=m_enu, slant_range=slant
    )


def assemble_pose_covariance(error_specs, pass_ids) -> PoseCovariance:
    """Block 5n x 5n pose covariance with same-pass correlation.

    Diagonal blocks are diag(pos, pos, pos, omega, phi) variances.  Images
    sharing a pass id receive per-parameter cross covariance
    sqrt(rho_i * rho_j) * sigma_i * sigma_j, which reduces to rho * sigma^2
    for a uniform rho and keeps the matrix positive semidefinite for any
    number of images on a pass.
    """
    specs = list(error_specs)
    ids = list(pass_ids)
    if len(specs) != len(ids):
        raise ValueError("error_specs and pass_ids must have equal length")
    n = len(specs)
    if n < 1:
        raise ValueError("at least one image is required")
    variances = np.array(
        [[s.pos_var] * 3 + [s.omega_var, s.phi_var] for s in specs]
    )
    sigmas = np.sqrt(variances)
    matrix = np.zeros((_PARAMS_PER_IMAGE * n, _PARAMS_PER_IMAGE * n))
    for i in range(n):
        bi = slice(_PARAMS_PER_IMAGE * i, _PARAMS_PER_IMAGE * (i + 1))
        matrix[bi, bi] = np.diag(variances[i])
        for j in range(i + 1, n):
            if ids[i] is None or ids[j] is None or ids[i] != ids[j]:
                continue
            rho_ij = np.sqrt(specs[i].rho * specs[j].rho)
            bj = slice(_PARAMS_PER_IMAGE * j, _PARAMS_PER_IMAGE * (j + 1))
            cross = np.diag(rho_ij * sigmas[i] * sigmas[j])
            matrix[bi, bj] = cross
            matrix[bj, bi] = cross
    return PoseCovariance(matrix=matrix, n_images=n)


def ray_displacement_jacobian(states) -> np.ndarray:
    """Block-diagonal 2n x 5n Jacobian of ray displacements w.r.t. pose errors.

    Per image the position columns are the first two rows of the icr-to-sensor
    rotation M @ T_icr_to_ecf; the attitude columns carry (0, +|R|) for eps_u
    and (-|R|, 0) for eps_v.
    """
    states = list(states)
    n = len(states)
    jac = np.zeros((2 * n, _PARAMS_PER_IMAGE * n))
    for i, st in enumerate(states):
        rot = st.m @ st.t_icr_to_ecf
        r = 2 * i
        c = _PARAMS_PER_IMAGE * i
        jac[r, c : c + 3] = rot[0]
        jac[r + 1, c : c + 3] = rot[1]
        jac[r, c + 4] = st.slant_range
        jac[r + 1, c + 3] = -st.slant_range
    return jac


def ray_covariance(jacobian, pose_cov: PoseCovariance) -> RayCovariance:
    """Propagate pose covariance to ray-displacement covariance J S J^T."""
    jac = np.asarray(jacobian, dtype=float)
    if jac.shape != (2 * pose_cov.n_images, _PARAMS_PER_IMAGE * pose_cov.n_images):
        raise CovarianceError("Jacobian shape does not match pose covariance")
    s_eps = jac @ pose_cov.matrix @ jac.T
    return RayCovariance(matrix=0.5 * (s_eps + s_eps.T), n_images=pose_cov.n_images)


def pose_specs_from_config(cfg: dict):
    """Parse the per-image scene configuration into pose and error specs.

    Each image entry carries {id, pass_id, azimuth_deg, elevation_deg,
    altitude_m, inclination_deg, scan_theta_deg, origin{lon,lat,h}, rho} and
    either explicit ``sigmas`` {pos_m, omega_rad, phi_rad, kappa_rad} or a
    ``sensor`` key naming an entry of SENSOR_ERROR_SPECS.
    """
    poses = []
    errors = []
    for img in cfg["images"]:
        origin = img.get("origin", cfg.get("origin"))
        if origin is None:
            raise ValueError(f"image {img.get('id')} has no origin and no scene default")
        point = GeodeticPoint(
            lon=float(origin["lon"]), lat=float(origin["lat"]), h=float(origin.get("h", 0.0))
        )
        poses.append(
            ImagePoseSpec(
                image_id=str(img["id"]),
                azimuth_deg=float(img["azimuth_deg"]),
                elevation_deg=float(img["elevation_deg"]),
                altitude_m=float(img["altitude_m"]),
                inclination_deg=float(img["inclination_deg"]),
                scan_theta_deg=float(img.get("scan_theta_deg", 270.0)),
                origin=point,
                pass_id=img.get("pass_id"),
            )
        )
        rho = float(img.get("rho", 0.8))
        if "sigmas" in img:
            s = img["sigmas"]
            errors.append(
                PoseErrorSpec(
                    pos_var=float(s["pos_m"]) ** 2,
                    omega_var=float(s["omega_rad"]) ** 2,
                    phi_var=float(s["phi_rad"]) ** 2,
                    kappa_var=float(s.get("kappa_rad", 0.0)) ** 2,
                    rho=rho,
                )
            )
        elif "sensor" in img:
            base = SENSOR_ERROR_SPECS[str(img["sensor"]).lower()]
            errors.append(
                PoseErrorSpec(
                    pos_var=base.pos_var,
                    omega_var=base.omega_var,
                    phi_var=base.phi_var,
                    kappa_var=base.kappa_var,
                    rho=rho,
                )
            )
        else:
            raise ValueError(f"image {img['id']} needs 'sigmas' or 'sensor'")
    return poses, errors
