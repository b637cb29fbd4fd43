"""Shared fixtures and independent oracle helpers.

The geometric helpers here deliberately avoid the library's Jacobian and
covariance code paths: they displace rays from first principles (rigid
translation of the satellite, small rotation of the boresight about the
sensor axes) so finite-difference and Monte Carlo checks stay independent of
what they verify.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from geoprop.geodesy import GeodeticPoint, TangentFrame
from geoprop.pose import ImagePoseSpec, PoseErrorSpec


@pytest.fixture
def origin():
    return GeodeticPoint(lon=-58.5859, lat=-34.4894, h=20.0)


@pytest.fixture
def frame(origin):
    return TangentFrame(origin)


def make_pose(origin, azimuth=130.0, elevation=62.0, altitude=620000.0, image_id="img",
              pass_id=None, scan_theta=270.0):
    return ImagePoseSpec(
        image_id=image_id,
        azimuth_deg=azimuth,
        elevation_deg=elevation,
        altitude_m=altitude,
        inclination_deg=97.7783,
        origin=origin,
        scan_theta_deg=scan_theta,
        pass_id=pass_id,
    )


def worldview3_errors(rho=0.8):
    return PoseErrorSpec(pos_var=0.5, omega_var=8e-12, phi_var=8e-12, kappa_var=16e-12, rho=rho)


def displaced_plane_coords(ray, state, frame, d_icr, omega, phi, kappa=0.0):
    """Ray-origin displacement (eps_u, eps_v) from a physically applied pose error.

    Position error (in-track, cross-track, radial) translates the satellite
    rigidly; attitude error rotates the boresight about the sensor axes at
    the satellite, with the rotation sense that produces
    eps_u = dU + |R| phi and eps_v = dV - |R| omega to first order.  The
    displaced ray is re-intersected with the plane through the original ray
    origin orthogonal to the original direction.  Vectorized over leading
    axes of the error arrays.
    """
    d_icr = np.atleast_2d(np.asarray(d_icr, dtype=float))
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), omega.shape)

    delta_ecf = d_icr @ state.t_icr_to_ecf.T
    delta_enu = frame.ecf_vector_to_enu(delta_ecf)
    sat = ray.origin + ray.slant_range * ray.direction + delta_enu

    rotvec = -(
        omega[:, None] * ray.u_hat + phi[:, None] * ray.v_hat + kappa[:, None] * ray.direction
    )
    new_dir = Rotation.from_rotvec(rotvec).apply(np.broadcast_to(ray.direction, rotvec.shape))

    t = ((sat - ray.origin) @ ray.direction) / (new_dir @ ray.direction)
    q = sat - t[:, None] * new_dir
    d = q - ray.origin
    return np.column_stack([d @ ray.u_hat, d @ ray.v_hat])


def two_line_midpoint(p0, r0, p1, r1):
    """Closed-form midpoint of the common perpendicular segment of two lines."""
    p0, r0, p1, r1 = (np.asarray(v, dtype=float) for v in (p0, r0, p1, r1))
    w = p0 - p1
    a = r0 @ r0
    b = r0 @ r1
    c = r1 @ r1
    d = r0 @ w
    e = r1 @ w
    denom = a * c - b * b
    s = (b * e - c * d) / denom
    t = (a * e - b * d) / denom
    return 0.5 * (p0 + s * r0 + p1 + t * r1)


def poly20_oracle(coeffs, l, p, h):
    """Independent 20-term cubic evaluation from explicit exponent triples."""
    exponents = [
        (0, 0, 0),
        (1, 0, 0), (0, 1, 0), (0, 0, 1),
        (1, 1, 0), (1, 0, 1), (0, 1, 1),
        (2, 0, 0), (0, 2, 0), (0, 0, 2),
        (1, 1, 1),
        (3, 0, 0), (1, 2, 0), (1, 0, 2), (2, 1, 0),
        (0, 3, 0), (0, 1, 2), (2, 0, 1), (0, 2, 1),
        (0, 0, 3),
    ]
    total = 0.0
    for c, (i, j, k) in zip(coeffs, exponents):
        total = total + c * l**i * p**j * h**k
    return total
