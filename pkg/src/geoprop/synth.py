"""Deterministic synthetic scenes, RPC models, and stereo point clouds.

Everything here is a pure function of its parameters and seed, and each
generator hands back the ground truth it was built from so tests and
acceptance checks never re-derive it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .fusion import StereoCloud
from .geodesy import GeodeticPoint, TangentFrame
from .intersect import RayBundle, warn_if_near_parallel
from .pose import (
    SENSOR_ERROR_SPECS,
    ImagePoseSpec,
    PoseCovariance,
    PoseErrorSpec,
    SatelliteState,
    assemble_pose_covariance,
    build_satellite_state,
    pose_specs_from_config,
    ray_covariance,
    ray_displacement_jacobian,
)
from .rpc import Ray, RpcModel, poly_terms

SCENE_TEMPLATES = ("buenos_aires", "wright_patterson", "richmond", "kandahar")

_CUBIC_TERM_INDICES = tuple(range(10, 20))
_FORWARD_REVERSE_SCALE = 0.5  # meters; probability stand-in P = exp(-d^2 / 2 s^2)


# ---------------------------------------------------------------------------
# Surfaces

def plane_surface(z0=0.0, gx=0.0, gy=0.0):
    def z(x, y):
        return z0 + gx * np.asarray(x, dtype=float) + gy * np.asarray(y, dtype=float)

    return z


def step_surface(z_low=0.0, z_high=2.0, edge_x=0.0):
    def z(x, y):
        x = np.asarray(x, dtype=float)
        return np.where(x >= edge_x, z_high, z_low) + 0.0 * np.asarray(y, dtype=float)

    return z


def gable_surface(z0=0.0, ridge_x=0.0, half_width=10.0, ridge_height=4.0):
    def z(x, y):
        x = np.asarray(x, dtype=float)
        rise = ridge_height * np.clip(1.0 - np.abs(x - ridge_x) / half_width, 0.0, None)
        return z0 + rise + 0.0 * np.asarray(y, dtype=float)

    return z


SURFACE_KINDS = {
    "plane": plane_surface,
    "step": step_surface,
    "gable": gable_surface,
}


def make_surface(kind, **params):
    try:
        factory = SURFACE_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown surface kind {kind!r}; choose from {sorted(SURFACE_KINDS)}")
    return factory(**params)


# ---------------------------------------------------------------------------
# Scenes

@dataclass
class SyntheticScene:
    """Image poses with error specs, a truth point, and an optional surface."""

    images: list
    errors: list
    truth_enu: np.ndarray = field(default_factory=lambda: np.zeros(3))
    surface: dict | None = None
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if len(self.images) < 2:
            raise ValueError("a scene needs at least two images")
        if len(self.errors) != len(self.images):
            raise ValueError("one error spec per image is required")
        self.truth_enu = np.asarray(self.truth_enu, dtype=float).reshape(3)
        origins = {(s.origin.lon, s.origin.lat, s.origin.h) for s in self.images}
        if len(origins) != 1:
            raise ValueError("all images in a scene must share the local-frame origin")

    @property
    def origin(self) -> GeodeticPoint:
        return self.images[0].origin

    @property
    def frame(self) -> TangentFrame:
        return TangentFrame(self.origin)


def scene_from_config(cfg: dict) -> SyntheticScene:
    poses, errors = pose_specs_from_config(cfg)
    return SyntheticScene(
        images=poses,
        errors=errors,
        truth_enu=np.asarray(cfg.get("truth_enu", [0.0, 0.0, 0.0]), dtype=float),
        surface=cfg.get("surface"),
        seed=int(cfg.get("seed", 0)),
        name=str(cfg.get("name", "")),
    )


def load_scene_template(name: str) -> dict:
    """Scene configuration for one of the shipped site templates."""
    if name not in SCENE_TEMPLATES:
        raise ValueError(f"unknown scene template {name!r}; choose from {SCENE_TEMPLATES}")
    text = resources.files("geoprop").joinpath(f"data/scenes/{name}.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class SceneGeometry:
    """Bundle, per-image states, and propagation operators for a scene."""

    bundle: RayBundle
    states: list
    pose_cov: PoseCovariance
    jacobian: np.ndarray


def build_scene_geometry(scene: SyntheticScene) -> SceneGeometry:
    """Rays through the truth point with sensor frames and propagated covariance."""
    states = [build_satellite_state(spec) for spec in scene.images]
    pass_ids = [spec.pass_id if spec.pass_id is not None else spec.image_id for spec in scene.images]
    pose_cov = assemble_pose_covariance(scene.errors, pass_ids)
    jacobian = ray_displacement_jacobian(states)
    ray_cov = ray_covariance(jacobian, pose_cov)
    rays = [
        Ray(
            direction=st.m_enu[2],
            origin=scene.truth_enu,
            u_hat=st.m_enu[0],
            v_hat=st.m_enu[1],
            slant_range=st.slant_range,
        )
        for st in states
    ]
    bundle = RayBundle(rays=rays, ray_cov=ray_cov)
    warn_if_near_parallel(bundle)
    return SceneGeometry(bundle=bundle, states=states, pose_cov=pose_cov, jacobian=jacobian)


def make_ray_bundle(scene: SyntheticScene) -> RayBundle:
    """Rays through the scene's truth point, ray covariance attached."""
    return build_scene_geometry(scene).bundle


# ---------------------------------------------------------------------------
# RPC models

@dataclass(frozen=True)
class SyntheticRpc:
    """Generated RPC plus the exact parallel projection it encodes."""

    model: RpcModel
    a0: np.ndarray
    a03: float
    a1: np.ndarray
    a13: float
    direction: np.ndarray
    state: SatelliteState
    tile: np.ndarray
    gsd: float
    perturbation_rms: float


def make_pushbroom_rpc(
    pose: ImagePoseSpec, tile, gsd=0.5, perturbation=0.0, seed=0, lattice=8
) -> SyntheticRpc:
    """RPC realizing the parallel projection of a pose over a local tile.

    The truth projection is affine in the tile's ENU coordinates,
    (line, samp) = (u_hat . X, v_hat . X) / gsd with the pose's sensor axes.
    The 20-term numerators are least-squares fitted to that projection
    composed with the exact geodetic chart over a lattice; the cubic fit
    leaves only the quartic chart remainder (sub-1e-9 px for 500 m tiles), so
    a zero perturbation yields an exactly affine camera for practical
    purposes.  A nonzero perturbation adds degree-3 coefficient noise scaled
    to the requested RMS pixel deviation.
    """
    tile = np.asarray(tile, dtype=float).reshape(3, 2)
    state = build_satellite_state(pose)
    u_hat, v_hat = state.m_enu[0], state.m_enu[1]
    direction = state.m_enu[2]
    frame = TangentFrame(pose.origin)

    axes = [np.linspace(lo, hi, lattice) if hi > lo else np.array([lo]) for lo, hi in tile]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    line_true = pts @ u_hat / gsd
    samp_true = pts @ v_hat / gsd

    lon, lat, h = frame.enu_to_geodetic(pts)
    lon_off, lon_scale = _offset_scale(lon, 1e-9)
    lat_off, lat_scale = _offset_scale(lat, 1e-9)
    h_off, h_scale = _offset_scale(h, 1.0)
    line_off, line_scale = _offset_scale(line_true, 1.0)
    samp_off, samp_scale = _offset_scale(samp_true, 1.0)

    terms = poly_terms(
        (lon - lon_off) / lon_scale, (lat - lat_off) / lat_scale, (h - h_off) / h_scale
    )
    line_num, _, _, _ = np.linalg.lstsq(terms, (line_true - line_off) / line_scale, rcond=None)
    samp_num, _, _, _ = np.linalg.lstsq(terms, (samp_true - samp_off) / samp_scale, rcond=None)

    perturbation_rms = 0.0
    if perturbation > 0:
        rng = np.random.default_rng(seed)
        idx = np.array(_CUBIC_TERM_INDICES)
        c_line = rng.standard_normal(len(idx))
        c_samp = rng.standard_normal(len(idx))
        pl = terms[:, idx] @ c_line * line_scale
        ps = terms[:, idx] @ c_samp * samp_scale
        rms = np.sqrt(np.mean((pl**2 + ps**2) / 2.0))
        scale = perturbation / rms
        line_num[idx] += c_line * scale
        samp_num[idx] += c_samp * scale
        perturbation_rms = float(perturbation)

    den = np.zeros(20)
    den[0] = 1.0
    model = RpcModel(
        line_num=line_num,
        line_den=den,
        samp_num=samp_num,
        samp_den=den.copy(),
        lon_off=lon_off,
        lon_scale=lon_scale,
        lat_off=lat_off,
        lat_scale=lat_scale,
        height_off=h_off,
        height_scale=h_scale,
        line_off=line_off,
        line_scale=line_scale,
        samp_off=samp_off,
        samp_scale=samp_scale,
    )
    return SyntheticRpc(
        model=model,
        a0=u_hat / gsd,
        a03=0.0,
        a1=v_hat / gsd,
        a13=0.0,
        direction=direction,
        state=state,
        tile=tile,
        gsd=float(gsd),
        perturbation_rms=perturbation_rms,
    )


def _offset_scale(values, floor):
    lo, hi = float(np.min(values)), float(np.max(values))
    return 0.5 * (lo + hi), max(0.5 * (hi - lo), floor)


# ---------------------------------------------------------------------------
# Stereo point clouds

def make_stereo_clouds(
    surface,
    n_pairs,
    extent,
    lattice_spacing,
    sigma_xy=0.0,
    sigma_z=0.0,
    outlier_rate=0.0,
    seed=0,
):
    """Per-pair jittered-lattice samples of a surface with noise and outliers.

    Point probabilities mimic a forward/reverse stereo consistency check:
    P = exp(-d^2 / (2 s^2)) with a small simulated discrepancy d for inliers
    and a large one for outliers, so outliers arrive with low probability.
    """
    if not 0.0 <= outlier_rate < 1.0:
        raise ValueError("outlier_rate must lie in [0, 1)")
    if callable(surface):
        z_of = surface
    else:
        z_of = make_surface(surface["kind"], **{k: v for k, v in surface.items() if k != "kind"})
    (xmin, xmax), (ymin, ymax) = extent
    xs = np.arange(xmin + 0.5 * lattice_spacing, xmax, lattice_spacing)
    ys = np.arange(ymin + 0.5 * lattice_spacing, ymax, lattice_spacing)
    gx, gy = np.meshgrid(xs, ys)
    base = np.column_stack([gx.ravel(), gy.ravel()])
    rng = np.random.default_rng(seed)
    s = _FORWARD_REVERSE_SCALE
    clouds = []
    for q in range(int(n_pairs)):
        xy = base + rng.uniform(-0.5, 0.5, base.shape) * lattice_spacing
        if sigma_xy > 0:
            xy = xy + rng.normal(0.0, sigma_xy, xy.shape)
        z = z_of(xy[:, 0], xy[:, 1])
        if sigma_z > 0:
            z = z + rng.normal(0.0, sigma_z, len(z))
        d_fr = np.abs(rng.normal(0.0, 0.3 * s, len(z)))
        if outlier_rate > 0:
            outliers = rng.random(len(z)) < outlier_rate
            z = np.where(
                outliers, z + rng.uniform(30.0, 100.0, len(z)) * rng.choice([-1.0, 1.0], len(z)), z
            )
            d_fr = np.where(outliers, s * rng.uniform(2.2, 3.2, len(z)), d_fr)
        prob = np.clip(np.exp(-(d_fr**2) / (2.0 * s**2)), 1e-6, 1.0)
        clouds.append(
            StereoCloud(pair_id=f"pair_{q:03d}", xyz=np.column_stack([xy, z]), prob=prob)
        )
    return clouds


# ---------------------------------------------------------------------------
# Randomized scenes for validation sweeps

def random_scene(
    rng,
    n_images,
    origin=None,
    sensors=("worldview3",),
    pass_fraction=0.3,
    rho=0.8,
    elevation_range=(45.0, 83.0),
    truth_enu=(0.0, 0.0, 0.0),
) -> SyntheticScene:
    """Random viewing geometry with optional same-pass groups, for sweeps.

    Same-pass groups of 2-4 images are carved off the front of the image list
    until roughly pass_fraction of the images are grouped.
    """
    if origin is None:
        origin = GeodeticPoint(lon=-58.5859, lat=-34.4894, h=20.0)
    altitudes = {
        "geoeye1": 681000.0,
        "quickbird": 450000.0,
        "worldview1": 496000.0,
        "worldview2": 770000.0,
        "worldview3": 620000.0,
    }
    images = []
    errors = []
    grouped = 0
    pass_count = 0
    i = 0
    while i < n_images:
        if grouped < pass_fraction * n_images and n_images - i >= 2:
            size = min(int(rng.integers(2, 5)), n_images - i)
            pass_id = f"pass_{pass_count}"
            pass_count += 1
            grouped += size
        else:
            size = 1
            pass_id = None
        base_az = float(rng.uniform(0.0, 360.0))
        for k in range(size):
            sensor = str(rng.choice(list(sensors)))
            spec = SENSOR_ERROR_SPECS[sensor]
            images.append(
                ImagePoseSpec(
                    image_id=f"img_{i:03d}",
                    azimuth_deg=(base_az + 3.0 * k) % 360.0,
                    elevation_deg=float(rng.uniform(*elevation_range)),
                    altitude_m=altitudes[sensor],
                    inclination_deg=97.7783,
                    origin=origin,
                    pass_id=pass_id,
                )
            )
            errors.append(
                PoseErrorSpec(
                    pos_var=spec.pos_var,
                    omega_var=spec.omega_var,
                    phi_var=spec.phi_var,
                    kappa_var=spec.kappa_var,
                    rho=rho,
                )
            )
            i += 1
    return SyntheticScene(images=images, errors=errors, truth_enu=np.asarray(truth_enu, float))
