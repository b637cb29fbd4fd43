"""Ray intersection solvers, MIG propagation, Monte Carlo, and ellipsoids.

Oracles: a closed-form two-line midpoint, the chi-square quantile from
scipy.stats, an independently assembled linear-estimator covariance, and
brute-force objective evaluation for the optimality probe.
"""

import numpy as np
import pytest
import scipy.stats

from conftest import two_line_midpoint

from geoprop.errors import CovarianceError, GeometryError, RefinementError
from geoprop.intersect import (
    ErrorEllipsoid,
    RayBundle,
    chi_square_quantile,
    error_ellipsoid,
    intersect_unweighted,
    intersect_weighted,
    mig_covariance,
    monte_carlo_scatter,
    refine_intersection,
    unweighted_estimator_covariance,
)
from geoprop.pose import RayCovariance
from geoprop.rpc import Ray, _complete_ray_frame
from geoprop.synth import build_scene_geometry, random_scene


def ray_through(point, direction, slant=600000.0):
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    u_hat, v_hat = _complete_ray_frame(direction)
    return Ray(direction=direction, origin=np.asarray(point, dtype=float),
               u_hat=u_hat, v_hat=v_hat, slant_range=slant)


def random_bundle(rng, n=5, spread=1.0, ray_cov=None, target=None):
    target = np.zeros(3) if target is None else np.asarray(target, dtype=float)
    rays = []
    for _ in range(n):
        az = rng.uniform(0, 2 * np.pi)
        el = rng.uniform(np.radians(40), np.radians(85))
        d = np.array([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)])
        offset = spread * rng.normal(size=3)
        origin = target + (offset @ d) * d  # slide along the ray; line still hits target
        rays.append(ray_through(origin, d))
    return RayBundle(rays=rays, ray_cov=ray_cov)


def weighted_objective(bundle, x):
    """Direct evaluation of the covariance-weighted squared-residual objective."""
    n = len(bundle)
    s = np.eye(2 * n) if bundle.ray_cov is None else bundle.ray_cov.matrix
    pi = bundle.projection_stack
    resid = bundle.plane_offsets - pi @ np.asarray(x, dtype=float)
    return resid @ np.linalg.solve(s, resid)


# ---------------------------------------------------------------------------
# Unweighted intersection

def test_two_orthogonal_rays_exact():
    target = np.array([1.0, 2.0, 3.0])
    b = RayBundle(rays=[
        ray_through(target, [0.0, 0.3, 1.0]),
        ray_through(target, [0.3, 0.0, 1.0]),
    ])
    assert np.allclose(intersect_unweighted(b), target, atol=1e-12)


def test_two_skew_rays_give_common_perpendicular_midpoint():
    p0, r0 = np.array([0.0, 0.0, 0.0]), np.array([0.2, 0.1, 1.0])
    p1, r1 = np.array([3.0, -1.0, 0.5]), np.array([-0.3, 0.2, 1.0])
    b = RayBundle(rays=[ray_through(p0, r0), ray_through(p1, r1)])
    x = intersect_unweighted(b)
    mid = two_line_midpoint(p0, r0 / np.linalg.norm(r0), p1, r1 / np.linalg.norm(r1))
    assert np.allclose(x, mid, atol=1e-9)


def test_seventeen_consistent_rays_recover_point():
    rng = np.random.default_rng(1)
    target = np.array([10.0, -20.0, 5.0])
    b = random_bundle(rng, n=17, target=target)
    assert np.linalg.norm(intersect_unweighted(b) - target) < 1e-9


def test_parallel_bundle_rejected():
    d = np.array([0.1, 0.2, 1.0])
    with pytest.raises(GeometryError):
        RayBundle(rays=[ray_through([0, 0, 0], d), ray_through([1, 0, 0], d)])


# ---------------------------------------------------------------------------
# Weighted intersection

def test_isotropic_covariance_reverts_to_unweighted():
    rng = np.random.default_rng(2)
    for k in range(10):
        n = int(rng.integers(2, 9))
        cov = RayCovariance(matrix=2.5 * np.eye(2 * n), n_images=n)
        b = random_bundle(rng, n=n, ray_cov=cov)
        xw = intersect_weighted(b).point
        xu = intersect_unweighted(b)
        assert np.linalg.norm(xw - xu) < 1e-9


def test_tiny_variance_ray_dominates():
    p0, r0 = np.array([0.0, 0.0, 0.0]), np.array([0.2, 0.1, 1.0])
    p1, r1 = np.array([3.0, -1.0, 0.5]), np.array([-0.3, 0.2, 1.0])
    cov = RayCovariance(matrix=np.diag([1e-12, 1e-12, 1.0, 1.0]), n_images=2)
    b = RayBundle(rays=[ray_through(p0, r0), ray_through(p1, r1)], ray_cov=cov)
    x = intersect_weighted(b).point
    r0n = r0 / np.linalg.norm(r0)
    dist_to_ray0 = np.linalg.norm((x - p0) - ((x - p0) @ r0n) * r0n)
    assert dist_to_ray0 < 1e-5


def test_weighted_covariance_matches_estimator_ensemble():
    """1e5 draws of ray displacements from S_eps: the weighted estimates'
    sample covariance must match P = A~^-1 within 5% Frobenius."""
    rng = np.random.default_rng(3)
    scene = random_scene(rng, 9, pass_fraction=0.4)
    geo = build_scene_geometry(scene)
    mc = monte_carlo_scatter(
        geo.bundle, geo.pose_cov, geo.jacobian, n_samples=100_000, seed=11, weighted=True
    )
    p = intersect_weighted(geo.bundle).covariance
    assert np.linalg.norm(mc.sample_cov - p) / np.linalg.norm(p) < 0.05


def test_weighted_result_reports_residuals():
    rng = np.random.default_rng(4)
    b = random_bundle(rng, n=6)
    res = intersect_weighted(b)
    assert res.ray_distances.shape == (6,)
    assert res.weighted_residual >= 0.0
    assert np.all(res.ray_distances < 1e-9)  # consistent bundle


def test_weighted_objective_local_minimum_probe():
    rng = np.random.default_rng(5)
    scene = random_scene(rng, 7, pass_fraction=0.5)
    geo = build_scene_geometry(scene)
    # displace origins so the objective is nontrivial
    rays = [
        Ray(direction=r.direction,
            origin=r.origin + 0.5 * rng.normal(size=1) * r.u_hat + 0.5 * rng.normal(size=1) * r.v_hat,
            u_hat=r.u_hat, v_hat=r.v_hat, slant_range=r.slant_range)
        for r in geo.bundle.rays
    ]
    b = RayBundle(rays=rays, ray_cov=geo.bundle.ray_cov)
    res = intersect_weighted(b)
    d0 = weighted_objective(b, res.point)
    for _ in range(100):
        delta = rng.normal(size=3)
        delta = 0.01 * delta / np.linalg.norm(delta)
        assert d0 <= weighted_objective(b, res.point + delta) + 1e-12


def test_weighted_volume_never_exceeds_unweighted():
    rng = np.random.default_rng(6)
    for k in range(10):
        scene = random_scene(rng, int(rng.integers(3, 12)), pass_fraction=0.5,
                             sensors=("worldview3", "quickbird", "geoeye1"))
        geo = build_scene_geometry(scene)
        det_w = np.linalg.det(intersect_weighted(geo.bundle).covariance)
        det_u = np.linalg.det(unweighted_estimator_covariance(geo.bundle))
        assert det_w <= det_u * (1.0 + 1e-9)


def test_volume_equality_for_isotropic_covariance():
    rng = np.random.default_rng(7)
    n = 6
    cov = RayCovariance(matrix=0.7 * np.eye(2 * n), n_images=n)
    b = random_bundle(rng, n=n, ray_cov=cov)
    det_w = np.linalg.det(intersect_weighted(b).covariance)
    det_u = np.linalg.det(unweighted_estimator_covariance(b))
    assert abs(det_w - det_u) < 1e-9 * det_u


def test_rotation_equivariance():
    """Rigidly rotating rays and frames rotates X and conjugates P."""
    rng = np.random.default_rng(8)
    scene = random_scene(rng, 8, pass_fraction=0.4)
    geo = build_scene_geometry(scene)
    rays = [
        Ray(direction=r.direction,
            origin=r.origin + 0.3 * rng.normal(size=1) * r.u_hat,
            u_hat=r.u_hat, v_hat=r.v_hat, slant_range=r.slant_range)
        for r in geo.bundle.rays
    ]
    b = RayBundle(rays=rays, ray_cov=geo.bundle.ray_cov)
    res = intersect_weighted(b)

    theta = 0.7
    rot = np.array(
        [[np.cos(theta), -np.sin(theta), 0.0], [np.sin(theta), np.cos(theta), 0.0], [0.0, 0.0, 1.0]]
    )
    rotated = RayBundle(
        rays=[
            Ray(direction=rot @ r.direction, origin=rot @ r.origin, u_hat=rot @ r.u_hat,
                v_hat=rot @ r.v_hat, slant_range=r.slant_range)
            for r in b.rays
        ],
        ray_cov=b.ray_cov,
    )
    res_rot = intersect_weighted(rotated)
    assert np.allclose(res_rot.point, rot @ res.point, atol=1e-9)
    assert np.allclose(res_rot.covariance, rot @ res.covariance @ rot.T, atol=1e-9)


def test_two_identical_variance_rays_equal_midpoint():
    p0, r0 = np.array([0.0, 0.0, 0.0]), np.array([0.2, 0.1, 1.0])
    p1, r1 = np.array([3.0, -1.0, 0.5]), np.array([-0.3, 0.2, 1.0])
    cov = RayCovariance(matrix=0.4 * np.eye(4), n_images=2)
    b = RayBundle(rays=[ray_through(p0, r0), ray_through(p1, r1)], ray_cov=cov)
    x = intersect_weighted(b).point
    mid = two_line_midpoint(p0, r0 / np.linalg.norm(r0), p1, r1 / np.linalg.norm(r1))
    assert np.allclose(x, mid, atol=1e-9)


# ---------------------------------------------------------------------------
# MIG propagation

def test_mig_matches_weighted_intersection_covariance():
    rng = np.random.default_rng(9)
    scene = random_scene(rng, 12, pass_fraction=0.5,
                         sensors=("worldview3", "worldview1", "quickbird"))
    geo = build_scene_geometry(scene)
    p_mig = mig_covariance(geo.bundle.projection_stack, geo.jacobian, geo.pose_cov.matrix)
    p_w = intersect_weighted(geo.bundle).covariance
    assert np.linalg.norm(p_mig - p_w) / np.linalg.norm(p_w) < 1e-8


def test_mig_identity_case():
    rng = np.random.default_rng(10)
    q, _ = np.linalg.qr(rng.normal(size=(8, 3)))
    b_point = q  # orthonormal columns
    b_pose = np.eye(8)
    sigma = np.eye(8)
    p = mig_covariance(b_point, b_pose, sigma)
    assert np.allclose(p, np.linalg.inv(b_point.T @ b_point), atol=1e-12)


def test_mig_output_psd_for_random_psd_input():
    rng = np.random.default_rng(11)
    for _ in range(10):
        b_point = rng.normal(size=(10, 3))
        b_pose = rng.normal(size=(10, 25))
        half = rng.normal(size=(25, 25))
        sigma = half @ half.T + 1e-6 * np.eye(25)
        p = mig_covariance(b_point, b_pose, sigma)
        assert np.all(np.linalg.eigvalsh(p) > 0)
        assert np.allclose(p, p.T, atol=1e-15)


# ---------------------------------------------------------------------------
# Refinement

def test_refine_zero_residual_is_fixed_point():
    rng = np.random.default_rng(12)
    b = random_bundle(rng, n=5)
    x0 = intersect_weighted(b).point
    obs = b.projection_stack @ x0
    x = refine_intersection(x0, b, observations=obs)
    assert np.allclose(x, x0, atol=1e-12)


def test_refine_converges_in_one_step_from_perturbed_start():
    rng = np.random.default_rng(13)
    scene = random_scene(rng, 6, pass_fraction=0.5)
    geo = build_scene_geometry(scene)
    target = intersect_weighted(geo.bundle).point
    x = refine_intersection(target + rng.normal(size=3), geo.bundle)
    assert np.linalg.norm(x - target) < 1e-6


def test_refine_far_start_same_fixed_point():
    rng = np.random.default_rng(14)
    scene = random_scene(rng, 6, pass_fraction=0.3)
    geo = build_scene_geometry(scene)
    target = intersect_weighted(geo.bundle).point
    far = target + 100.0 * rng.normal(size=3)
    assert np.linalg.norm(refine_intersection(far, geo.bundle) - target) < 1e-6


def test_refine_reports_last_iterate_on_failure():
    rng = np.random.default_rng(15)
    b = random_bundle(rng, n=4)
    with pytest.raises(RefinementError) as info:
        refine_intersection(np.zeros(3), b, tol=0.0, max_iter=3)
    assert info.value.last_estimate is not None


# ---------------------------------------------------------------------------
# Monte Carlo

def test_monte_carlo_zero_covariance_collapses():
    rng = np.random.default_rng(16)
    b = random_bundle(rng, n=4)
    pose_cov = np.zeros((20, 20))
    jac = np.zeros((8, 20))
    mc = monte_carlo_scatter(b, pose_cov, jac, n_samples=50, seed=5)
    assert np.all(mc.points == mc.points[0])
    assert np.array_equal(mc.sample_cov, np.zeros((3, 3)))


def test_monte_carlo_seed_determinism():
    rng = np.random.default_rng(17)
    scene = random_scene(rng, 5, pass_fraction=0.5)
    geo = build_scene_geometry(scene)
    a = monte_carlo_scatter(geo.bundle, geo.pose_cov, geo.jacobian, 1000, seed=42)
    b = monte_carlo_scatter(geo.bundle, geo.pose_cov, geo.jacobian, 1000, seed=42)
    assert np.array_equal(a.points, b.points)
    c = monte_carlo_scatter(geo.bundle, geo.pose_cov, geo.jacobian, 1000, seed=43)
    assert not np.array_equal(a.points, c.points)


def test_monte_carlo_thread_count_invariance():
    rng = np.random.default_rng(18)
    scene = random_scene(rng, 7, pass_fraction=0.4)
    geo = build_scene_geometry(scene)
    ref = monte_carlo_scatter(geo.bundle, geo.pose_cov, geo.jacobian, 20000, seed=9, n_threads=1)
    for threads in (4, 16):
        other = monte_carlo_scatter(
            geo.bundle, geo.pose_cov, geo.jacobian, 20000, seed=9, n_threads=threads
        )
        assert np.array_equal(ref.points, other.points)


def test_monte_carlo_unweighted_matches_sandwich_covariance():
    """Sample covariance of unweighted intersections vs the independently
    assembled linear-estimator covariance A^-1 (sum_ij P_i S_ij P_j) A^-1."""
    rng = np.random.default_rng(19)
    scene = random_scene(rng, 11, pass_fraction=0.5)
    geo = build_scene_geometry(scene)
    mc = monte_carlo_scatter(geo.bundle, geo.pose_cov, geo.jacobian, 100_000, seed=21)

    bundle = geo.bundle
    n = len(bundle)
    s_eps = bundle.ray_cov.matrix
    a = bundle.orthogonal_projectors.sum(axis=0)
    a_inv = np.linalg.inv(a)
    axes = bundle.plane_axes
    middle = np.zeros((3, 3))
    for i in range(n):
        for j in range(n):
            hi = axes[i].T  # 3x2: columns u_hat, v_hat
            hj = axes[j].T
            middle += hi @ s_eps[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] @ hj.T
    oracle = a_inv @ middle @ a_inv
    assert np.linalg.norm(mc.sample_cov - oracle) / np.linalg.norm(oracle) < 0.05
    assert np.linalg.norm(unweighted_estimator_covariance(bundle) - oracle) < 1e-12


def test_monte_carlo_rejects_indefinite_pose_covariance():
    rng = np.random.default_rng(20)
    b = random_bundle(rng, n=2)
    bad = np.diag([1.0, -1.0] + [0.0] * 8)
    with pytest.raises(CovarianceError):
        monte_carlo_scatter(b, bad, np.zeros((4, 10)), 100, seed=0)


# ---------------------------------------------------------------------------
# Ellipsoids

def test_chi_square_quantile_against_scipy():
    for conf in (0.5, 0.9, 0.95, 0.99):
        assert abs(chi_square_quantile(conf, 3) - scipy.stats.chi2.ppf(conf, 3)) < 1e-9


def test_identity_covariance_ellipsoid_axes():
    e = error_ellipsoid(np.eye(3), 0.9)
    assert np.allclose(e.semi_axes, np.sqrt(6.251388631170325), atol=1e-4)
    assert np.allclose(e.semi_axes, 2.5003, atol=1e-3)


def test_diagonal_covariance_axis_alignment():
    e = error_ellipsoid(np.diag([9.0, 4.0, 1.0]), 0.9)
    assert np.allclose(np.abs(e.rotation), np.eye(3), atol=1e-12)
    assert e.semi_axes[0] > e.semi_axes[1] > e.semi_axes[2]


def test_ellipsoid_scaling_homogeneity():
    p = np.array([[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.0]])
    e1 = error_ellipsoid(p, 0.9)
    e4 = error_ellipsoid(4.0 * p, 0.9)
    assert np.allclose(e4.semi_axes, 2.0 * e1.semi_axes, rtol=1e-12)


def test_ellipsoid_rotation_right_handed():
    rng = np.random.default_rng(21)
    for _ in range(20):
        half = rng.normal(size=(3, 3))
        e = error_ellipsoid(half @ half.T, 0.9)
        assert abs(np.linalg.det(e.rotation) - 1.0) < 1e-9
        assert isinstance(e, ErrorEllipsoid)


def test_ellipsoid_rejects_negative_eigenvalue():
    with pytest.raises(CovarianceError):
        error_ellipsoid(np.diag([1.0, 1.0, -0.5]), 0.9)


def test_weighted_samples_fall_inside_own_ellipsoid():
    """Self-consistency: ~90% of weighted sample estimates lie inside the 90%
    ellipsoid of the reported covariance (Mahalanobis vs chi-square oracle)."""
    rng = np.random.default_rng(22)
    scene = random_scene(rng, 17, pass_fraction=0.3)
    geo = build_scene_geometry(scene)
    res = intersect_weighted(geo.bundle)
    mc = monte_carlo_scatter(
        geo.bundle, geo.pose_cov, geo.jacobian, n_samples=50_000, seed=4, weighted=True
    )
    d = mc.points - res.point
    m2 = np.einsum("si,ij,sj->s", d, np.linalg.inv(res.covariance), d)
    frac = float((m2 <= scipy.stats.chi2.ppf(0.9, 3)).mean())
    assert abs(frac - 0.9) < 0.01


def test_barely_nonparallel_bundle_is_degenerate():
    d0 = np.array([0.0, 0.0, 1.0])
    theta = 1.5e-6  # above the bundle validity floor, beyond the solver's conditioning
    d1 = np.array([np.sin(theta), 0.0, np.cos(theta)])
    b = RayBundle(rays=[
        ray_through([0.0, 0.0, 0.0], d0),
        ray_through([1.0, 0.0, 0.0], d1),
    ])
    with pytest.raises(GeometryError):
        intersect_unweighted(b)
    with pytest.raises(GeometryError):
        intersect_weighted(b)


def test_mig_singular_weight_construction():
    b_point = np.eye(4, 3)
    b_pose = np.zeros((4, 10))
    with pytest.raises(CovarianceError):
        mig_covariance(b_point, b_pose, np.eye(10))
