"""Multi-ray intersection with covariance weighting and Monte Carlo validation.

The unweighted solver minimizes the sum of squared perpendicular distances
from the point to each ray.  The weighted solver expresses each residual in
the 2-d plane orthogonal to its ray and weights the stacked residual by the
inverse ray-displacement covariance:

    D(X) = (b - Pi X)^T S_eps^-1 (b - Pi X)

with Pi the 2n x 3 stack of per-ray plane projections [u_hat^T; v_hat^T] and
b their application to the ray origins.  The stationary point is

    X = (Pi^T S^-1 Pi)^-1 Pi^T S^-1 b,      P = (Pi^T S^-1 Pi)^-1

so the 3x3 covariance of the intersection point is a byproduct of the solve,
matching the classical multi-image geopositioning propagation implemented in
``mig_covariance``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .errors import CovarianceError, GeometryError, NearParallelWarning, RefinementError
from .pose import RayCovariance

_CONDITION_LIMIT = 1e12
_CONDITION_WARN = 1e4
_MC_CHUNK = 8192  # fixed so results do not depend on the thread count

RNG_ALGORITHM = "pcg64"


@dataclass
class RayBundle:
    """Rays observing a common point in one local frame, with optional covariance."""

    rays: list
    ray_cov: RayCovariance | None = None

    def __post_init__(self):
        if len(self.rays) < 2:
            raise GeometryError("a ray bundle needs at least two rays")
        if self.ray_cov is not None and self.ray_cov.n_images != len(self.rays):
            raise CovarianceError("ray covariance size does not match the bundle")
        dirs = self.directions
        dots = np.clip(np.abs(dirs @ dirs.T), -1.0, 1.0)
        max_angle = np.max(np.arccos(np.clip(dots, 0.0, 1.0)))
        if max_angle <= 1e-6:
            raise GeometryError("all rays are parallel; no intersection geometry")

    def __len__(self):
        return len(self.rays)

    @property
    def directions(self):
        return np.array([r.direction for r in self.rays])

    @property
    def origins(self):
        return np.array([r.origin for r in self.rays])

    @property
    def plane_axes(self):
        """Per-ray 2x3 plane projections, shape (n, 2, 3)."""
        return np.array([[r.u_hat, r.v_hat] for r in self.rays])

    @property
    def projection_stack(self):
        """The 2n x 3 stacked plane-projection operator."""
        return self.plane_axes.reshape(2 * len(self.rays), 3)

    @property
    def plane_offsets(self):
        """Plane coordinates of the ray origins, shape (2n,)."""
        return np.einsum("nkj,nj->nk", self.plane_axes, self.origins).reshape(-1)

    @property
    def orthogonal_projectors(self):
        """Per-ray operators I - r r^T, shape (n, 3, 3)."""
        dirs = self.directions
        return np.eye(3) - np.einsum("ni,nj->nij", dirs, dirs)

    def normal_matrix(self):
        proj = self.projection_stack
        return proj.T @ proj

    def condition_number(self):
        evals = np.linalg.eigvalsh(self.normal_matrix())
        if evals[0] <= 0:
            return np.inf
        return float(evals[-1] / evals[0])


@dataclass(frozen=True)
class IntersectionResult:
    """Weighted intersection point with covariance and residual diagnostics."""

    point: np.ndarray
    covariance: np.ndarray
    weighted_residual: float
    ray_distances: np.ndarray


@dataclass(frozen=True)
class ErrorEllipsoid:
    """Confidence ellipsoid of a 3x3 covariance: descending semi-axes, right-handed axes."""

    center: np.ndarray
    semi_axes: np.ndarray
    rotation: np.ndarray
    confidence: float


@dataclass(frozen=True)
class MonteCarloResult:
    points: np.ndarray
    sample_cov: np.ndarray
    seed: int
    n_samples: int
    weighted: bool
    algorithm: str = RNG_ALGORITHM


def chi_square_quantile(confidence, dof=3):
    """Quantile of the chi-square distribution by bisection on the regularized gamma."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie strictly inside (0, 1)")
    lo, hi = 0.0, 1.0
    while gammainc(dof / 2.0, hi / 2.0) < confidence:
        hi *= 2.0
        if hi > 1e8:
            raise ValueError("chi-square quantile bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gammainc(dof / 2.0, mid / 2.0) < confidence:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(hi, 1.0):
            break
    return 0.5 * (lo + hi)


def _check_condition(matrix, label):
    evals = np.linalg.eigvalsh(matrix)
    if evals[0] <= 0 or evals[-1] / evals[0] >= _CONDITION_LIMIT:
        raise GeometryError(f"{label} is numerically singular (near-parallel bundle)")


def _invert_normal(a_tilde, bundle):
    """Invert the weighted normal matrix after a geometry degeneracy check.

    The geometry condition is checked on the unweighted normal matrix: a
    large spread of covariance weights legitimately stretches the weighted
    normal matrix without the geometry being degenerate.
    """
    _check_condition(bundle.normal_matrix(), "normal matrix")
    evals = np.linalg.eigvalsh(a_tilde)
    if evals[0] <= 0:
        raise GeometryError("weighted normal matrix is singular")
    cov = np.linalg.inv(a_tilde)
    return 0.5 * (cov + cov.T)


def _regularized_inverse(s):
    """Symmetric inverse with an eigenvalue floor for near-singular covariances."""
    s = 0.5 * (s + s.T)
    evals, evecs = np.linalg.eigh(s)
    floor = max(1e-12, 1e-12 * float(np.trace(s)) / s.shape[0])
    if evals[-1] <= 0 or not np.all(np.isfinite(evals)):
        raise CovarianceError("ray covariance is not invertible")
    evals = np.maximum(evals, floor)
    return (evecs / evals) @ evecs.T


def intersect_unweighted(bundle: RayBundle) -> np.ndarray:
    """Point minimizing the sum of squared perpendicular distances to the rays."""
    projectors = bundle.orthogonal_projectors
    a = projectors.sum(axis=0)
    _check_condition(a, "normal matrix")
    rhs = np.einsum("nij,nj->i", projectors, bundle.origins)
    return np.linalg.solve(a, rhs)


def intersect_weighted(bundle: RayBundle) -> IntersectionResult:
    """Covariance-weighted intersection; the normal-matrix inverse is the point covariance."""
    n = len(bundle)
    if bundle.ray_cov is None:
        s_inv = np.eye(2 * n)
    else:
        s_inv = _regularized_inverse(bundle.ray_cov.matrix)
    pi = bundle.projection_stack
    b = bundle.plane_offsets
    a_tilde = pi.T @ s_inv @ pi
    cov = _invert_normal(a_tilde, bundle)
    point = cov @ (pi.T @ (s_inv @ b))
    resid = b - pi @ point
    weighted_residual = float(resid @ (s_inv @ resid))
    perp = np.einsum("nij,nj->ni", bundle.orthogonal_projectors, bundle.origins - point)
    distances = np.linalg.norm(perp, axis=1)
    return IntersectionResult(
        point=point,
        covariance=cov,
        weighted_residual=weighted_residual,
        ray_distances=distances,
    )


def unweighted_estimator_covariance(bundle: RayBundle) -> np.ndarray:
    """Covariance of the unweighted estimator under the bundle's ray covariance.

    The unweighted solution is linear in the ray origins, X = A^-1 Pi^T b with
    A = Pi^T Pi, so its covariance under displacement covariance S is the
    sandwich A^-1 Pi^T S Pi A^-1.  It equals the weighted covariance when
    S is a multiple of the identity.
    """
    n = len(bundle)
    s = np.eye(2 * n) if bundle.ray_cov is None else bundle.ray_cov.matrix
    pi = bundle.projection_stack
    a = pi.T @ pi
    _check_condition(a, "normal matrix")
    g = np.linalg.solve(a, pi.T)
    cov = g @ s @ g.T
    return 0.5 * (cov + cov.T)


def mig_covariance(b_point, b_pose, pose_cov) -> np.ndarray:
    """Classical multi-image geopositioning covariance.

    W = (B_p Sigma_p B_p^T)^-1 weights image-coordinate errors by inverse
    pose-induced covariance; the point covariance is (B^T W B)^-1.
    """
    b_point = np.asarray(b_point, dtype=float)
    b_pose = np.asarray(b_pose, dtype=float)
    sigma = np.asarray(pose_cov, dtype=float)
    image_cov = b_pose @ sigma @ b_pose.T
    try:
        w = np.linalg.inv(image_cov)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError("pose-induced image covariance is singular") from exc
    normal = b_point.T @ w @ b_point
    try:
        cov = np.linalg.inv(normal)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("MIG normal matrix is singular") from exc
    return 0.5 * (cov + cov.T)


def refine_intersection(x0, bundle: RayBundle, observations=None, tol=1e-6, max_iter=20):
    """Iterative update dX = P B^T W (obs - proj) from an initial point.

    For the affine ray model the system is linear and a single step lands on
    the weighted solution; the loop guards the general case.  Raises
    RefinementError carrying the last iterate on non-convergence.
    """
    n = len(bundle)
    if bundle.ray_cov is None:
        s_inv = np.eye(2 * n)
    else:
        s_inv = _regularized_inverse(bundle.ray_cov.matrix)
    pi = bundle.projection_stack
    obs = bundle.plane_offsets if observations is None else np.asarray(observations, dtype=float)
    if obs.shape != (2 * n,):
        raise ValueError(f"observations must have shape ({2 * n},)")
    a_tilde = pi.T @ s_inv @ pi
    cov = _invert_normal(a_tilde, bundle)
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        step = cov @ (pi.T @ (s_inv @ (obs - pi @ x)))
        x = x + step
        if np.linalg.norm(step) < tol:
            return x
    raise RefinementError("intersection refinement did not converge", last_estimate=x)


def _pose_error_factor(pose_matrix):
    evals, evecs = np.linalg.eigh(0.5 * (pose_matrix + pose_matrix.T))
    trace = float(np.trace(pose_matrix))
    if evals[0] < -1e-10 * max(trace, 1.0):
        raise CovarianceError("pose covariance is not positive semidefinite")
    evals = np.clip(evals, 0.0, None)
    return evecs * np.sqrt(evals)


def monte_carlo_scatter(
    bundle: RayBundle,
    pose_cov,
    jacobian,
    n_samples,
    seed,
    weighted=False,
    n_threads=1,
) -> MonteCarloResult:
    """Sample pose errors, displace ray origins, and intersect every sample.

    Pose-error draws come from a symmetric factorization of the pose
    covariance through a seeded PCG64 generator; each draw displaces the ray
    origins by eps_u * u_hat + eps_v * v_hat with eps = J dphi.  Samples are
    intersected with the unweighted solver by default (weighted on request)
    and returned ordered by sample index.  Output is a pure function of the
    seed; the fixed chunk size keeps results identical for any thread count.
    """
    if n_samples < 2:
        raise ValueError("Monte Carlo needs at least two samples")
    n = len(bundle)
    pose_matrix = pose_cov.matrix if hasattr(pose_cov, "matrix") else np.asarray(pose_cov, float)
    jac = np.asarray(jacobian, dtype=float)
    if jac.shape[0] != 2 * n or jac.shape[1] != pose_matrix.shape[0]:
        raise ValueError("Jacobian shape does not match the bundle and pose covariance")
    factor = _pose_error_factor(pose_matrix)
    rng = np.random.default_rng(int(seed))
    draws = rng.standard_normal((int(n_samples), pose_matrix.shape[0]))
    eps = draws @ (jac @ factor).T if factor.size else draws @ jac.T
    del draws

    origins = bundle.origins
    axes = bundle.plane_axes  # (n, 2, 3)
    if weighted:
        if bundle.ray_cov is None:
            s_inv = np.eye(2 * n)
        else:
            s_inv = _regularized_inverse(bundle.ray_cov.matrix)
        pi = bundle.projection_stack
        a_tilde = pi.T @ s_inv @ pi
        gain = _invert_normal(a_tilde, bundle) @ (pi.T @ s_inv)  # (3, 2n)
        projectors = None
        a_mat = None
    else:
        projectors = bundle.orthogonal_projectors
        a_mat = projectors.sum(axis=0)
        _check_condition(a_mat, "normal matrix")
        gain = None

    def solve_chunk(eps_chunk):
        eu = eps_chunk[:, 0::2]
        ev = eps_chunk[:, 1::2]
        pts = origins[None, :, :] + eu[:, :, None] * axes[:, 0, :] + ev[:, :, None] * axes[:, 1, :]
        if weighted:
            b = np.einsum("nkj,snj->snk", axes, pts).reshape(pts.shape[0], 2 * n)
            return b @ gain.T
        rhs = np.einsum("nij,snj->si", projectors, pts)
        return np.linalg.solve(a_mat, rhs.T).T

    chunks = [eps[i : i + _MC_CHUNK] for i in range(0, len(eps), _MC_CHUNK)]
    if n_threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=int(n_threads)) as pool:
            results = list(pool.map(solve_chunk, chunks))
    else:
        results = [solve_chunk(c) for c in chunks]
    points = np.vstack(results)
    # covariance of the shift-reduced points: identical samples give exact zeros
    sample_cov = np.cov(points - points[0], rowvar=False, ddof=1)
    return MonteCarloResult(
        points=points,
        sample_cov=np.atleast_2d(sample_cov),
        seed=int(seed),
        n_samples=int(n_samples),
        weighted=bool(weighted),
    )


def error_ellipsoid(covariance, confidence, center=None) -> ErrorEllipsoid:
    """Confidence ellipsoid of a 3x3 covariance via eigen-decomposition.

    Semi-axis i is sqrt(chi2_3(confidence) * lambda_i), sorted descending,
    with a right-handed eigenvector rotation.
    """
    cov = 0.5 * (np.asarray(covariance, dtype=float) + np.asarray(covariance, dtype=float).T)
    if cov.shape != (3, 3):
        raise ValueError("covariance must be 3x3")
    evals, evecs = np.linalg.eigh(cov)
    trace = float(np.trace(cov))
    if evals[0] < -1e-10 * max(trace, 1.0):
        raise CovarianceError("covariance has a significantly negative eigenvalue")
    evals = np.clip(evals, 0.0, None)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    rotation = evecs[:, order]
    if np.linalg.det(rotation) < 0:
        rotation = rotation.copy()
        rotation[:, 2] = -rotation[:, 2]
    scale = chi_square_quantile(confidence, dof=3)
    semi_axes = np.sqrt(scale * evals)
    center = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    return ErrorEllipsoid(
        center=center, semi_axes=semi_axes, rotation=rotation, confidence=float(confidence)
    )


def warn_if_near_parallel(bundle: RayBundle):
    """Emit NearParallelWarning when the bundle's normal matrix is ill conditioned."""
    cond = bundle.condition_number()
    if cond > _CONDITION_WARN:
        warnings.warn(
            f"ray bundle is near parallel (normal-matrix condition {cond:.3g})",
            NearParallelWarning,
            stacklevel=2,
        )
    return cond
