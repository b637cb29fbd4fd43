"""DSM grids, probability-weighted binning, and consensus elevation fusion.

Each stereo pair contributes a point cloud whose points carry a match
probability.  Points near a grid-cell center are interpolated into a per-pair
elevation with weights w = P / max(d, eps_d); the per-pair horizontal variance
is the probability-weighted mean squared planimetric distance.  Across pairs,
the cell elevation comes from the consensus set maximizing the expected
member count sum(P), and the fused horizontal variance is the probability-
weighted mean of the per-pair variances.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

MIN_PAIRS_FOR_CONFIDENCE = 3


@dataclass
class StereoCloud:
    """Weighted 3-d points from one stereo pair, in the DSM's local frame."""

    pair_id: str
    xyz: np.ndarray
    prob: np.ndarray

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=float).reshape(-1, 3)
        self.prob = np.asarray(self.prob, dtype=float).reshape(-1)
        if len(self.xyz) == 0:
            raise ValueError("stereo cloud must contain at least one point")
        if len(self.prob) != len(self.xyz):
            raise ValueError("prob and xyz lengths differ")
        if not np.all(np.isfinite(self.xyz)) or not np.all(np.isfinite(self.prob)):
            raise ValueError("stereo cloud contains non-finite values")
        if np.any(self.prob <= 0.0) or np.any(self.prob > 1.0):
            raise ValueError("point probabilities must lie in (0, 1]")

    def __len__(self):
        return len(self.prob)


@dataclass(frozen=True)
class GridSpec:
    """Georeferenced raster geometry: origin is the lower-left grid corner."""

    origin_x: float
    origin_y: float
    spacing: float
    width: int
    height: int

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell")

    def x_centers(self):
        return self.origin_x + (np.arange(self.width) + 0.5) * self.spacing

    def y_centers(self):
        return self.origin_y + (np.arange(self.height) + 0.5) * self.spacing

    def cell_centers(self):
        """All cell centers, shape (height*width, 2), row-major with row 0 at the bottom."""
        xs, ys = np.meshgrid(self.x_centers(), self.y_centers())
        return np.column_stack([xs.ravel(), ys.ravel()])


@dataclass
class DsmGrid:
    """Fused surface raster with per-cell vertical and horizontal uncertainty."""

    spec: GridSpec
    z: np.ndarray
    sigma_z: np.ndarray
    sigma_h: np.ndarray
    pbar: np.ndarray
    valid: np.ndarray
    n_pairs: np.ndarray

    @property
    def low_confidence(self):
        """Cells fused from fewer pairs than needed for stable variances."""
        return self.valid & (self.n_pairs < MIN_PAIRS_FOR_CONFIDENCE)


@dataclass
class BinnedPoints:
    """Per-cell neighbor sets: indices into the cloud, planimetric distances, counts."""

    indices: np.ndarray  # (height, width, k), -1 where absent
    distances: np.ndarray  # (height, width, k), nan where absent
    counts: np.ndarray  # (height, width)


def bin_points(cloud: StereoCloud, spec: GridSpec, radius, k_max) -> BinnedPoints:
    """For each cell center, the <= k_max nearest cloud points within radius."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    k_max = int(k_max)
    tree = cKDTree(cloud.xyz[:, :2])
    dist, idx = tree.query(spec.cell_centers(), k=k_max, distance_upper_bound=radius)
    dist = np.atleast_2d(dist).reshape(spec.height * spec.width, k_max)
    idx = np.atleast_2d(idx).reshape(spec.height * spec.width, k_max)
    missing = ~np.isfinite(dist)
    idx = np.where(missing, -1, idx)
    dist = np.where(missing, np.nan, dist)
    counts = (~missing).sum(axis=1)
    shape = (spec.height, spec.width, k_max)
    return BinnedPoints(
        indices=idx.reshape(shape),
        distances=dist.reshape(shape),
        counts=counts.reshape(spec.height, spec.width),
    )


def bin_elevation(z, prob, dist, eps_d):
    """Distance-weighted elevation and probability of one neighbor set.

    Weights are w = P / max(d, eps_d); the floor keeps a point sitting exactly
    on the cell center from swamping the sum.
    """
    z = np.asarray(z, dtype=float)
    prob = np.asarray(prob, dtype=float)
    dist = np.asarray(dist, dtype=float)
    if len(z) == 0:
        raise ValueError("neighbor set is empty")
    w = prob / np.maximum(dist, eps_d)
    wsum = w.sum()
    return float((w * z).sum() / wsum), float((w * prob).sum() / wsum)


def horizontal_variance(prob, dist):
    """Probability-weighted mean squared planimetric distance of a neighbor set."""
    prob = np.asarray(prob, dtype=float)
    dist = np.asarray(dist, dtype=float)
    if len(prob) == 0:
        raise ValueError("neighbor set is empty")
    return float((prob * dist**2).sum() / prob.sum())


def fuse_horizontal(sigma2_list, pbar_list):
    """Combine per-pair horizontal variances weighted by the pair bin probabilities."""
    sigma2 = np.asarray(sigma2_list, dtype=float)
    pbar = np.asarray(pbar_list, dtype=float)
    total = pbar.sum()
    if total <= 0:
        raise ValueError("all pair probabilities are zero; cell is invalid")
    return float((pbar * sigma2).sum() / total)


@dataclass(frozen=True)
class ConsensusResult:
    z_bar: float
    sigma_z: float
    members: np.ndarray  # bool mask over the input values
    seed_index: int


def consensus_fuse(values, probs, tol) -> ConsensusResult:
    """Largest-expected-membership consensus elevation.

    Every value is tried as a seed; the consensus set holds the values within
    tol of the seed and the winner maximizes the probability mass sum(P over
    members).  Ties break to the smallest member standard deviation, then the
    lowest seed index.  The fused elevation and its sigma are the probability-
    weighted mean and standard deviation over the winning set.
    """
    z = np.asarray(values, dtype=float).reshape(-1)
    p = np.asarray(probs, dtype=float).reshape(-1)
    if len(z) == 0:
        raise ValueError("consensus_fuse needs at least one value")
    if len(z) != len(p):
        raise ValueError("values and probs lengths differ")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    within = np.abs(z[None, :] - z[:, None]) < tol  # within[seed, member]
    mass = within @ p
    best_mass = mass.max()
    candidates = np.flatnonzero(mass == best_mass)
    best = candidates[0]
    if len(candidates) > 1:
        best_sigma = np.inf
        for seed in candidates:
            members = within[seed]
            pw = p[members]
            zw = z[members]
            mean = (pw * zw).sum() / pw.sum()
            sigma = np.sqrt((pw * (zw - mean) ** 2).sum() / pw.sum())
            if sigma < best_sigma:
                best_sigma = sigma
                best = seed
    members = within[best]
    pw = p[members]
    zw = z[members]
    z_bar = float((pw * zw).sum() / pw.sum())
    sigma_z = float(np.sqrt((pw * (zw - z_bar) ** 2).sum() / pw.sum()))
    return ConsensusResult(z_bar=z_bar, sigma_z=sigma_z, members=members, seed_index=int(best))


def _pair_bin_stats(cloud: StereoCloud, spec: GridSpec, radius, k_max, eps_d):
    """Vectorized per-cell (z_q, pbar_q, sigma_hq^2, valid) for one cloud."""
    binned = bin_points(cloud, spec, radius, k_max)
    idx = binned.indices
    present = idx >= 0
    safe_idx = np.where(present, idx, 0)
    z = np.where(present, cloud.xyz[:, 2][safe_idx], 0.0)
    p = np.where(present, cloud.prob[safe_idx], 0.0)
    d = np.where(present, binned.distances, np.inf)
    w = np.where(present, p / np.maximum(d, eps_d), 0.0)
    wsum = w.sum(axis=2)
    psum = p.sum(axis=2)
    valid = binned.counts > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        z_q = np.where(valid, (w * z).sum(axis=2) / wsum, np.nan)
        pbar_q = np.where(valid, (w * p).sum(axis=2) / wsum, np.nan)
        d2 = np.where(present, binned.distances**2, 0.0)
        sigma_hq2 = np.where(valid, (p * d2).sum(axis=2) / psum, np.nan)
    return z_q, pbar_q, sigma_hq2, valid


def _consensus_grid(z_q, p_q, valid_q, tol):
    """Vectorized consensus over the pair axis for every cell.

    z_q, p_q, valid_q have shape (n_pairs, height, width).  Mirrors
    consensus_fuse including its tie-break order (mass desc, sigma asc,
    seed index asc).
    """
    m, h, w = z_q.shape
    z = np.where(valid_q, z_q, np.nan).reshape(m, h * w).T  # (cells, m)
    p = np.where(valid_q, p_q, 0.0).reshape(m, h * w).T
    v = valid_q.reshape(m, h * w).T
    with np.errstate(invalid="ignore"):
        within = np.abs(z[:, None, :] - z[:, :, None]) < tol  # (cells, seed, member)
    within &= v[:, None, :] & v[:, :, None]
    mass = np.einsum("csm,cm->cs", within, p)
    mass_key = np.where(v, mass, -np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.einsum("csm,cm->cs", within, p * np.nan_to_num(z)) / np.where(mass > 0, mass, 1.0)
        dev = np.where(within, np.nan_to_num(z)[:, None, :] - mean[:, :, None], 0.0)
        var = np.einsum("csm,cm->cs", dev**2 * within, p) / np.where(mass > 0, mass, 1.0)
    sigma = np.sqrt(np.maximum(var, 0.0))
    seed_idx = np.broadcast_to(np.arange(m), (h * w, m))
    order = np.lexsort((seed_idx, sigma, -mass_key), axis=1)
    best = order[:, 0]
    rows = np.arange(h * w)
    members = within[rows, best]  # (cells, m)
    z_bar = mean[rows, best]
    sigma_z = sigma[rows, best]
    any_valid = v.any(axis=1)
    return (
        np.where(any_valid, z_bar, np.nan).reshape(h, w),
        np.where(any_valid, sigma_z, np.nan).reshape(h, w),
        members.T.reshape(m, h, w),
        any_valid.reshape(h, w),
    )


def fuse_dsm(
    clouds,
    spec: GridSpec,
    radius=None,
    k_max=16,
    tol=0.5,
    eps_d=None,
    n_threads=1,
) -> DsmGrid:
    """Fuse stereo point clouds into a DSM with per-cell uncertainty layers.

    Each cloud is binned separately; the cell elevation and sigma_z come from
    the consensus over per-pair elevations, the fused horizontal sigma from
    all contributing pairs, and pbar from the mean bin probability of the
    consensus members.  Cells never reached by any pair are invalid.
    """
    clouds = list(clouds)
    if not clouds:
        raise ValueError("fuse_dsm needs at least one cloud")
    radius = 1.0 * spec.spacing if radius is None else float(radius)
    eps_d = spec.spacing / 100.0 if eps_d is None else float(eps_d)

    def stats(cloud):
        return _pair_bin_stats(cloud, spec, radius, k_max, eps_d)

    if n_threads > 1 and len(clouds) > 1:
        with ThreadPoolExecutor(max_workers=int(n_threads)) as pool:
            per_pair = list(pool.map(stats, clouds))
    else:
        per_pair = [stats(c) for c in clouds]

    z_q = np.stack([s[0] for s in per_pair])
    pbar_q = np.stack([s[1] for s in per_pair])
    sigma_hq2 = np.stack([s[2] for s in per_pair])
    valid_q = np.stack([s[3] for s in per_pair])

    z_bar, sigma_z, members, valid = _consensus_grid(z_q, pbar_q, valid_q, tol)

    pb = np.where(valid_q, pbar_q, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        pb_total = pb.sum(axis=0)
        sigma_h2 = np.where(
            pb_total > 0, (pb * np.nan_to_num(sigma_hq2)).sum(axis=0) / pb_total, np.nan
        )
        member_count = members.sum(axis=0)
        pbar = np.where(
            member_count > 0,
            np.where(members, np.nan_to_num(pbar_q), 0.0).sum(axis=0)
            / np.maximum(member_count, 1),
            np.nan,
        )
    sigma_h = np.sqrt(np.maximum(np.nan_to_num(sigma_h2, nan=0.0), 0.0))
    sigma_h = np.where(valid, sigma_h, np.nan)
    n_pairs = valid_q.sum(axis=0)
    return DsmGrid(
        spec=spec,
        z=np.where(valid, z_bar, np.nan),
        sigma_z=np.where(valid, sigma_z, np.nan),
        sigma_h=sigma_h,
        pbar=np.where(valid, pbar, np.nan),
        valid=valid,
        n_pairs=n_pairs,
    )


def median_fuse(clouds, spec: GridSpec, radius=None, k_max=16, eps_d=None, n_threads=1):
    """Median of the per-pair bin elevations; the robust baseline fusion."""
    clouds = list(clouds)
    if not clouds:
        raise ValueError("median_fuse needs at least one cloud")
    radius = 1.0 * spec.spacing if radius is None else float(radius)
    eps_d = spec.spacing / 100.0 if eps_d is None else float(eps_d)

    def stats(cloud):
        return _pair_bin_stats(cloud, spec, radius, k_max, eps_d)

    if n_threads > 1 and len(clouds) > 1:
        with ThreadPoolExecutor(max_workers=int(n_threads)) as pool:
            per_pair = list(pool.map(stats, clouds))
    else:
        per_pair = [stats(c) for c in clouds]
    z_q = np.stack([np.where(s[3], s[0], np.nan) for s in per_pair])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN cells are legal
        return np.nanmedian(z_q, axis=0)
