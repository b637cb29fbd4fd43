"""Ground-truth comparison: normalized distance and horizontal-radius neighborhoods.

The normalized distance of a cell is |z - z_gt| / sigma_z, the elevation
error in units of predicted standard deviation; 1.644 sigma bounds 90% of
normally distributed errors.  The neighborhood variant searches the ground
truth within the per-cell CE90 horizontal radius

    r_h90 = 2.146 * sigma_h + S_gt / sqrt(2)

for the elevation closest to the DSM value, absorbing horizontal
misregistration before scoring the vertical error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LE90_FACTOR = 1.644
CE90_FACTOR = 2.146
ZERO_SIGMA_HEIGHT_TOL = 1e-3  # meters


@dataclass(frozen=True)
class DistanceSummary:
    n_valid: int
    fraction_within_1sigma: float
    fraction_within_le90: float

    def to_dict(self):
        return {
            "n_valid": self.n_valid,
            "fraction_within_1sigma": self.fraction_within_1sigma,
            "fraction_within_le90": self.fraction_within_le90,
        }


def _distance_from_diff(diff, sigma_z, valid):
    ndist = np.full(diff.shape, np.nan)
    zero = sigma_z == 0
    pos = valid & ~zero & (sigma_z > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ndist[pos] = diff[pos] / sigma_z[pos]
    vz = valid & zero
    ndist[vz] = np.where(diff[vz] <= ZERO_SIGMA_HEIGHT_TOL, 0.0, np.inf)
    return ndist


def _summarize(ndist):
    counted = ~np.isnan(ndist)
    n = int(counted.sum())
    if n == 0:
        return DistanceSummary(0, np.nan, np.nan)
    vals = ndist[counted]
    return DistanceSummary(
        n_valid=n,
        fraction_within_1sigma=float((vals <= 1.0).sum() / n),
        fraction_within_le90=float((vals <= LE90_FACTOR).sum() / n),
    )


def normalized_distance(z, sigma_z, gt, valid=None):
    """Per-cell |z - gt| / sigma_z with its summary fractions.

    Cells with sigma_z exactly zero score 0 when the heights agree within
    1 mm and infinity otherwise; cells invalid in either grid are NaN.
    """
    z = np.asarray(z, dtype=float)
    sigma_z = np.asarray(sigma_z, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if z.shape != gt.shape or z.shape != sigma_z.shape:
        raise ValueError("z, sigma_z, and gt grids must share a shape")
    ok = np.isfinite(z) & np.isfinite(gt) & np.isfinite(sigma_z)
    if valid is not None:
        ok &= np.asarray(valid, dtype=bool)
    ndist = _distance_from_diff(np.abs(z - gt), sigma_z, ok)
    return ndist, _summarize(ndist)


def h90_radius(sigma_h, gt_spacing):
    """CE90 horizontal search radius: 2.146 sigma_h plus the half-diagonal of a gt cell."""
    if gt_spacing <= 0:
        raise ValueError("ground-truth spacing must be positive")
    sigma_h = np.asarray(sigma_h, dtype=float)
    if np.any(sigma_h[np.isfinite(sigma_h)] < 0):
        raise ValueError("sigma_h must be non-negative")
    return CE90_FACTOR * sigma_h + gt_spacing / np.sqrt(2.0)


def neighborhood_normalized_distance(z, sigma_z, gt, radius, spacing, valid=None):
    """Normalized distance against the closest ground-truth elevation within r_h90.

    ``radius`` is a per-cell search radius in meters (typically from
    h90_radius) on a co-registered ground truth with the given grid spacing.
    The cell's own ground truth is always inside the neighborhood, so a
    sub-cell radius reproduces plain normalized_distance.
    """
    z = np.asarray(z, dtype=float)
    sigma_z = np.asarray(sigma_z, dtype=float)
    gt = np.asarray(gt, dtype=float)
    radius = np.broadcast_to(np.asarray(radius, dtype=float), z.shape)
    if z.shape != gt.shape or z.shape != sigma_z.shape:
        raise ValueError("z, sigma_z, and gt grids must share a shape")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    ok = np.isfinite(z) & np.isfinite(sigma_z) & np.isfinite(radius)
    if valid is not None:
        ok &= np.asarray(valid, dtype=bool)

    h, w = z.shape
    best = np.full(z.shape, np.inf)
    finite_r = radius[np.isfinite(radius)]
    max_cells = int(np.ceil(finite_r.max() / spacing)) if finite_r.size else 0
    r2 = radius**2
    for di in range(-max_cells, max_cells + 1):
        for dj in range(-max_cells, max_cells + 1):
            offset2 = (di * di + dj * dj) * spacing**2
            # destination window and the source window it reads from
            dst_r = slice(max(0, -di), min(h, h - di))
            dst_c = slice(max(0, -dj), min(w, w - dj))
            src_r = slice(max(0, di), min(h, h + di))
            src_c = slice(max(0, dj), min(w, w + dj))
            if dst_r.start >= dst_r.stop or dst_c.start >= dst_c.stop:
                continue
            gt_win = gt[src_r, src_c]
            reach = (r2[dst_r, dst_c] >= offset2) & np.isfinite(gt_win)
            diff = np.abs(z[dst_r, dst_c] - gt_win)
            cur = best[dst_r, dst_c]
            best[dst_r, dst_c] = np.where(reach & (diff < cur), diff, cur)
    found = np.isfinite(best)
    ok &= found
    ndist = _distance_from_diff(best, sigma_z, ok)
    return ndist, _summarize(ndist)
