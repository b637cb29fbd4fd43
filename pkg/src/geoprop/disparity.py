"""Total-variation roughness classes on disparity grids, mapped to disparity sigma.

The class of a pixel is the largest ring count n for which the cumulative
ring statistic

    sum_{m=1..n} (1/|ring_m|) * sum_{ring_m} sqrt(|d(i+1,j)-d(i,j)| + |d(i,j+1)-d(i,j)|)

stays under a threshold: smooth disparity keeps the statistic small out to
large rings, noisy disparity exceeds the threshold immediately.  Ring m is
the square ring of Chebyshev radius m (8m pixels in the interior); rings are
clipped at the grid border and invalid pixels are dropped, with the mean
renormalized to the surviving count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INVALID_CLASS = -1


@dataclass(frozen=True)
class TvCalibration:
    """Monotone lookup from total-variation class to disparity standard deviation."""

    classes: np.ndarray
    sigma_disp: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.classes, dtype=float).reshape(-1)
        s = np.asarray(self.sigma_disp, dtype=float).reshape(-1)
        if len(c) == 0 or len(c) != len(s):
            raise ValueError("calibration needs matching, nonempty class and sigma tables")
        if len(c) > 1 and not np.all(np.diff(c) > 0):
            raise ValueError("calibration classes must be strictly increasing")
        if len(s) > 1 and not np.all(np.diff(s) < 0):
            raise ValueError("calibration sigmas must be strictly decreasing")
        object.__setattr__(self, "classes", c)
        object.__setattr__(self, "sigma_disp", s)

    def to_dict(self):
        return {"classes": self.classes.tolist(), "sigma_disp": self.sigma_disp.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(classes=d["classes"], sigma_disp=d["sigma_disp"])


#: Shipped default shape of the class-to-sigma curve; real pipelines calibrate
#: this against ground-truth disparity and pass their own table.
DEFAULT_TV_CALIBRATION = TvCalibration(
    classes=np.arange(9, dtype=float),
    sigma_disp=np.array([2.0, 1.2, 0.8, 0.55, 0.4, 0.32, 0.27, 0.23, 0.2]),
)


def _integral_image(arr):
    ii = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1))
    ii[1:, 1:] = np.cumsum(np.cumsum(arr, axis=0), axis=1)
    return ii


def _box_sums(ii, half):
    """Sum of the source array over the (2*half+1)^2 box at every pixel, border clipped."""
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    rows = np.arange(h)
    cols = np.arange(w)
    r_lo = np.clip(rows - half, 0, h)
    r_hi = np.clip(rows + half + 1, 0, h)
    c_lo = np.clip(cols - half, 0, w)
    c_hi = np.clip(cols + half + 1, 0, w)
    return (
        ii[np.ix_(r_hi, c_hi)]
        - ii[np.ix_(r_lo, c_hi)]
        - ii[np.ix_(r_hi, c_lo)]
        + ii[np.ix_(r_lo, c_lo)]
    )


def tv_class(disparity, theta, n_max):
    """Per-pixel total-variation class of a disparity grid.

    ``disparity`` uses NaN for invalid pixels; invalid pixels get class -1.
    Forward differences are clamped at the border and against invalid
    neighbors (zero contribution).
    """
    if theta <= 0:
        raise ValueError("threshold theta must be positive")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    d = np.asarray(disparity, dtype=float)
    valid = np.isfinite(d)
    filled = np.where(valid, d, np.nan)
    dx = np.abs(np.diff(filled, axis=0, append=filled[-1:, :]))
    dy = np.abs(np.diff(filled, axis=1, append=filled[:, -1:]))
    dx = np.nan_to_num(dx, nan=0.0)
    dy = np.nan_to_num(dy, nan=0.0)
    g = np.sqrt(dx + dy)
    g[~valid] = 0.0

    g_ii = _integral_image(g)
    n_ii = _integral_image(valid.astype(float))
    cumulative = np.zeros_like(g)
    classes = np.zeros(d.shape, dtype=int)
    prev_g = _box_sums(g_ii, 0)
    prev_n = _box_sums(n_ii, 0)
    for m in range(1, int(n_max) + 1):
        cur_g = _box_sums(g_ii, m)
        cur_n = _box_sums(n_ii, m)
        ring_g = cur_g - prev_g
        ring_n = cur_n - prev_n
        with np.errstate(invalid="ignore", divide="ignore"):
            stat = np.where(ring_n > 0, ring_g / ring_n, 0.0)
        cumulative += stat
        classes += cumulative < theta
        prev_g, prev_n = cur_g, cur_n
    classes[~valid] = INVALID_CLASS
    return classes


def tv_to_sigma(classes, calibration: TvCalibration):
    """Piecewise-linear class-to-sigma lookup, clamped at the table ends.

    Invalid classes (< 0) map to NaN.
    """
    cls = np.asarray(classes, dtype=float)
    sigma = np.interp(cls, calibration.classes, calibration.sigma_disp)
    return np.where(cls < 0, np.nan, sigma)
