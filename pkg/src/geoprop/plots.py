"""Matplotlib rendering for report figures.

Figures are rendered headless to PNG next to the delimited outputs.  All
rendering is deterministic: fixed figure sizes, fixed DPI, and explicit PNG
metadata so reruns of a seeded command are byte-identical.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

plt.rcParams["figure.dpi"] = 100
plt.rcParams["savefig.dpi"] = 150
plt.rcParams["font.size"] = 9
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def figsize(width=5.0, aspect=_GOLDEN):
    return (width, width * aspect)


def save_figure(fig, path, meta=None):
    """Write a figure as PNG with deterministic metadata and close it."""
    metadata = {"Software": "geoprop"}
    if meta:
        metadata["Description"] = " ".join(f"{k}={v}" for k, v in sorted(meta.items()))
    fig.savefig(path, format="png", metadata=metadata, bbox_inches="tight")
    plt.close(fig)
    return path


def scatter_views(points, path, title="intersection scatter", meta=None):
    """East-North and East-Up projections of a 3-d point scatter."""
    pts = np.asarray(points, dtype=float)
    fig, axes = plt.subplots(1, 2, figsize=figsize(8.0, 0.45))
    for ax, (i, j), labels in zip(
        axes, [(0, 1), (0, 2)], [("East (m)", "North (m)"), ("East (m)", "Up (m)")]
    ):
        ax.plot(pts[:, i], pts[:, j], ".", markersize=1, alpha=0.4, rasterized=True)
        ax.set_xlabel(labels[0])
        ax.set_ylabel(labels[1])
        ax.set_aspect("equal", adjustable="datalim")
    fig.suptitle(title)
    return save_figure(fig, path, meta)


def _ellipsoid_outline(ellipsoid, plane):
    """Closed outline of the ellipsoid's silhouette projected onto a coordinate plane."""
    t = np.linspace(0.0, 2.0 * math.pi, 181)
    cov2 = _projected_covariance(ellipsoid, plane)
    evals, evecs = np.linalg.eigh(cov2)
    evals = np.clip(evals, 0.0, None)
    circle = np.stack([np.cos(t), np.sin(t)])
    pts = evecs @ (np.sqrt(evals)[:, None] * circle)
    return pts[0] + ellipsoid.center[plane[0]], pts[1] + ellipsoid.center[plane[1]]


def _projected_covariance(ellipsoid, plane):
    # Silhouette of {x : x^T E^-1 x <= 1} on a plane is the marginal of the
    # shape matrix R diag(a^2) R^T restricted to the plane's rows.
    shape = ellipsoid.rotation @ np.diag(ellipsoid.semi_axes**2) @ ellipsoid.rotation.T
    return shape[np.ix_(plane, plane)]


def ellipsoid_views(ellipsoid, path, title="confidence ellipsoid", meta=None):
    """East-North and East-Up silhouettes of a confidence ellipsoid."""
    fig, axes = plt.subplots(1, 2, figsize=figsize(8.0, 0.45))
    for ax, plane, labels in zip(
        axes, [(0, 1), (0, 2)], [("East (m)", "North (m)"), ("East (m)", "Up (m)")]
    ):
        x, y = _ellipsoid_outline(ellipsoid, plane)
        ax.plot(x, y, "-")
        ax.plot([ellipsoid.center[plane[0]]], [ellipsoid.center[plane[1]]], "k+")
        ax.set_xlabel(labels[0])
        ax.set_ylabel(labels[1])
        ax.set_aspect("equal", adjustable="datalim")
    fig.suptitle(f"{title} ({ellipsoid.confidence:.0%})")
    return save_figure(fig, path, meta)


def raster_figure(array, spec, path, title, cmap="viridis", meta=None):
    """Render one raster layer with its geographic extent."""
    arr = np.asarray(array, dtype=float)
    fig, ax = plt.subplots(figsize=figsize(5.5, 0.8))
    extent = [
        spec.origin_x,
        spec.origin_x + spec.width * spec.spacing,
        spec.origin_y,
        spec.origin_y + spec.height * spec.spacing,
    ]
    im = ax.imshow(arr, origin="lower", extent=extent, cmap=cmap, interpolation="nearest")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(title)
    ax.grid(False)
    fig.colorbar(im, ax=ax, shrink=0.85)
    return save_figure(fig, path, meta)


def histogram_figure(values, path, xlabel, title, bins=60, vline=None, meta=None):
    vals = np.asarray(values, dtype=float)
    vals = vals[np.isfinite(vals)]
    fig, ax = plt.subplots(figsize=figsize(5.0))
    if vals.size:
        ax.hist(vals, bins=bins, color="tab:blue", alpha=0.8)
    if vline is not None:
        ax.axvline(vline, color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    ax.set_title(title)
    return save_figure(fig, path, meta)
