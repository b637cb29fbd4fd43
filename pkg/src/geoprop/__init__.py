"""Geospatial error prediction for multi-image satellite surface models.

Propagates satellite pose covariance through covariance-weighted multi-ray
intersection to 3-d points with full covariance, and predicts per-cell
horizontal/vertical error for fused digital surface models.
"""

__version__ = "0.1.0"

from .errors import (
    CovarianceError,
    FitError,
    FormatError,
    GeometryError,
    GeopropError,
    NearParallelWarning,
    ProjectionError,
    RefinementError,
)
from .geodesy import GeodeticPoint, TangentFrame

__all__ = [
    "__version__",
    "CovarianceError",
    "FitError",
    "FormatError",
    "GeodeticPoint",
    "GeometryError",
    "GeopropError",
    "NearParallelWarning",
    "ProjectionError",
    "RefinementError",
    "TangentFrame",
]
