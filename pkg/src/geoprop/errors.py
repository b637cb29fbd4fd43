"""Exception types shared across the library."""


class GeopropError(Exception):
    """Base class for numerical and domain failures."""


class GeometryError(GeopropError):
    """Degenerate or inconsistent geometric configuration."""


class ProjectionError(GeopropError):
    """RPC projection or back-projection failure."""


class FitError(GeopropError):
    """Model fitting failed (rank deficiency, non-convergence)."""


class CovarianceError(GeopropError):
    """Covariance matrix is invalid (non-PSD, wrong shape, singular)."""


class RefinementError(GeopropError):
    """Iterative refinement did not converge; carries the last iterate."""

    def __init__(self, message, last_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate


class FormatError(GeopropError):
    """Malformed input file or metadata."""


class NearParallelWarning(UserWarning):
    """Ray bundle geometry is close to degenerate (ill-conditioned normal matrix)."""
