"""Exception types shared across the package."""


class RpfconeError(Exception):
    """Base class for all numerical-pipeline failures."""


class SolverDivergence(RpfconeError):
    """Inverse-branch root solve left a residual above tolerance."""


class NotMixingWithinCap(RpfconeError):
    """Ball images did not cover the space within the iteration cap."""


class NoHyperbolicTime(RpfconeError):
    """No sampled orbit exhibited a hyperbolic time within the horizon."""


class StarViolation(RpfconeError):
    """sigma * theta >= 1: the expansion/contraction compatibility condition fails."""


class BranchExplosion(RpfconeError):
    """deg^n inverse-branch histories exceed the configured budget."""


class NoConvergence(RpfconeError):
    """Power iteration hit max_iter with residuals above tolerance."""

    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals or {}


class BoundaryOfCone(RpfconeError):
    """Cone-metric input sits on (or numerically at) the boundary ratio k."""


class ResolventSingular(RpfconeError):
    """A contour node's linear solve was ill-conditioned: the contour crosses the spectrum."""


class SeriesPreconditionViolated(RpfconeError):
    """Perturbation too large for the Neumann resolvent series to converge."""


class DivergentSeries(RpfconeError):
    """Correlation series has no usable geometric tail (fitted rate >= 1)."""


class DegenerateVariance(RpfconeError):
    """CLT variance is zero (coboundary case); the empirical CLT is refused."""


class ConfigError(RpfconeError):
    """Run configuration failed to parse or validate."""
