"""Exception hierarchy for layerpot.

Every failure mode that callers are expected to branch on gets its own
class; generic misuse raises ValueError/TypeError as usual.
"""


class LayerpotError(Exception):
    """Base class for all layerpot-specific errors."""


class ConfigError(LayerpotError):
    """Invalid configuration value or unknown configuration key."""


class NonFinite(LayerpotError):
    """A function returned NaN or +/-inf where a finite value was required."""


class ToleranceNotMet(LayerpotError):
    """Adaptive refinement exhausted its budget above the requested tolerance."""


class InsufficientSamples(LayerpotError):
    """Too few usable probe points for a tail fit."""


class GradientUnavailable(LayerpotError):
    """Surface gradient requested at a non-differentiable point."""


class DomainError(LayerpotError):
    """Argument outside the mathematical domain (e.g. radius <= 0)."""


class NotDifferentiable(LayerpotError):
    """Logarithmic derivative requested at a weight breakpoint."""


class PreconditionViolated(LayerpotError):
    """Exponent/constant outside the admissible window for the requested check."""


class DivergentB(LayerpotError):
    """The two-factor supremum of a Hardy pair diverges."""


class HypothesisFails(LayerpotError):
    """Integration-by-parts constant is non-positive; the bound does not apply."""


class TruncationWarning(UserWarning):
    """Density not negligible at the truncation boundary."""


class PVNotConverged(LayerpotError):
    """Principal-value extrapolation did not settle within tolerance."""


class OutOfCoverage(LayerpotError):
    """Requested annulus is not covered by the sampled grid."""


class SurfaceTooRough(LayerpotError):
    """Global Lipschitz constant exceeds the solver threshold."""


class ZeroRHS(LayerpotError):
    """Bound right-hand side vanishes at a probe where the left side does not."""


class IllConditioned(LayerpotError):
    """Effective rank of the collocation matrix is below the safe fraction."""
