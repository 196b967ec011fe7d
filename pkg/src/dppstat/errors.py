"""Exception hierarchy shared across the package."""


class DppError(Exception):
    """Base class for all dppstat errors."""


class UnsupportedClosedForm(DppError):
    """No closed-form expression exists for this family; use the spectral lattice."""


class UnsupportedFamily(DppError):
    """Operation is not defined for this kernel family."""


class InvalidModel(DppError):
    """Model parameters violate an existence or range constraint."""


class NonStrictEigenvalue(DppError):
    """Some spectral value equals (or exceeds) 1; density work needs phi < 1 strictly."""


class GridTooCoarse(DppError):
    """FFT grid must have at least 2N+1 nodes per axis."""


class NumericalBreakdown(DppError):
    """Gram-Schmidt vector collapsed below tolerance; draw could not be completed."""


class EnvelopeViolation(UserWarning):
    """A rejection proposal exceeded the estimated envelope (logged, then refreshed)."""


class NonPositiveDefinite(DppError):
    """Likelihood Gram matrix is not positive definite (N too small or points too close)."""


class DuplicatePoints(DppError):
    """Pattern contains points closer than the duplicate tolerance (1e-12)."""


class EmptyPattern(DppError):
    """Operation requires a nonempty point pattern."""


class TooFewPoints(DppError):
    """Estimator needs more points than the pattern provides."""


class MixedMethods(DppError):
    """Model comparison requires fits of the same kind on the same data."""


class NonInvertibleMap(DppError):
    """Supplied transformation does not round-trip on the given points."""


class ZeroIntensity(DppError):
    """Operation undefined at rho = 0."""


class NoConvergence(DppError):
    """Optimizer failed to converge within its iteration budget."""


class EmptyBin(UserWarning):
    """An intensity bin received zero points; floored at 1e-9."""
