"""Exception types shared across the package."""


class DyadicwError(Exception):
    """Base class for all package errors."""


class ResolutionError(DyadicwError, ValueError):
    """A cube, level or operation needs finer resolution than available."""


class IncompleteMapError(DyadicwError, KeyError):
    """A cube-indexed map lacks an entry that an operation requires."""


class NotSPDError(DyadicwError, ValueError):
    """Input is not symmetric positive definite."""


class AdmissibilityError(DyadicwError, ValueError):
    """Weight exponents fall outside the admissible range."""


class FittingError(DyadicwError, RuntimeError):
    """Ellipsoid fitting failed to converge."""


class NonlinearityError(DyadicwError, ValueError):
    """An operator failed the linearity spot-check."""


class ConfigError(DyadicwError, ValueError):
    """Invalid experiment configuration."""


class DimensionError(DyadicwError, ValueError):
    """Mismatched vector or matrix dimensions."""
