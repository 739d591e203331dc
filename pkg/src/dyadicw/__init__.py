"""Matrix-weighted dyadic harmonic analysis on the unit interval."""

from ._config import jit_enabled, jit_mode, set_jit
from .dyadic import DyadicCube, MatrixSymbol, VectorField, haar_transform, inverse_haar
from .errors import (
    AdmissibilityError,
    ConfigError,
    DimensionError,
    DyadicwError,
    FittingError,
    IncompleteMapError,
    NonlinearityError,
    NotSPDError,
    ResolutionError,
)
from .fit import SlopeFit, fit_slope
from .operators import MatrixSequence
from .weights import (
    MatrixWeight,
    ap_characteristic_integral,
    ap_characteristic_reducing,
    identity_weight,
    make_power_weight,
    make_rotated_weight,
    make_scalar_weight,
    reducing_operator,
    reducing_table,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "ConfigError", "DimensionError", "DyadicCube", "DyadicwError", "FittingError",
    "IncompleteMapError", "MatrixSequence", "MatrixSymbol", "MatrixWeight", "NonlinearityError", "NotSPDError",
    "ResolutionError", "SlopeFit", "VectorField", "ap_characteristic_integral", "ap_characteristic_reducing",
    "fit_slope", "haar_transform", "identity_weight", "inverse_haar", "jit_enabled", "jit_mode",
    "make_power_weight", "make_rotated_weight", "make_scalar_weight", "reducing_operator", "reducing_table",
    "set_jit",
]
