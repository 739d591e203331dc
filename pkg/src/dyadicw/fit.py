"""Least-squares slope fits on log2 scales."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FittingError


@dataclass(frozen=True)
class SlopeFit:
    """Line ``ys ~ slope * xs + intercept`` fitted by least squares.

    ``max_residual`` is the largest absolute residual; a fit whose residual
    exceeds :data:`RESIDUAL_LIMIT` should not be used for slope assertions.
    """

    xs: tuple
    ys: tuple
    slope: float
    intercept: float
    max_residual: float

    @property
    def reliable(self) -> bool:
        return self.max_residual < RESIDUAL_LIMIT

    def predict(self, x) -> np.ndarray:
        return self.slope * np.asarray(x, dtype=float) + self.intercept

    def to_dict(self) -> dict:
        return {"xs": list(self.xs), "ys": list(self.ys), "slope": self.slope,
                "intercept": self.intercept, "max_residual": self.max_residual}


RESIDUAL_LIMIT = 0.1


def fit_slope(xs, ys) -> SlopeFit:
    """Fit a line through ``(xs, ys)``; both are already on a log2 scale where relevant."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise FittingError("need at least two paired samples for a slope fit")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FittingError("slope fit samples must be finite")
    if np.ptp(x) == 0:
        raise FittingError("slope fit needs at least two distinct abscissae")
    slope, intercept = np.polyfit(x, y, 1)
    res = float(np.max(np.abs(y - (slope * x + intercept))))
    return SlopeFit(tuple(x.tolist()), tuple(y.tolist()), float(slope), float(intercept), res)


def fit_log2(xs, values) -> SlopeFit:
    """Fit ``log2(values)`` against ``xs``."""
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        raise FittingError("log2 fit requires positive values")
    return fit_slope(xs, np.log2(v))
