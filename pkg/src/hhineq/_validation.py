"""Input checking shared by the numerical kernels and the estimators."""

import math

import numpy as np


class HhIneqError(ValueError):
    """Base class for errors raised by this package."""


class DegenerateSampleError(HhIneqError):
    """The sample has no positive mean, or zeros where the index needs logs of them."""


class EmptyDataError(HhIneqError):
    pass


def check_sample(values, weights=None):
    """Return ``(values, weights)`` as float arrays after checking the sample invariants.

    Values must be finite and non-negative, weights finite and strictly
    positive, and both of the same nonzero length.  ``weights=None`` means
    unit weights.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim != 1:
        y = y.ravel()
    if y.size == 0:
        raise EmptyDataError("sample is empty")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != y.shape:
            raise HhIneqError(
                f"values and weights differ in length ({y.size} != {w.size})")
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise HhIneqError("values must be finite and non-negative")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise HhIneqError("weights must be finite and strictly positive")
    return y, w


def check_epsilon(eps):
    eps = float(eps)
    if not math.isfinite(eps) or eps < 0:
        raise HhIneqError(f"inequality aversion must be finite and >= 0, got {eps}")
    return eps


def fsum(a):
    """Exactly rounded sum of an array, independent of accumulation order."""
    return math.fsum(np.asarray(a, dtype=float).ravel().tolist())
