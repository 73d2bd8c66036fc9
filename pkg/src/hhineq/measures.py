"""Weighted inequality indices and household Atkinson welfare loss.

All functions are pure.  Global sums go through :func:`math.fsum`, so a
result does not depend on record order or on how many threads the caller
uses.
"""

import numpy as np

from ._validation import (DegenerateSampleError, HhIneqError, check_epsilon,
                          check_sample, fsum)

__all__ = [
    "weighted_mean",
    "ge_index",
    "theil_t",
    "mean_log_deviation",
    "edei",
    "atkinson_loss",
    "household_edei",
    "household_losses",
]


def weighted_mean(values, weights=None):
    """Weighted arithmetic mean ``sum(w*y) / sum(w)``."""
    y, w = check_sample(values, weights)
    return fsum(w * y) / fsum(w)


# Taylor coefficients 1/k! for k = 2..13 of exp(x) - 1 - x
_PHI_COEF = 1.0 / np.cumprod(np.arange(1.0, 14.0))[1:]


def _phi(x):
    """``exp(x) - 1 - x`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    xs = np.where(small, x, 0.0)
    series = np.polynomial.polynomial.polyval(xs, np.r_[0.0, 0.0, _PHI_COEF])
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(small, series, np.expm1(x) - x)


def _log_ratio(y, mean):
    """``ln(y / mean)``, via ``log1p`` of the relative deviation near the mean."""
    d = (y - mean) / mean
    with np.errstate(divide="ignore"):
        return np.where(np.abs(d) < 0.5, np.log1p(d), np.log(y / mean))


def theil_terms(y, mean):
    """Per-record Theil-T summands ``r ln r - (r - 1)`` with ``r = y / mean``.

    The weighted mean of ``r - 1`` is zero, so these terms average to the
    same index as ``r ln r``.  In terms of ``L = ln r`` a summand is
    ``L (e^L - 1) - (e^L - 1 - L)``, which stays accurate when incomes sit
    close to the mean.  ``y = 0`` gives 1, matching ``0 ln 0 = 0``.
    """
    L = _log_ratio(y, mean)
    pos = y > 0
    Lp = np.where(pos, L, 0.0)
    return np.where(pos, Lp * np.expm1(Lp) - _phi(Lp), 1.0)


def _relative(values, weights):
    y, w = check_sample(values, weights)
    W = fsum(w)
    mean = fsum(w * y) / W
    if not mean > 0:
        raise DegenerateSampleError("sample mean is zero; index undefined")
    return y, mean, w, W


def ge_index(values, weights=None, alpha=1.0):
    """Generalized Entropy index GE(alpha) of a weighted sample.

    Parameters
    ----------
    values : array-like
        Non-negative incomes.
    weights : array-like, optional
        Strictly positive sampling weights; unit weights if omitted.
    alpha : float
        Order of the index.  ``alpha=1`` is Theil-T and ``alpha=0`` the mean
        log deviation; both are evaluated with their limit formulas.

    Returns
    -------
    float
        Non-negative index, zero under perfect equality.

    Raises
    ------
    DegenerateSampleError
        If the weighted mean is zero, or ``alpha <= 0`` and some value is zero.
    """
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise HhIneqError("alpha must be finite")
    y, mean, w, W = _relative(values, weights)
    if y.min() == y.max():
        return 0.0
    if alpha == 1.0:
        return max(fsum(w * theil_terms(y, mean)) / W, 0.0)
    if alpha <= 0 and np.any(y == 0):
        raise DegenerateSampleError(
            f"GE({alpha:g}) is infinite for samples containing zero incomes")
    # r - 1 averages to zero, so subtracting alpha (r - 1) from r^alpha - 1
    # leaves the index unchanged and removes the first-order terms; with
    # L = ln r both pieces become phi(.) = exp(.) - 1 - (.)
    L = _log_ratio(y, mean)
    if alpha == 0.0:
        return max(fsum(w * _phi(L)) / W, 0.0)
    pos = y > 0
    Lp = np.where(pos, L, 0.0)
    terms = np.where(pos, _phi(alpha * Lp) - alpha * _phi(Lp), alpha - 1.0)
    return max(fsum(w * terms) / W / (alpha * alpha - alpha), 0.0)


def theil_t(values, weights=None):
    """Theil-T index, i.e. ``ge_index(values, weights, alpha=1)``.

    >>> round(theil_t([1, 1, 1, 3]), 6)
    0.143841
    """
    return ge_index(values, weights, alpha=1.0)


def mean_log_deviation(values, weights=None):
    return ge_index(values, weights, alpha=0.0)


def _check_households(incomes):
    Y = np.atleast_2d(np.asarray(incomes, dtype=float))
    if Y.shape[1] < 2:
        raise HhIneqError("a household needs at least two members")
    if not np.all(np.isfinite(Y)) or np.any(Y < 0):
        raise HhIneqError("household incomes must be finite and non-negative")
    return Y


def _log_edei_ratio(Y, mean, eps):
    """``log(EDEI / mean)`` per household row (``-inf`` when EDEI is 0).

    Works on relative deviations ``d = y/mean - 1`` through log1p/expm1 so
    that nearly equal households keep full relative precision in the loss.
    """
    out = np.full(mean.shape, -np.inf)
    positive = mean > 0
    if eps == 0.0:
        out[positive] = 0.0
        return out
    Yp = Y[positive]
    mp = mean[positive, None]
    d = (Yp - mp) / mp
    zero = Yp == 0
    has_zero = zero.any(axis=1)
    # small deviations are recentred so they sum to zero, which removes the
    # rounding of the mean; large ones take the plain log
    small = np.abs(d) < 0.5
    centred = d - d.mean(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        logs = np.where(small, np.log1p(np.where(small, centred, 0.0)),
                        np.log(Yp / mp))
    res = np.full(Yp.shape[0], -np.inf)
    with np.errstate(over="ignore", invalid="ignore"):
        if eps == 1.0:
            ok = ~has_zero
            res[ok] = logs[ok].mean(axis=1)
        else:
            ok = ~has_zero if eps > 1 else np.ones(Yp.shape[0], dtype=bool)
            p = 1.0 - eps
            res[ok] = np.log1p(np.expm1(p * logs[ok]).mean(axis=1)) / p
    out[positive] = np.minimum(res, 0.0)
    return out


def household_edei(incomes, eps):
    """Equally distributed equivalent income for each row of ``incomes``.

    ``incomes`` is an ``(n_households, k)`` array with equal weights for the
    ``k`` members.  Zero incomes under ``eps >= 1`` give an EDEI of 0, the
    analytic limit of the power mean.
    """
    eps = check_epsilon(eps)
    Y = _check_households(incomes)
    mean = Y.mean(axis=1)
    return np.exp(_log_edei_ratio(Y, mean, eps)) * mean


def household_losses(incomes, eps):
    """Atkinson welfare loss ``1 - EDEI/mean`` for each household row.

    Returns
    -------
    loss : ndarray
        Values in ``[0, 1]``.
    degenerate : ndarray of bool
        True where the household earns nothing; the loss there is 0 by
        convention and callers should leave it out of averages.
    """
    eps = check_epsilon(eps)
    Y = _check_households(incomes)
    mean = Y.mean(axis=1)
    degenerate = ~(mean > 0)
    loss = 0.0 - np.expm1(_log_edei_ratio(Y, mean, eps))
    loss[degenerate] = 0.0
    return loss, degenerate


def edei(incomes, eps):
    """EDEI of a single household.

    >>> edei([1, 3], 0.0)
    2.0
    >>> round(edei([1, 3], 1.0), 6)
    1.732051
    """
    return float(household_edei(np.asarray(incomes, dtype=float)[None, :], eps)[0])


def atkinson_loss(incomes, eps, *, return_degenerate=False):
    """Atkinson welfare loss of a single household.

    With ``return_degenerate=True`` a ``(loss, degenerate)`` pair is
    returned, ``degenerate`` flagging an all-zero household.
    """
    loss, degenerate = household_losses(
        np.asarray(incomes, dtype=float)[None, :], eps)
    if return_degenerate:
        return float(loss[0]), bool(degenerate[0])
    return float(loss[0])
