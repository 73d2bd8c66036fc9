"""Within/between-group decomposition of the Theil-T index.

For any partition of a weighted population into groups ``g``::

    T = sum_g n_g r_g ln r_g  +  sum_g s_g T_g
        (between)                (within)

with ``n_g`` the group's weight share, ``r_g`` its mean relative to the
overall mean, ``s_g = n_g r_g`` its income share and ``T_g`` the Theil-T
index computed inside the group.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (DegenerateSampleError, EmptyDataError, HhIneqError,
                          check_sample, fsum)
from .households import Couples
from .measures import theil_terms

__all__ = [
    "GroupStat",
    "DecompResult",
    "decompose",
    "within_household_contribution",
    "between_sex_contribution",
    "TheilDecomposition",
]


class GroupStat(NamedTuple):
    group: object
    weight_share: float
    mean: float
    income_share: float
    within_theil: float


@dataclass(frozen=True, eq=False)
class DecompResult:
    """Outcome of :func:`decompose`.

    Per-group quantities are held as parallel arrays ordered by group key;
    :attr:`group_stats` materialises them as :class:`GroupStat` rows.
    """

    total: float
    between: float
    within: float
    groups: np.ndarray
    weight_share: np.ndarray
    group_mean: np.ndarray
    income_share: np.ndarray
    within_theil: np.ndarray

    @property
    def within_share_pct(self) -> Optional[float]:
        """Within component as a percentage of the total; None when total is 0."""
        if self.total == 0:
            return None
        return 100.0 * self.within / self.total

    @property
    def between_share_pct(self) -> Optional[float]:
        if self.total == 0:
            return None
        return 100.0 * self.between / self.total

    @property
    def group_stats(self):
        return [GroupStat(*row) for row in zip(
            self.groups.tolist(), self.weight_share.tolist(),
            self.group_mean.tolist(), self.income_share.tolist(),
            self.within_theil.tolist())]

    def to_frame(self):
        return pd.DataFrame({
            "group": self.groups,
            "weight_share": self.weight_share,
            "mean": self.group_mean,
            "income_share": self.income_share,
            "within_theil": self.within_theil,
        })


def _group_codes(groups, n):
    keys = np.asarray(groups)
    if keys.shape != (n,):
        raise HhIneqError(f"expected {n} group keys, got shape {keys.shape}")
    if keys.dtype.kind in "iub":
        uniques, codes = np.unique(keys, return_inverse=True)
    else:
        codes, uniques = pd.factorize(keys, sort=True)
        uniques = np.asarray(uniques)
    return uniques, codes.ravel()


def decompose(values, weights=None, groups=None):
    """Split the Theil-T index of a weighted sample into between and within parts.

    Parameters
    ----------
    values : array-like
        Non-negative person incomes.
    weights : array-like, optional
        Person weights (> 0).
    groups : array-like
        One group key per person.  Keys must be mutually sortable; groups
        are processed in sorted key order.

    Returns
    -------
    DecompResult

    Raises
    ------
    DegenerateSampleError
        If the overall weighted mean is zero.
    """
    y, w = check_sample(values, weights)
    if groups is None:
        groups = np.zeros(y.size, dtype=int)
    uniques, codes = _group_codes(groups, y.size)

    # canonical order: group key, then record index
    order = np.argsort(codes, kind="stable")
    y, w, codes = y[order], w[order], codes[order]
    starts = np.flatnonzero(np.r_[True, codes[1:] != codes[:-1]])

    W = fsum(w)
    wy = w * y
    Y = fsum(wy)
    mean = Y / W
    if not mean > 0:
        raise DegenerateSampleError("overall mean is zero; decomposition undefined")

    W_g = np.add.reduceat(w, starts)
    Y_g = np.add.reduceat(wy, starts)
    mean_g = Y_g / W_g
    lo = np.minimum.reduceat(y, starts)
    hi = np.maximum.reduceat(y, starts)

    n_g = W_g / W
    s_g = Y_g / Y

    # zero-mean groups only hold zeros and contribute nothing
    mg = mean_g[codes]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(mg > 0, theil_terms(y, mg), 0.0)
    T_g = np.add.reduceat(w * terms, starts) / W_g
    T_g = np.where((lo == hi) | ~(mean_g > 0), 0.0, np.maximum(T_g, 0.0))

    if y.min() == y.max():
        total = 0.0
    else:
        total = max(fsum(w * theil_terms(y, mean)) / W, 0.0)
    between = max(fsum(n_g * theil_terms(mean_g, mean)), 0.0)
    within = fsum(s_g * T_g)
    if total == 0.0:
        between = within = 0.0

    return DecompResult(total=total, between=between, within=within,
                        groups=uniques, weight_share=n_g, group_mean=mean_g,
                        income_share=s_g, within_theil=T_g)


def _couple_persons(couples, include_zero_total=True):
    if not isinstance(couples, Couples):
        couples = Couples.from_households(couples)
    if not include_zero_total:
        couples = couples.subset(couples.total() > 0)
    if len(couples) == 0:
        raise EmptyDataError("no couples to decompose")
    return couples.persons()


def decompose_households(couples, include_zero_total=True):
    """Theil decomposition with every couple household as its own group."""
    values, weights, household, _ = _couple_persons(couples, include_zero_total)
    return decompose(values, weights, household)


def decompose_sexes(couples, include_zero_total=True):
    """Theil decomposition with two groups: all men and all women."""
    values, weights, _, female = _couple_persons(couples, include_zero_total)
    return decompose(values, weights, female.astype(np.int8))


def within_household_contribution(couples, include_zero_total=True):
    """Percentage of total Theil-T due to inequality inside couple households.

    Both spouses carry the household weight.  Returns None when total
    inequality is zero.

    >>> round(within_household_contribution(Couples.from_pairs([(1, 1), (1, 3)])), 2)
    60.63
    """
    return decompose_households(couples, include_zero_total).within_share_pct


def between_sex_contribution(couples, include_zero_total=True):
    """Percentage of total Theil-T due to the gap between men's and women's mean earnings."""
    return decompose_sexes(couples, include_zero_total).between_share_pct


class TheilDecomposition(BaseEstimator):
    """Estimator wrapper around :func:`decompose`.

    ``fit(X, groups=..., sample_weight=...)`` with ``X`` a 1-d array of
    incomes (or a single-column 2-d array).  Fitted attributes are
    ``total_``, ``between_``, ``within_``, ``within_share_pct_`` and
    ``group_stats_`` (a DataFrame).  ``transform`` maps each person to the
    mean income of their group, i.e. the smoothed distribution whose Theil
    index is the between component.
    """

    def fit(self, X, y=None, groups=None, sample_weight=None):
        values = np.asarray(X, dtype=float)
        if values.ndim == 2:
            if values.shape[1] != 1:
                raise ValueError("X must hold a single income column")
            values = values[:, 0]
        result = decompose(values, sample_weight, groups)
        self.result_ = result
        self.total_ = result.total
        self.between_ = result.between
        self.within_ = result.within
        self.within_share_pct_ = result.within_share_pct
        self.group_stats_ = result.to_frame()
        self.n_features_in_ = 1
        return self

    def transform(self, X, groups=None):
        check_is_fitted(self, "result_")
        keys = pd.Index(self.result_.groups)
        idx = keys.get_indexer(np.asarray(groups))
        if np.any(idx < 0):
            raise ValueError("transform received group keys unseen during fit")
        return self.result_.group_mean[idx]
