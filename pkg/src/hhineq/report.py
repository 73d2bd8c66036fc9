"""Per-dataset summaries, cross-country aggregation, trends and smoothing."""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import EmptyDataError, HhIneqError, fsum
from .decomposition import decompose_households, decompose_sexes
from .measures import household_losses
from .pipeline import PreprocessConfig, women_share

DEFAULT_EPS = (0.25, 1.0)
BASE_COLUMNS = ["country", "year", "women_share_pct", "theil_total",
                "within_share_pct", "between_sex_share_pct"]
MEAN_SHARE_COLUMN = "women_share_mean_pct"
SCATTER_COLUMNS = ["theil_total", "within_share_pct", "country", "year"]


def eps_column(eps):
    """Summary column name for an aversion value, e.g. 0.25 -> ``atkinson_loss_e025_pct``."""
    return f"atkinson_loss_e{round(float(eps) * 100):03d}_pct"


def eps_from_column(name):
    return int(name[len("atkinson_loss_e"):-len("_pct")]) / 100.0


@dataclass
class CountryYearSummary:
    country: str
    year: int
    women_share_pct: Optional[float]
    theil_total: float
    within_share_pct: Optional[float]
    between_sex_share_pct: Optional[float]
    atkinson_loss_pct: dict = field(default_factory=dict)
    women_share_mean_pct: Optional[float] = None

    def as_row(self, share_mode="aggregate"):
        row = {
            "country": self.country,
            "year": self.year,
            "women_share_pct": (self.women_share_mean_pct if share_mode == "mean"
                                else self.women_share_pct),
            "theil_total": self.theil_total,
            "within_share_pct": self.within_share_pct,
            "between_sex_share_pct": self.between_sex_share_pct,
        }
        for eps, value in self.atkinson_loss_pct.items():
            row[eps_column(eps)] = value
        if share_mode == "both":
            row[MEAN_SHARE_COLUMN] = self.women_share_mean_pct
        return row


def summarize(couples, eps_list=DEFAULT_EPS, config=None):
    """One table row for a cleaned (country, year) couple set.

    Atkinson losses are household-weighted means over couples with positive
    earnings, in percent.
    """
    config = config or PreprocessConfig()
    if len(couples) == 0:
        raise EmptyDataError("cannot summarize an empty dataset")
    share = women_share(couples, "aggregate")
    mean_share = women_share(couples, "mean_of_shares")
    households = decompose_households(couples, config.include_zero_total)
    sexes = decompose_sexes(couples, config.include_zero_total)

    earning = couples.total() > 0
    incomes = couples.incomes()[earning]
    w = couples.weight[earning]
    losses = {}
    for eps in eps_list:
        loss, _ = household_losses(incomes, eps)
        losses[float(eps)] = 100.0 * fsum(w * loss) / fsum(w)

    return CountryYearSummary(
        country=couples.country, year=couples.year, women_share_pct=share,
        theil_total=households.total,
        within_share_pct=households.within_share_pct,
        between_sex_share_pct=sexes.between_share_pct,
        atkinson_loss_pct=losses, women_share_mean_pct=mean_share)


# -- summary tables --------------------------------------------------------------

def summaries_frame(summaries, share_mode="aggregate"):
    """Summary rows as a DataFrame sorted by (country, year)."""
    if isinstance(summaries, pd.DataFrame):
        frame = summaries.copy()
    else:
        frame = pd.DataFrame([s.as_row(share_mode) for s in summaries])
    if frame.empty:
        return frame
    return frame.sort_values(["country", "year"], kind="stable").reset_index(drop=True)


def write_summaries(summaries, path, precision="full", share_mode="aggregate"):
    frame = summaries_frame(summaries, share_mode)
    if precision == "table":
        frame = table_format(frame)
    frame.to_csv(path, index=False, na_rep="")
    return frame


def table_format(frame):
    frame = frame.copy()
    for col in frame.columns:
        if col in ("country", "year", "n_datasets"):
            continue
        digits = 2 if col == "theil_total" else 1
        frame[col] = frame[col].map(
            lambda v, d=digits: "" if pd.isna(v) else f"{v:.{d}f}")
    return frame


def read_summaries(path):
    """Read a summary CSV such as the output of ``analyze`` or the bundled table."""
    frame = pd.read_csv(path, dtype={"country": str})
    missing = [c for c in BASE_COLUMNS if c not in frame.columns]
    if missing:
        raise HhIneqError(f"summary file lacks columns {missing}")
    return frame


def bundled_table_a1():
    """Path to the packaged country-year summary table (`table_a1.csv`)."""
    from importlib.resources import files
    return files("hhineq") / "data" / "table_a1.csv"


def metric_columns(frame):
    return [c for c in frame.columns if c not in ("country", "year")]


def country_means(summaries):
    """Unweighted mean of every metric over each country's available years.

    Null entries are skipped.  Rows come back sorted by country with an
    ``n_datasets`` column.
    """
    frame = summaries_frame(summaries)
    if frame.empty:
        raise EmptyDataError("no summaries")
    cols = metric_columns(frame)
    grouped = frame.groupby("country", sort=True)
    out = grouped[cols].mean()
    out.insert(0, "n_datasets", grouped.size())
    return out.reset_index()


class TrendPoint(NamedTuple):
    x: float
    y: float


def global_trend(summaries, metric):
    """Cross-country mean of ``metric`` for each year, countries weighted equally."""
    frame = summaries_frame(summaries)
    if frame.empty:
        raise EmptyDataError("no summaries")
    if metric not in frame.columns:
        raise HhIneqError(f"unknown metric {metric!r}")
    series = frame.dropna(subset=[metric]).groupby("year", sort=True)[metric].mean()
    return [TrendPoint(float(x), float(y)) for x, y in series.items()]


def country_series(summaries, country, metric):
    frame = summaries_frame(summaries)
    sub = frame[(frame["country"] == country)].dropna(subset=[metric])
    return [TrendPoint(float(x), float(y)) for x, y in zip(sub["year"], sub[metric])]


# -- smoothing ---------------------------------------------------------------

@dataclass(frozen=True)
class LoessConfig:
    span: float = 0.75
    degree: int = 1
    min_points: int = 3

    def __post_init__(self):
        if not 0 < self.span <= 1:
            raise HhIneqError("span must lie in (0, 1]")
        if self.degree not in (0, 1):
            raise HhIneqError("degree must be 0 or 1")


@dataclass(frozen=True)
class LoessCurve:
    x: np.ndarray
    y: np.ndarray
    fitted: np.ndarray
    scatter_only = False


@dataclass(frozen=True)
class ScatterOnly:
    """Too few points to smooth; plot the raw points instead."""

    x: np.ndarray
    y: np.ndarray
    fitted = None
    scatter_only = True


def _local_fit(x, y, x0, q, degree):
    d = np.abs(x - x0)
    nearest = np.argsort(d, kind="stable")[:q]
    xs, ys, ds = x[nearest], y[nearest], d[nearest]
    h = ds.max()
    if h == 0:
        return ys.mean()
    u = ds / h
    w = (1.0 - u**3) ** 3
    if degree == 0 or np.ptp(xs[w > 0]) == 0:
        if not w.any():
            return ys.mean()
        return fsum(w * ys) / fsum(w)
    # centred at x0 so the intercept is the fitted value
    t = xs - x0
    sw = np.sqrt(w)
    A = np.column_stack([sw, sw * t])
    beta, *_ = np.linalg.lstsq(A, sw * ys, rcond=None)
    return beta[0]


def _loess_at(x, y, targets, span, degree):
    q = min(max(int(math.ceil(span * x.size)), 1), x.size)
    return np.array([_local_fit(x, y, x0, q, degree) for x0 in targets])


def loess(points, config=None):
    """Local polynomial smoothing of ``(x, y)`` points, evaluated at each x.

    Each point is fitted from its ``ceil(span * n)`` nearest neighbours with
    tricube weights; there are no robustness iterations.  With fewer than
    ``config.min_points`` points a :class:`ScatterOnly` marker comes back.
    """
    config = config or LoessConfig()
    pts = np.asarray([tuple(p) for p in points], dtype=float).reshape(-1, 2)
    order = np.argsort(pts[:, 0], kind="stable")
    x, y = pts[order, 0], pts[order, 1]
    if x.size < config.min_points:
        return ScatterOnly(x, y)
    return LoessCurve(x, y, _loess_at(x, y, x, config.span, config.degree))


class LoessSmoother(RegressorMixin, BaseEstimator):
    """Estimator form of :func:`loess`; ``predict`` evaluates the local fit anywhere."""

    def __init__(self, span=0.75, degree=1):
        self.span = span
        self.degree = degree

    def fit(self, X, y):
        LoessConfig(self.span, self.degree)
        x = np.asarray(X, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if x.size != y.size or x.size == 0:
            raise ValueError("X and y must be non-empty and of equal length")
        order = np.argsort(x, kind="stable")
        self.x_, self.y_ = x[order], y[order]
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "x_")
        targets = np.asarray(X, dtype=float).reshape(-1)
        return _loess_at(self.x_, self.y_, targets, self.span, self.degree)


# -- association -------------------------------------------------------------

def pearson(a, b):
    """Pearson correlation coefficient.

    >>> pearson([1, 2, 3, 4], [1, 3, 2, 4])
    0.8
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise HhIneqError("pearson needs two 1-d sequences of equal length")
    if a.size < 2:
        raise HhIneqError("pearson needs at least two points")
    da = a - fsum(a) / a.size
    db = b - fsum(b) / b.size
    saa, sbb = fsum(da * da), fsum(db * db)
    if saa == 0 or sbb == 0:
        raise HhIneqError("pearson is undefined for a constant sequence")
    r = fsum(da * db) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def scatter_export(summaries, path=None):
    """Plot-ready (theil_total, within_share_pct, country, year) rows.

    Rows with either metric missing are left out; an empty result is an
    error.
    """
    frame = summaries_frame(summaries)
    if frame.empty:
        raise EmptyDataError("no summaries to export")
    out = frame.dropna(subset=["theil_total", "within_share_pct"])[SCATTER_COLUMNS]
    if out.empty:
        raise EmptyDataError("no rows left to export")
    if path is not None:
        out.to_csv(path, index=False)
    return out.reset_index(drop=True)
