"""Person-record ingestion, sample restrictions and earnings cleaning.

Input is a CSV with header::

    country,year,hid,pid,role,sex,age,earnings,weight,reporting

one row per person.  ``earnings`` may be empty (missing).  Records are held
in a :class:`pandas.DataFrame`; one (country, year) block is one dataset.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import EmptyDataError, HhIneqError, fsum
from .households import Couples

log = logging.getLogger(__name__)

COLUMNS = ["country", "year", "hid", "pid", "role", "sex", "age", "earnings",
           "weight", "reporting"]
ROLES = ("head", "partner", "other")
SEXES = ("male", "female")
REPORTING = ("net", "gross", "mixed")


class MalformedRowError(HhIneqError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InconsistentReportingError(HhIneqError):
    pass


@dataclass(frozen=True)
class PersonRecord:
    country: str
    year: int
    hid: str
    pid: str
    role: str
    sex: str
    age: Optional[int]
    earnings: Optional[float]
    weight: float
    reporting: str


@dataclass(frozen=True)
class PreprocessConfig:
    age_min: int = 18
    age_max: int = 65
    topcode_p: float = 0.99
    include_zero_total: bool = True
    share_mode: str = "aggregate"

    def __post_init__(self):
        if not 0 < self.topcode_p < 1:
            raise HhIneqError("topcode_p must lie strictly between 0 and 1")
        if self.age_min > self.age_max:
            raise HhIneqError("age_min must not exceed age_max")
        if self.share_mode not in ("aggregate", "mean_of_shares"):
            raise HhIneqError(f"unknown share_mode {self.share_mode!r}")


@dataclass
class DatasetMeta:
    """Bookkeeping for one (country, year) dataset."""

    country: str
    year: int
    reporting: str
    raw: int = 0
    retained: int = 0
    dropped: dict = field(default_factory=dict)
    topcode_threshold: Optional[float] = None

    def tally(self, rule, count):
        if count:
            self.dropped[rule] = self.dropped.get(rule, 0) + int(count)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: Optional[str] = None

    def __bool__(self):
        return self.ok


# -- ingestion ---------------------------------------------------------------

def _read_bytes(source):
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
        if isinstance(data, str):
            data = data.encode("utf-8")
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    return data[3:] if data.startswith(b"\xef\xbb\xbf") else data


def _check_structure(data):
    end = data.find(b"\n")
    header = (data if end < 0 else data[:end]).decode("utf-8", "replace").rstrip("\r")
    if not header:
        raise EmptyDataError("input has no header row")
    if next(csv.reader([header])) != COLUMNS:
        raise MalformedRowError(1, f"header must be {','.join(COLUMNS)}")
    n = len(COLUMNS)
    if b'"' in data:
        reader = csv.reader(io.TextIOWrapper(io.BytesIO(data), encoding="utf-8", newline=""))
        next(reader)
        for row in reader:
            if len(row) != n:
                _bad_row(reader.line_num, len(row), n)
        return
    # unquoted input: count separators per line without tokenizing
    raw = np.frombuffer(data, dtype=np.uint8)
    ends = np.flatnonzero(raw == ord("\n"))
    if raw.size and raw[-1] != ord("\n"):
        ends = np.append(ends, raw.size)
    if ends.size < 2:
        return
    starts = np.concatenate([[0], ends[:-1] + 1])
    length = ends - starts
    per_line = np.add.reduceat(raw == ord(","), starts, dtype=np.int32)
    per_line[length == 0] = 0
    empty = (length == 0) | ((length == 1) & (raw[np.minimum(starts, raw.size - 1)] == ord("\r")))
    bad = (per_line[1:] != n - 1) | empty[1:]
    if bad.any():
        i = int(np.flatnonzero(bad)[0]) + 1
        fields = 0 if empty[i] else int(per_line[i]) + 1
        _bad_row(i + 1, fields, n)


def _bad_row(line, fields, n):
    if fields == 0:
        raise MalformedRowError(line, "blank line")
    raise MalformedRowError(line, f"expected {n} fields, found {fields}")


def _parse_numeric(raw, column, *, optional=False, integer=False,
                   lo=-math.inf, hi=math.inf, parsed=None):
    """Float column from its text (or already parsed) form, with the offending line on error."""
    if parsed is None:
        empty = (raw == "").to_numpy()
        parsed = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        bad = np.isnan(parsed) & ~empty if optional else np.isnan(parsed)
    else:
        bad = np.zeros(parsed.size, dtype=bool) if optional else np.isnan(parsed)
    bad |= np.isinf(parsed)
    with np.errstate(invalid="ignore"):
        if integer:
            bad |= ~np.isnan(parsed) & (parsed != np.round(parsed))
        bad |= (parsed < lo) | (parsed > hi)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        value = raw.iloc[i] if raw is not None else parsed[i]
        raise MalformedRowError(i + 2, f"invalid {column} value {value!r}")
    return parsed


def _check_enum(column, values, allowed):
    unknown = set(values.cat.categories) - set(allowed)
    if unknown:
        i = int(np.flatnonzero(values.isin(unknown).to_numpy())[0])
        raise MalformedRowError(
            i + 2, f"unknown {column} token {values.iloc[i]!r}")
    return values.cat.set_categories(list(allowed))


_NUMERIC = {
    "year": dict(integer=True, lo=1900, hi=2100),
    "age": dict(optional=True, integer=True, lo=0, hi=130),
    "earnings": dict(optional=True),
    "weight": dict(lo=0),
}
_ENUMS = {"role": ROLES, "sex": SEXES, "reporting": REPORTING}


def _read_frame(data):
    dtypes = {c: "category" for c in ("country", *_ENUMS)}
    dtypes.update({"hid": str, "pid": str})
    dtypes.update({c: np.float64 for c in _NUMERIC})
    try:
        frame = pd.read_csv(io.BytesIO(data), dtype=dtypes, keep_default_na=False,
                            na_values={"age": [""], "earnings": [""]}, engine="c")
    except UnicodeDecodeError:
        try:
            data.decode("utf-8")
        except UnicodeDecodeError as exc:
            line = data.count(b"\n", 0, exc.start) + 1
            raise MalformedRowError(line, "invalid UTF-8") from None
        raise
    except ValueError as exc:
        # slow path, only to name the offending line
        frame = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False,
                            na_filter=False, engine="c")
        for column, rule in _NUMERIC.items():
            _parse_numeric(frame[column], column, **rule)
        raise MalformedRowError(0, f"unparsable input: {exc}") from exc
    for column, rule in _NUMERIC.items():
        try:
            frame[column] = _parse_numeric(None, column, parsed=frame[column].to_numpy(), **rule)
        except MalformedRowError:
            text_col = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False,
                                   na_filter=False, usecols=[column])[column]
            _parse_numeric(text_col, column, **rule)
            raise
    return frame


def ingest(source):
    """Read a person CSV.

    Parameters
    ----------
    source : path, bytes, or binary/text file object

    Returns
    -------
    records : pandas.DataFrame
        One row per person with typed columns; ``age`` and ``earnings`` are
        NaN where missing.
    metas : dict
        ``(country, year) -> DatasetMeta`` in sorted key order.

    Raises
    ------
    MalformedRowError
        Wrong header or column count, unparsable number, unknown enum token.
        The message names the offending line.
    InconsistentReportingError
        A dataset mixes reporting flags across its rows.
    """
    data = _read_bytes(source)
    _check_structure(data)
    frame = _read_frame(data)
    del data
    for column, allowed in _ENUMS.items():
        frame[column] = _check_enum(column, frame[column], allowed)
    frame["year"] = frame["year"].astype(np.int64)
    records = frame[COLUMNS]

    metas = {}
    if len(records):
        flags = (records.groupby(["country", "year"], observed=True)["reporting"]
                 .agg(["nunique", "first", "size"]))
        for (country, year), row in flags.sort_index().iterrows():
            if row["nunique"] != 1:
                raise InconsistentReportingError(
                    f"dataset {country} {year} mixes reporting flags")
            metas[(str(country), int(year))] = DatasetMeta(
                country=str(country), year=int(year),
                reporting=str(row["first"]), raw=int(row["size"]))
    return records, metas


def iter_records(records):
    """Yield :class:`PersonRecord` objects from an ingested frame."""
    for row in records.itertuples(index=False):
        yield PersonRecord(
            country=str(row.country), year=int(row.year), hid=row.hid,
            pid=row.pid, role=str(row.role), sex=str(row.sex),
            age=None if np.isnan(row.age) else int(row.age),
            earnings=None if np.isnan(row.earnings) else float(row.earnings),
            weight=float(row.weight), reporting=str(row.reporting))


def iter_datasets(records, metas):
    """Yield ``(meta, block)`` per dataset in (country, year) order."""
    if not len(records):
        return
    for (country, year), block in records.groupby(["country", "year"],
                                                  observed=True, sort=True):
        yield metas[(str(country), int(year))], block


def validate(meta):
    """Accept net-reported datasets; reject mixed and gross ones."""
    if meta.reporting == "net":
        return Verdict(True)
    if meta.reporting == "mixed":
        return Verdict(False, "mixed gross/net earnings; dropped")
    if meta.reporting == "gross":
        return Verdict(False, "gross earnings; netting-down out of scope")
    return Verdict(False, f"unknown reporting flag {meta.reporting!r}")


# -- couple formation ----------------------------------------------------------

def form_couples(records, config=None, meta=None):
    """Reduce one dataset's person records to heterosexual couple households.

    A household is kept when it has exactly one head and one partner, one
    of each sex, both aged within ``[age_min, age_max]``, and a positive
    weight (the head's).  Other members are ignored.  Missing earnings
    become 0.  Drop counts are tallied on ``meta`` when given.
    """
    config = config or PreprocessConfig()
    if meta is None:
        if len(records):
            first = records.iloc[0]
            meta = DatasetMeta(str(first["country"]), int(first["year"]),
                               str(first["reporting"]), raw=len(records))
        else:
            meta = DatasetMeta("", 0, "net")
    if records["country"].nunique() > 1 or records["year"].nunique() > 1:
        raise HhIneqError("form_couples expects records from a single dataset")

    role = records["role"].astype(str).to_numpy()
    heads = records[role == "head"]
    partners = records[role == "partner"]

    n_heads = heads.groupby("hid", sort=False).size()
    n_partners = partners.groupby("hid", sort=False).size()
    counts = pd.concat([n_heads.rename("h"), n_partners.rename("p")],
                       axis=1).fillna(0).astype(int)
    meta.tally("multiple_heads", (counts.h > 1).sum())
    meta.tally("multiple_partners", ((counts.h == 1) & (counts.p > 1)).sum())
    meta.tally("orphan_head", ((counts.h == 1) & (counts.p == 0)).sum())
    meta.tally("no_head", (counts.h == 0).sum())
    good = counts.index[(counts.h == 1) & (counts.p == 1)]

    cols = ["hid", "sex", "age", "earnings", "weight"]
    h = heads[heads["hid"].isin(good)][cols].set_index("hid").reindex(good)
    p = partners[partners["hid"].isin(good)][cols].set_index("hid").reindex(good)
    h_sex = h["sex"].astype(str).to_numpy()
    p_sex = p["sex"].astype(str).to_numpy()
    h_age = h["age"].to_numpy()
    p_age = p["age"].to_numpy()
    weight = h["weight"].to_numpy()

    hetero = h_sex != p_sex
    with np.errstate(invalid="ignore"):
        age_ok = ((h_age >= config.age_min) & (h_age <= config.age_max)
                  & (p_age >= config.age_min) & (p_age <= config.age_max))
    weight_ok = weight > 0
    meta.tally("same_sex", (~hetero).sum())
    meta.tally("age", (hetero & ~age_ok).sum())
    meta.tally("weight", (hetero & age_ok & ~weight_ok).sum())
    keep = hetero & age_ok & weight_ok

    h_earn = h["earnings"].to_numpy()[keep]
    p_earn = p["earnings"].to_numpy()[keep]
    head_male = h_sex[keep] == "male"
    male = np.where(head_male, h_earn, p_earn)
    female = np.where(head_male, p_earn, h_earn)
    missing = np.isnan(male).sum() + np.isnan(female).sum()
    meta.tally("missing_earnings_zeroed", missing)
    male = np.nan_to_num(male, nan=0.0)
    female = np.nan_to_num(female, nan=0.0)
    meta.tally("zero_earnings",
               (male == 0).sum() + (female == 0).sum() - missing)

    hid = np.asarray(good)[keep].astype(str)
    order = np.argsort(hid, kind="stable")
    meta.retained = int(keep.sum())
    return Couples(male=male[order], female=female[order],
                   weight=weight[keep][order], hid=hid[order],
                   country=meta.country, year=meta.year, meta={"dataset": meta})


# -- cleaning ----------------------------------------------------------------

def weighted_quantile(values, weights, p):
    """Smallest value whose cumulative weight reaches ``p`` of the total.

    Values are sorted ascending with a stable sort.

    >>> weighted_quantile([1, 2], [3, 1], 0.5)
    1.0
    """
    y = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if y.size == 0:
        raise EmptyDataError("weighted_quantile of an empty sample")
    if w.shape != y.shape:
        raise HhIneqError("values and weights differ in length")
    if np.any(~(w > 0)):
        raise HhIneqError("weights must be strictly positive")
    if not 0 < p < 1:
        raise HhIneqError("p must lie strictly between 0 and 1")
    order = np.argsort(y, kind="stable")
    cum = np.cumsum(w[order])
    target = p * fsum(w)
    i = int(np.searchsorted(cum, target, side="left"))
    return float(y[order][min(i, y.size - 1)])


class EarningsTopCoder(TransformerMixin, BaseEstimator):
    """Cap earnings at a weighted upper quantile learnt from the data.

    ``fit`` zeroes negatives and NaNs, then stores the weighted ``p``-quantile
    in ``threshold_``; ``transform`` applies the same zeroing and caps at
    ``threshold_``.
    """

    def __init__(self, p=0.99):
        self.p = p

    @staticmethod
    def _floor(X):
        X = np.asarray(X, dtype=float)
        X = np.where(np.isnan(X), 0.0, X)
        return np.maximum(X, 0.0)

    def fit(self, X, y=None, sample_weight=None):
        X = self._floor(X)
        flat = X.ravel()
        if sample_weight is None:
            w = np.ones(flat.size)
        else:
            w = np.asarray(sample_weight, dtype=float)
            if X.ndim == 2 and w.size == X.shape[0]:
                w = np.repeat(w, X.shape[1])
        self.threshold_ = weighted_quantile(flat, w, self.p)
        self.n_features_in_ = 1 if X.ndim == 1 else X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "threshold_")
        return np.minimum(self._floor(X), self.threshold_)


def clean_earnings(couples, config=None):
    """Zero negative or missing earnings, then top-code at the weighted quantile.

    The quantile is taken over both spouses pooled, each carrying the
    household weight.  Applying the function twice changes nothing.
    """
    config = config or PreprocessConfig()
    if len(couples) == 0:
        raise EmptyDataError("no couples to clean")
    coder = EarningsTopCoder(config.topcode_p)
    X = couples.incomes()
    negatives = int(np.sum(X < 0))
    coder.fit(X, sample_weight=couples.weight)
    X = coder.transform(X)
    meta = couples.meta.get("dataset")
    if meta is not None:
        meta.tally("negative_earnings_zeroed", negatives)
        meta.topcode_threshold = coder.threshold_
    return couples.replace(male=X[:, 0], female=X[:, 1])


def women_share(couples, mode="aggregate"):
    """Women's share of couple earnings, in percent.

    ``mode="aggregate"`` divides total weighted female earnings by total
    weighted couple earnings; ``mode="mean_of_shares"`` averages each
    couple's female share over couples with positive earnings.
    """
    if len(couples) == 0:
        raise EmptyDataError("no couples")
    w = couples.weight
    total = couples.total()
    if mode == "aggregate":
        denom = fsum(w * total)
        if not denom > 0:
            raise EmptyDataError("aggregate couple earnings are zero")
        return 100.0 * fsum(w * couples.female) / denom
    if mode in ("mean", "mean_of_shares"):
        pos = total > 0
        if not pos.any():
            raise EmptyDataError("no couple has positive earnings")
        shares = couples.female[pos] / total[pos]
        return 100.0 * fsum(w[pos] * shares) / fsum(w[pos])
    raise HhIneqError(f"unknown share mode {mode!r}")


def prepare_datasets(records, metas, config=None):
    """Run validation, couple formation and cleaning over every dataset.

    Yields ``(meta, verdict, couples)``; ``couples`` is None for rejected
    datasets.
    """
    config = config or PreprocessConfig()
    for meta, block in iter_datasets(records, metas):
        verdict = validate(meta)
        if not verdict:
            log.info("skipping %s %s: %s", meta.country, meta.year, verdict.reason)
            yield meta, verdict, None
            continue
        couples = form_couples(block, config, meta)
        if len(couples) == 0:
            yield meta, Verdict(False, "no couples retained"), None
            continue
        yield meta, verdict, clean_earnings(couples, config)
