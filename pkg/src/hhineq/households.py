"""Couple-household containers.

A :class:`Couples` set is stored column-wise so that a million households
cost a handful of arrays rather than a million objects; iterating over it
yields :class:`CoupleHousehold` rows.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ._validation import HhIneqError


class CoupleHousehold(NamedTuple):
    hid: str
    male_earnings: float
    female_earnings: float
    weight: float
    country: str = ""
    year: Optional[int] = None


@dataclass(eq=False)
class Couples:
    """Column store of couple households from one or more datasets.

    Parameters
    ----------
    male, female : array-like
        Annual earnings of the man and the woman in each household.
    weight : array-like, optional
        Household sampling weight, applied to both spouses.  Unit weights
        if omitted.
    hid : array-like, optional
        Household identifiers; ``"0", "1", ...`` if omitted.
    country, year : str, int
        Dataset tags.
    """

    male: np.ndarray
    female: np.ndarray
    weight: Optional[np.ndarray] = None
    hid: Optional[np.ndarray] = None
    country: str = ""
    year: Optional[int] = None
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.male = np.asarray(self.male, dtype=float).ravel()
        self.female = np.asarray(self.female, dtype=float).ravel()
        n = self.male.size
        if self.female.size != n:
            raise HhIneqError("male and female earnings differ in length")
        if self.weight is None:
            self.weight = np.ones(n)
        else:
            self.weight = np.asarray(self.weight, dtype=float).ravel()
            if self.weight.size != n:
                raise HhIneqError("weights differ in length from earnings")
        if self.hid is None:
            self.hid = np.arange(n).astype(str)
        else:
            self.hid = np.asarray(self.hid).astype(str)

    @classmethod
    def from_households(cls, households, country="", year=None):
        rows = list(households)
        if rows:
            country = country or rows[0].country
            year = year if year is not None else rows[0].year
        return cls(
            male=[h.male_earnings for h in rows],
            female=[h.female_earnings for h in rows],
            weight=[h.weight for h in rows],
            hid=[h.hid for h in rows],
            country=country,
            year=year,
        )

    @classmethod
    def from_pairs(cls, pairs, weights=None, **tags):
        """Build from ``(male, female)`` pairs.

        >>> len(Couples.from_pairs([(1, 1), (1, 3)]))
        2
        """
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(male=arr[:, 0], female=arr[:, 1], weight=weights, **tags)

    def __len__(self):
        return self.male.size

    def __iter__(self):
        for i in range(len(self)):
            yield CoupleHousehold(str(self.hid[i]), float(self.male[i]),
                                  float(self.female[i]), float(self.weight[i]),
                                  self.country, self.year)

    def replace(self, **changes):
        kw = dict(male=self.male, female=self.female, weight=self.weight,
                  hid=self.hid, country=self.country, year=self.year,
                  meta=dict(self.meta))
        kw.update(changes)
        return Couples(**kw)

    def subset(self, mask):
        return self.replace(male=self.male[mask], female=self.female[mask],
                            weight=self.weight[mask], hid=self.hid[mask])

    def incomes(self):
        """``(n, 2)`` array of (male, female) earnings."""
        return np.column_stack([self.male, self.female])

    def total(self):
        return self.male + self.female

    def persons(self):
        """Person-level view: values, weights, household index, is_female.

        Each household contributes its man then its woman, both carrying the
        household weight.
        """
        n = len(self)
        values = np.empty(2 * n)
        values[0::2] = self.male
        values[1::2] = self.female
        weights = np.repeat(self.weight, 2)
        household = np.repeat(np.arange(n), 2)
        female = np.tile(np.array([False, True]), n)
        return values, weights, household, female
