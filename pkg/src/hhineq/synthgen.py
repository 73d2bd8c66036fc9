"""Seeded synthetic couple populations with tunable assortative mating.

Each household draws four uniforms in the fixed order
``(u_zm, u_zf, u_pm, u_pf)`` from NumPy's PCG64 bit generator
(``numpy.random.Generator(PCG64(seed))``, ``Generator.random``).  The first
two are mapped to independent standard normals by the inverse normal CDF
and correlated through the 2x2 Cholesky factor::

    z_m = e_1
    z_f = rho * e_1 + sqrt(1 - rho**2) * e_2

Earnings are ``exp(mu + sigma * z)`` when the participation uniform falls
below the participation probability, else 0.  Every household has weight 1.
"""

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy.special import ndtri

from ._validation import HhIneqError
from .decomposition import within_household_contribution
from .households import Couples

# keeps ndtri finite: uniforms are drawn on [0, 1)
_U_MIN = np.finfo(float).tiny


@dataclass(frozen=True)
class SynthParams:
    n: int = 10_000
    rho: float = 0.0
    mu_m: float = 10.0
    mu_f: float = 10.0
    sigma_m: float = 0.7
    sigma_f: float = 0.7
    pi_m: float = 1.0
    pi_f: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n <= 0:
            raise HhIneqError("n must be a positive integer")
        if not -1.0 <= self.rho <= 1.0:
            raise HhIneqError("rho must lie in [-1, 1]")
        if not (self.sigma_m > 0 and self.sigma_f > 0):
            raise HhIneqError("log standard deviations must be positive")
        for name in ("pi_m", "pi_f"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise HhIneqError(f"{name} must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise HhIneqError("seed must be a 64-bit unsigned integer")


def generate(params, country="XX", year=2000):
    """Draw a synthetic couple population.

    The same ``params`` always give bit-identical output.
    """
    rng = np.random.Generator(np.random.PCG64(params.seed))
    u = rng.random((params.n, 4))
    e = ndtri(np.maximum(u[:, :2], _U_MIN))
    z_m = e[:, 0]
    z_f = params.rho * e[:, 0] + np.sqrt(1.0 - params.rho**2) * e[:, 1]
    male = np.where(u[:, 2] < params.pi_m,
                    np.exp(params.mu_m + params.sigma_m * z_m), 0.0)
    female = np.where(u[:, 3] < params.pi_f,
                      np.exp(params.mu_f + params.sigma_f * z_f), 0.0)
    hid = np.char.add("h", np.arange(params.n).astype(str))
    return Couples(male=male, female=female, weight=np.ones(params.n),
                   hid=hid, country=country, year=year)


def rho_sweep(base, grid, reps=20):
    """Mean within-household Theil share for each spousal correlation in ``grid``.

    Replicate ``r`` uses seed ``base.seed + r``.  Returns ``(rho, mean)``
    pairs in grid order.
    """
    if reps < 1:
        raise HhIneqError("reps must be at least 1")
    out = []
    for rho in grid:
        shares = []
        for r in range(reps):
            couples = generate(replace(base, rho=float(rho), seed=base.seed + r))
            share = within_household_contribution(couples)
            shares.append(0.0 if share is None else share)
        out.append((float(rho), float(np.mean(shares))))
    return out


def to_person_frame(couples, reporting="net", age=40):
    """Person-level table in the ingestion CSV schema (two rows per couple)."""
    n = len(couples)
    hid = np.repeat(couples.hid, 2)
    return pd.DataFrame({
        "country": couples.country,
        "year": couples.year,
        "hid": hid,
        "pid": np.char.add(hid.astype(str), np.tile(["-1", "-2"], n)),
        "role": np.tile(["head", "partner"], n),
        "sex": np.tile(["male", "female"], n),
        "age": age,
        "earnings": np.column_stack([couples.male, couples.female]).ravel(),
        "weight": np.repeat(couples.weight, 2),
        "reporting": reporting,
    })
