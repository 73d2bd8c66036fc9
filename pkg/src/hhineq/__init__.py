"""Within- and between-household decomposition of couple earnings inequality."""

from ._validation import DegenerateSampleError, EmptyDataError, HhIneqError
from .decomposition import (DecompResult, GroupStat, TheilDecomposition,
                            between_sex_contribution, decompose,
                            within_household_contribution)
from .households import CoupleHousehold, Couples
from .measures import (atkinson_loss, edei, ge_index, household_losses,
                       mean_log_deviation, theil_t, weighted_mean)
from .pipeline import (DatasetMeta, EarningsTopCoder, PersonRecord,
                       PreprocessConfig, clean_earnings, form_couples, ingest,
                       validate, weighted_quantile, women_share)
from .report import (CountryYearSummary, LoessConfig, LoessSmoother,
                     country_means, global_trend, loess, pearson,
                     scatter_export, summarize)
from .synthgen import SynthParams, generate, rho_sweep

__version__ = "0.1.0"
