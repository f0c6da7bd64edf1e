"""Extremum laws for win-probability martingales, a Monte Carlo oracle and
calibration diagnostics."""

from ._backend import BACKEND
from .laws import (
    DomainError,
    Law,
    LawKind,
    Prior,
    PriorVector,
    discrete_tail_bound,
    finance_loss_cdf,
    loser_max_cdf,
    max_cdf_conditional_loss,
    max_cdf_unconditional,
    quantile,
    winner_min_cdf,
)
from .paths import NPlayerSeries, Outcome, WinProbSeries, first_passage, loser_peak, path_max, winner_min
from .stats import (
    PathSample,
    TestResult,
    bh_fdr_reject,
    bonferroni_reject,
    ecdf_eval,
    kl_divergence_binned,
    kolmogorov_sf,
    ks_pvalue,
    ks_statistic,
)

__version__ = "0.1.0"
