"""Bayesian clustering of shot-count surfaces with a mixture of finite mixtures
of zero-inflated Poisson regressions."""

__version__ = "0.1.0"

from .baselines import kmeans, mean_shift, rand_index
from .basis import build_design, kde_grid, nmf
from .court import CountMatrix, CourtGrid, ShotRecord, bin_shots, count_histogram
from .mfm import MfmPrior, compute_vn, urn_weights
from .posterior import dahl_select, hpd_interval, summarize
from .sampler import FitConfig, MCMCTrace, ZipMfmSampler, run_chain
from .simgen import generate, study_design
from .zipoisson import fit_zip_mle, zip_logpmf, zip_pmf, zip_sample

__all__ = [
    "__version__",
    "CountMatrix",
    "CourtGrid",
    "FitConfig",
    "MCMCTrace",
    "MfmPrior",
    "ShotRecord",
    "ZipMfmSampler",
    "bin_shots",
    "build_design",
    "compute_vn",
    "count_histogram",
    "dahl_select",
    "fit_zip_mle",
    "generate",
    "hpd_interval",
    "kde_grid",
    "kmeans",
    "mean_shift",
    "nmf",
    "study_design",
    "rand_index",
    "run_chain",
    "summarize",
    "urn_weights",
    "zip_logpmf",
    "zip_pmf",
    "zip_sample",
]
