"""Bayesian adaptive experiment design for single-spin quantum sensing."""

from .eig import (BatchPolicy, ControlGrid, EigTable, eig_table, predicted_probability,
                  sample_batch, select_optimal, throughput_bench)
from .estimator import BayesianSensingEstimator
from .exceptions import (BedsenseError, ConfigurationError, ContractError,
                         DegenerateUpdateError)
from .experiment import GroundTruth, ShotRecord, run_shot, shot_histogram
from .orchestrator import RunConfig, RunTrace, run_async, run_nonadaptive, run_sync
from .smc import (ParticleCloud, PosteriorSummary, ResamplerConfig, bayes_update,
                  effective_sample_size, init_uniform, remap_labels, resample_liu_west,
                  summarize)

__version__ = "0.1.0"
