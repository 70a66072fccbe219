"""Conditional forward-backward diffusion models for distribution regression."""

from .ou import OUSchedule, mean_coeff, noise_var, perturb, kernel_score, gaussian_marginal_score
from .net import NetSpec, Mlp, AdamState, adam_step, enforce_bounds, prune_to_sparsity
from .score import (
    ProblemSpec,
    TimePartition,
    TrainConfig,
    Schedule,
    ScoreModel,
    schedule_from_theory,
    sample_time,
    v_level,
    dsm_loss,
    train,
    w1_rate_exponent,
    tv_rate_exponent,
)
from .sampler import SamplerConfig, SampleResult, backward_grid, sample, euler_step, exponential_step, truncate
from .datagen import Dataset, Generator, make_generator, GENERATORS
from .metrics import w1_1d, w1_exact, w1_sliced, tv_histogram, expected_conditional_error, EvalReport

__version__ = "0.1.0"

__all__ = [
    "OUSchedule",
    "mean_coeff",
    "noise_var",
    "perturb",
    "kernel_score",
    "gaussian_marginal_score",
    "NetSpec",
    "Mlp",
    "AdamState",
    "adam_step",
    "enforce_bounds",
    "prune_to_sparsity",
    "ProblemSpec",
    "TimePartition",
    "TrainConfig",
    "Schedule",
    "ScoreModel",
    "schedule_from_theory",
    "sample_time",
    "v_level",
    "dsm_loss",
    "train",
    "w1_rate_exponent",
    "tv_rate_exponent",
    "SamplerConfig",
    "SampleResult",
    "backward_grid",
    "sample",
    "euler_step",
    "exponential_step",
    "truncate",
    "Dataset",
    "Generator",
    "make_generator",
    "GENERATORS",
    "w1_1d",
    "w1_exact",
    "w1_sliced",
    "tv_histogram",
    "expected_conditional_error",
    "EvalReport",
]
