"""samplefit: approximate maximum-likelihood training on data subsamples
with probabilistic accuracy guarantees."""

from .accuracy import AccuracyReport, estimate_error_bound
from .coordinator import (
    Contract,
    RunReport,
    estimate_accuracy_only,
    estimate_size_only,
    generalization_bound,
    train_with_contract,
)
from .data import DataError, Dataset, DataSplit, encode_labels, load_dataset, split, uniform_sample
from .estimators import ApproximateClassifier, ApproximatePCA, ApproximateRegressor
from .models import ModelSpec, TrainedModel, UnsupportedOperation, make_spec
from .optimize import MinimizeResult, OptimizationError, OptimizerConfig, minimize
from .sampling import ParamSampler, build_sampler, sample_full_given_approx, scale_draws
from .sizing import SizeEstimate, baseline_size, min_sample_size
from .stats import HessianPair, StatFactors, closed_form, inverse_gradients, observed_fisher

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "ApproximateClassifier",
    "ApproximatePCA",
    "ApproximateRegressor",
    "Contract",
    "DataError",
    "DataSplit",
    "Dataset",
    "HessianPair",
    "MinimizeResult",
    "ModelSpec",
    "OptimizationError",
    "OptimizerConfig",
    "ParamSampler",
    "RunReport",
    "SizeEstimate",
    "StatFactors",
    "TrainedModel",
    "UnsupportedOperation",
    "baseline_size",
    "build_sampler",
    "closed_form",
    "encode_labels",
    "estimate_accuracy_only",
    "estimate_error_bound",
    "estimate_size_only",
    "generalization_bound",
    "inverse_gradients",
    "load_dataset",
    "make_spec",
    "min_sample_size",
    "minimize",
    "observed_fisher",
    "sample_full_given_approx",
    "scale_draws",
    "split",
    "train_with_contract",
    "uniform_sample",
]
