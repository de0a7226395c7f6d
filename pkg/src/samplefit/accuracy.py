"""Monte-Carlo error-bound estimation for an approximate model.

Given a model trained on n of N rows and a confidence parameter delta,
draw k plausible full-data parameter vectors, measure the prediction
difference v against each, and report the smallest bound epsilon that a
conservative Hoeffding-adjusted fraction of the draws stays under:

    tau = (1 - delta) / 0.95 + sqrt(log 0.95 / (-2 k))

epsilon is the ceil(min(tau, 1) * k)-th order statistic of the k measured
differences. For delta <= 0.05 the threshold tau reaches or exceeds 1, in
which case the reported bound is the maximum of the k draws -- the most
conservative estimate k draws support -- and the report is flagged
``clamped``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import models
from .data import Dataset
from .sampling import ParamSampler, sample_full_given_approx


@dataclass(frozen=True)
class AccuracyReport:
    epsilon: float
    delta: float
    k: int
    tau: float
    v_samples: np.ndarray = field(repr=False)
    clamped: bool = False

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "k": self.k,
            "tau": self.tau,
            "clamped": self.clamped,
            "v_samples": np.asarray(self.v_samples).tolist(),
        }


def conservative_quantile_threshold(delta: float, k: int) -> float:
    """The fraction of Monte-Carlo draws that must sit below the bound."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if k < 2:
        raise ValueError("k must be >= 2")
    return (1.0 - delta) / 0.95 + math.sqrt(math.log(0.95) / (-2.0 * k))


def hoeffding_margin(k: int) -> float:
    """sqrt(log 0.95 / (-2k)): the finite-k slack in the threshold."""
    return math.sqrt(math.log(0.95) / (-2.0 * k))


def bound_from_samples(v_samples: np.ndarray, delta: float) -> tuple[float, float, bool]:
    """(epsilon, tau, clamped) from measured model differences."""
    v_samples = np.asarray(v_samples, dtype=np.float64)
    k = v_samples.shape[0]
    tau = conservative_quantile_threshold(delta, k)
    clamped = tau >= 1.0
    order = math.ceil(min(tau, 1.0) * k)
    order = min(max(order, 1), k)
    eps = float(np.sort(v_samples)[order - 1])
    return eps, tau, clamped


def estimate_error_bound(model: models.TrainedModel, sampler: ParamSampler,
                         holdout: Dataset | None, delta: float,
                         k: int = 100) -> AccuracyReport:
    """Bound the prediction difference against the untrained full model.

    Draws k parameter vectors from the conditional full-model law, scores
    the holdout under each, and returns the conservative order-statistic
    bound; with probability at least 1 - delta the true difference does
    not exceed it.
    """
    if model.spec.needs_labels and (holdout is None or holdout.n_rows == 0):
        raise ValueError("supervised model classes need a non-empty holdout")
    tau = conservative_quantile_threshold(delta, k)  # validates delta, k
    thetas = sample_full_given_approx(sampler, model.theta, model.n, model.N, k)
    v = models.diff_many(model.spec, model.theta, thetas, holdout)
    eps, tau, clamped = bound_from_samples(v, delta)
    return AccuracyReport(
        epsilon=eps, delta=delta, k=k, tau=tau, v_samples=v, clamped=clamped
    )


def v_of(spec: models.ModelSpec, theta_a, theta_b, holdout: Dataset | None) -> float:
    """Prediction difference between two parameter vectors (same metric
    as ``models.diff`` without needing TrainedModel wrappers)."""
    return models.diff_params(spec, theta_a, theta_b, holdout)
