"""End-to-end workflow: train under an accuracy contract with at most two
model trainings.

Given a contract (eps, delta) the coordinator trains one initial model on
n0 rows, bounds its difference against the (untrained) full-data model,
and returns it if the bound already meets eps. Otherwise it estimates the
minimum sufficient sample size -- without training intermediates -- trains
one final model on that many rows, and re-certifies it with fresh
statistics. The final sample extends the initial one (nested samples via
a single permutation), and the final optimization warm-starts from the
initial parameters.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import models, optimize, sizing
from .accuracy import AccuracyReport, estimate_error_bound
from .data import DataSplit
from .sampling import build_sampler
from .sizing import SizeEstimate
from .stats import compute_statistics

STATS_METHODS = ("observed-fisher", "closed-form", "inverse-gradients")


@dataclass(frozen=True)
class Contract:
    """Requested error bound eps at confidence 1 - delta, with the size of
    the initial training sample."""

    eps: float
    delta: float = 0.05
    n0: int = 10000

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must be in (0, 1), got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")

    def to_dict(self) -> dict:
        return {"eps": self.eps, "delta": self.delta, "n0": self.n0}


@dataclass
class RunReport:
    contract: Contract | None
    initial_model: models.TrainedModel
    initial_accuracy: AccuracyReport
    final_model: models.TrainedModel | None = None
    final_accuracy: AccuracyReport | None = None
    size_estimate: SizeEstimate | None = None
    trainings_performed: int = 1
    timings: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def model(self) -> models.TrainedModel:
        return self.final_model if self.final_model is not None else self.initial_model

    @property
    def delivered_epsilon(self) -> float:
        rep = self.final_accuracy if self.final_accuracy is not None else self.initial_accuracy
        return rep.epsilon

    @property
    def saturated(self) -> bool:
        return self.size_estimate is not None and self.size_estimate.saturated

    @property
    def contract_met(self) -> bool:
        if self.contract is None:
            return True
        if self.final_model is None:
            return self.initial_accuracy.epsilon <= self.contract.eps
        # the final model was sized by the estimator (or is the full model)
        return True

    def to_dict(self) -> dict:
        doc = {
            "contract": self.contract.to_dict() if self.contract else None,
            "initial": {
                "model": models.model_to_dict(self.initial_model),
                "accuracy": self.initial_accuracy.to_dict(),
            },
            "final": None,
            "size_estimate": self.size_estimate.to_dict() if self.size_estimate else None,
            "trainings_performed": self.trainings_performed,
            "timings": self.timings,
            "seeds": self.seeds,
        }
        if self.final_model is not None:
            doc["final"] = {
                "model": models.model_to_dict(self.final_model),
                "n": self.final_model.n,
                "accuracy": self.final_accuracy.to_dict(),
            }
        doc.update(self.extra)
        return doc

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _spawn_seeds(seed: int) -> dict:
    roles = ("permutation", "init", "initial_accuracy", "size_search", "final_accuracy")
    children = np.random.SeedSequence(seed).spawn(len(roles))
    return {"master": seed, **{r: c for r, c in zip(roles, children)}}


def generalization_bound(eps_g: float, eps: float) -> float:
    """Bound on the full model's holdout error, given the approximate
    model's measured holdout error eps_g and the contract bound eps:
    eps_g + eps - eps_g * eps."""
    if not 0.0 <= eps_g <= 1.0 or not 0.0 <= eps <= 1.0:
        raise ValueError("both error rates must lie in [0, 1]")
    return eps_g + eps - eps_g * eps


def train_with_contract(split: DataSplit, spec: models.ModelSpec, contract: Contract,
                        optimizer_config: optimize.OptimizerConfig | None = None,
                        stats_method: str = "observed-fisher",
                        k: int = 100, seed: int = 0) -> RunReport:
    """Train an approximate model meeting ``contract`` on ``split.train``.

    Returns a RunReport whose ``model`` differs from the untrained
    full-data model by at most ``contract.eps`` with probability at least
    ``1 - contract.delta``. At most two trainings are performed; the
    sample-size search trains nothing.
    """
    train, holdout = split.train, split.holdout
    N = train.n_rows
    if contract.n0 > N:
        raise ValueError(f"initial sample size {contract.n0} exceeds N={N}")
    if stats_method not in STATS_METHODS:
        raise ValueError(f"unknown statistics method {stats_method!r}")
    config = optimizer_config or optimize.OptimizerConfig()
    seeds = _spawn_seeds(seed)
    timings: dict = {}
    t_start = time.perf_counter()

    perm = np.random.default_rng(seeds["permutation"]).permutation(N)
    d0 = train.subset(perm[: contract.n0])

    t0 = time.perf_counter()
    m0 = optimize.fit_model(
        spec, d0, population_size=N, config=config,
        rng=np.random.default_rng(seeds["init"]),
    )
    timings["initial_train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    m0_stats = compute_statistics(spec, m0.theta, d0, stats_method)
    timings["statistics"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    acc_sampler = build_sampler(m0_stats, seed=seeds["initial_accuracy"])
    initial_accuracy = estimate_error_bound(m0, acc_sampler, holdout, contract.delta, k)
    timings["initial_accuracy"] = time.perf_counter() - t0

    report = RunReport(
        contract=contract,
        initial_model=m0,
        initial_accuracy=initial_accuracy,
        trainings_performed=1,
        timings=timings,
        seeds={"master": seed},
    )
    if initial_accuracy.epsilon <= contract.eps:
        timings["total"] = time.perf_counter() - t_start
        return report

    t0 = time.perf_counter()
    size_sampler = build_sampler(m0_stats, seed=seeds["size_search"])
    estimate = sizing.min_sample_size(
        m0.theta, size_sampler, holdout, spec,
        n0=contract.n0, N=N, eps=contract.eps, delta=contract.delta, k=k,
    )
    timings["size_search"] = time.perf_counter() - t0
    report.size_estimate = estimate

    dn = train.subset(perm[: estimate.n_star])
    t0 = time.perf_counter()
    m_final = optimize.fit_model(
        spec, dn, population_size=N, config=config, init=m0.theta,
    )
    timings["final_train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    final_stats = compute_statistics(spec, m_final.theta, dn, stats_method)
    final_sampler = build_sampler(final_stats, seed=seeds["final_accuracy"])
    final_accuracy = estimate_error_bound(m_final, final_sampler, holdout, contract.delta, k)
    timings["final_accuracy"] = time.perf_counter() - t0

    report.final_model = m_final
    report.final_accuracy = final_accuracy
    report.trainings_performed = 2
    timings["total"] = time.perf_counter() - t_start
    return report


def estimate_size_only(split: DataSplit, spec: models.ModelSpec, contract: Contract,
                       optimizer_config: optimize.OptimizerConfig | None = None,
                       stats_method: str = "observed-fisher",
                       k: int = 100, seed: int = 0) -> RunReport:
    """Train the initial model and estimate the minimum sufficient sample
    size, skipping the final training."""
    train, holdout = split.train, split.holdout
    N = train.n_rows
    if contract.n0 > N:
        raise ValueError(f"initial sample size {contract.n0} exceeds N={N}")
    config = optimizer_config or optimize.OptimizerConfig()
    seeds = _spawn_seeds(seed)
    timings: dict = {}
    t_start = time.perf_counter()

    perm = np.random.default_rng(seeds["permutation"]).permutation(N)
    d0 = train.subset(perm[: contract.n0])

    t0 = time.perf_counter()
    m0 = optimize.fit_model(
        spec, d0, population_size=N, config=config,
        rng=np.random.default_rng(seeds["init"]),
    )
    timings["initial_train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    m0_stats = compute_statistics(spec, m0.theta, d0, stats_method)
    timings["statistics"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    acc_sampler = build_sampler(m0_stats, seed=seeds["initial_accuracy"])
    initial_accuracy = estimate_error_bound(m0, acc_sampler, holdout, contract.delta, k)
    timings["initial_accuracy"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    size_sampler = build_sampler(m0_stats, seed=seeds["size_search"])
    estimate = sizing.min_sample_size(
        m0.theta, size_sampler, holdout, spec,
        n0=contract.n0, N=N, eps=contract.eps, delta=contract.delta, k=k,
    )
    timings["size_search"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    return RunReport(
        contract=contract,
        initial_model=m0,
        initial_accuracy=initial_accuracy,
        size_estimate=estimate,
        trainings_performed=1,
        timings=timings,
        seeds={"master": seed},
    )


def estimate_accuracy_only(split: DataSplit, spec: models.ModelSpec, n: int,
                           delta: float = 0.05,
                           optimizer_config: optimize.OptimizerConfig | None = None,
                           stats_method: str = "observed-fisher",
                           k: int = 100, seed: int = 0) -> RunReport:
    """Train once on a size-n sample and report its accuracy bound.

    The sample-size-specified mode: no contract, no size search, exactly
    one training.
    """
    train, holdout = split.train, split.holdout
    N = train.n_rows
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
    config = optimizer_config or optimize.OptimizerConfig()
    seeds = _spawn_seeds(seed)
    timings: dict = {}
    t_start = time.perf_counter()

    perm = np.random.default_rng(seeds["permutation"]).permutation(N)
    dn = train.subset(perm[:n])

    t0 = time.perf_counter()
    m_n = optimize.fit_model(
        spec, dn, population_size=N, config=config,
        rng=np.random.default_rng(seeds["init"]),
    )
    timings["initial_train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    m_stats = compute_statistics(spec, m_n.theta, dn, stats_method)
    timings["statistics"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sampler = build_sampler(m_stats, seed=seeds["initial_accuracy"])
    accuracy = estimate_error_bound(m_n, sampler, holdout, delta, k)
    timings["initial_accuracy"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    return RunReport(
        contract=None,
        initial_model=m_n,
        initial_accuracy=accuracy,
        trainings_performed=1,
        timings=timings,
        seeds={"master": seed},
    )
