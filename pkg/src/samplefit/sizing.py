"""Minimum sufficient sample-size estimation, without training anything.

Whether a candidate size n would satisfy the contract is judged entirely
from the initial model's statistics: parameters for the hypothetical
size-n model and for the full model are drawn jointly in two stages,

    theta_n,i = theta_0 + sqrt(1/n0 - 1/n) * b1_i
    theta_N,i = theta_n,i + sqrt(1/n - 1/N)  * b2_i

with b1, b2 independent base draws from N(0, H^-1 J H^-1). The raw pass
probability p = (1/k) sum 1{v(theta_n,i, theta_N,i) <= eps} is adjusted
conservatively (same Hoeffding slack as the accuracy estimator) before
being compared against 1 - delta. Because the probability is increasing
in n, a binary search over [n0, N] finds the smallest passing size in
O(log2(N - n0)) probes; the two base-draw blocks are drawn once and only
rescaled per probe, so the search sees common random numbers.

Also houses the three baseline sizing strategies used by the benchmark
harness (fixed 1% ratio, accuracy-relative ratio, quadratic increments).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import models
from .accuracy import conservative_quantile_threshold, hoeffding_margin
from .data import Dataset
from .sampling import ParamSampler, size_scale


@dataclass(frozen=True)
class Probe:
    n: int
    p_raw: float
    p_conservative: float
    passed: bool
    alpha1: float
    alpha2: float

    def to_list(self):
        return [self.n, self.p_raw, self.p_conservative, self.passed]


@dataclass(frozen=True)
class SizeEstimate:
    n_star: int
    probes: list[Probe] = field(default_factory=list)
    k: int = 0
    saturated: bool = False

    def to_dict(self) -> dict:
        return {
            "n_star": self.n_star,
            "k": self.k,
            "saturated": self.saturated,
            "probes": [
                {
                    "n": p.n,
                    "p_raw": p.p_raw,
                    "p_conservative": p.p_conservative,
                    "passed": p.passed,
                    "alpha1": p.alpha1,
                    "alpha2": p.alpha2,
                }
                for p in self.probes
            ],
        }


def joint_sample(theta_0: np.ndarray, sampler: ParamSampler, n0: int, n: int,
                 N: int, k: int, base1: np.ndarray | None = None,
                 base2: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """k joint draws (theta_n_i, theta_N_i) conditioned on theta_0.

    Callers may pass pre-drawn base blocks to reuse them across sizes;
    fresh independent blocks are drawn otherwise.
    """
    if not n0 <= n <= N:
        raise ValueError(f"need n0 <= n <= N, got n0={n0}, n={n}, N={N}")
    theta_0 = np.asarray(theta_0, dtype=np.float64)
    if base1 is None:
        base1 = sampler.draw_base(k)
    if base2 is None:
        base2 = sampler.draw_base(k)
    theta_n = theta_0[None, :] + size_scale(n0, n) * base1
    theta_N = theta_n + size_scale(n, N) * base2
    return theta_n, theta_N


def prob_within(theta_0, sampler, holdout: Dataset | None, spec, n0: int, n: int,
                N: int, eps: float, k: int,
                base1=None, base2=None) -> tuple[float, float]:
    """(raw, conservative) probability that a size-n model stays within eps."""
    theta_n, theta_N = joint_sample(theta_0, sampler, n0, n, N, k, base1, base2)
    v = models.diff_pairs(spec, theta_n, theta_N, holdout)
    p_raw = float(np.mean(v <= eps))
    p_cons = 0.95 * (p_raw - hoeffding_margin(k))
    return p_raw, p_cons


def min_sample_size(theta_0, sampler, holdout: Dataset | None, spec, n0: int,
                    N: int, eps: float, delta: float, k: int = 100) -> SizeEstimate:
    """Smallest n in [n0, N] whose conservative pass probability reaches
    1 - delta, by binary search with common random numbers.

    The pass rule is p_raw >= min(tau, 1) with tau the conservative
    quantile threshold; for delta <= 0.05 (tau >= 1) a probe must
    therefore have every draw within eps. If even n = N fails, N is
    returned with ``saturated`` set -- training on everything still
    meets the contract. No models are trained here.
    """
    if not 1 <= n0 <= N:
        raise ValueError(f"need 1 <= n0 <= N, got n0={n0}, N={N}")
    tau = conservative_quantile_threshold(delta, k)
    need = min(tau, 1.0)
    base1 = sampler.draw_base(k)
    base2 = sampler.draw_base(k)
    probes: list[Probe] = []

    def probe(n: int) -> bool:
        p_raw, p_cons = prob_within(
            theta_0, sampler, holdout, spec, n0, n, N, eps, k, base1, base2
        )
        passed = p_raw >= need
        probes.append(
            Probe(
                n=n, p_raw=p_raw, p_conservative=p_cons, passed=passed,
                alpha1=1.0 / n0 - 1.0 / n, alpha2=1.0 / n - 1.0 / N,
            )
        )
        return passed

    if probe(n0):
        return SizeEstimate(n_star=n0, probes=probes, k=k)
    if n0 == N or not probe(N):
        return SizeEstimate(n_star=N, probes=probes, k=k, saturated=True)
    lo, hi = n0, N  # lo fails, hi passes
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return SizeEstimate(n_star=hi, probes=probes, k=k, saturated=hi == N)


BASELINE_STRATEGIES = ("fixed_ratio", "relative_ratio", "inc_estimator")


def baseline_size(strategy: str, eps: float, N: int, iteration: int = 1) -> int:
    """Sample size under one of the reference strategies.

    fixed_ratio: always 1% of N. relative_ratio: (1 - eps) * 10% of N.
    inc_estimator: 1000 * iteration^2, independent of eps and N.
    """
    if strategy == "fixed_ratio":
        return math.ceil(0.01 * N)
    if strategy == "relative_ratio":
        return math.ceil((1.0 - eps) * 0.1 * N)
    if strategy == "inc_estimator":
        if iteration < 1:
            raise ValueError("inc_estimator iteration starts at 1")
        return 1000 * iteration * iteration
    raise ValueError(f"unknown strategy {strategy!r}")
