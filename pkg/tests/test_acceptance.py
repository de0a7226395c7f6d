"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s``. The heavier harnesses
(the 3 x 40-run coverage experiment and the sizing monotonicity runs) are
computed once in session fixtures and shared by the criteria that audit
them.
"""

import math
import time

import numpy as np
import pytest

from samplefit import synthetic
from samplefit.coordinator import Contract, generalization_bound, train_with_contract
from samplefit.data import split
from samplefit.models import (
    diff,
    grads_call_count,
    make_spec,
    mean_grad,
    objective,
    param_dim,
    predict,
)
from samplefit.optimize import (
    fit_model,
    training_call_count,
    training_seconds_total,
)
from samplefit.sampling import build_sampler
from samplefit.sizing import baseline_size, min_sample_size
from samplefit.stats import (
    closed_form,
    covariance_explicit,
    inverse_gradients,
    observed_fisher,
    pair_from_factors,
)

DELTA = 0.05
COVERAGE_RUNS = 40
COVERAGE_ACCURACIES = (0.90, 0.95, 0.99)


def _report(criterion, ok, detail):
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# ---------------------------------------------------------------------------
# shared harnesses


@pytest.fixture(scope="module")
def coverage_suite():
    """3 accuracies x 40 end-to-end runs on synthetic binary classification
    (N=100000, d=10), each compared against the actually trained full model."""
    spec = make_spec("lr")
    full = synthetic.logistic_data(125_000, 10, seed=2024)
    ds = split(full, 0.2, seed=0)
    train, holdout = ds.train, ds.holdout
    N = train.n_rows
    m_full = fit_model(spec, train, population_size=N)
    pred_full = predict(spec, m_full.theta, holdout.features)
    full_err = float(np.mean(pred_full != holdout.labels))

    results = {}
    for accuracy in COVERAGE_ACCURACIES:
        eps = round(1.0 - accuracy, 10)
        runs = []
        for r in range(COVERAGE_RUNS):
            calls_before = training_call_count()
            rep = train_with_contract(
                ds, spec, Contract(eps=eps, delta=DELTA, n0=10_000),
                seed=100_000 * (r + 1) + int(accuracy * 1000),
            )
            trainings = training_call_count() - calls_before
            v = diff(spec, rep.model, m_full, holdout)
            pred_a = predict(spec, rep.model.theta, holdout.features)
            eps_g = float(np.mean(pred_a != holdout.labels))
            runs.append({
                "v": v,
                "met": v <= eps,
                "trainings": trainings,
                "reported_trainings": rep.trainings_performed,
                "eps_g": eps_g,
                "gen_bound": generalization_bound(eps_g, eps),
                "full_err": full_err,
            })
        results[accuracy] = runs
    return {"results": results, "suite": (spec, ds, m_full, N)}


@pytest.fixture(scope="module")
def sizing_runs():
    """20 independent size searches with common random numbers; records the
    probe traces and whether the search trained anything."""
    spec = make_spec("lr")
    full = synthetic.logistic_data(62_500, 8, seed=21)
    ds = split(full, 0.2, seed=0)
    train, holdout = ds.train, ds.holdout
    N = train.n_rows
    n0, k = 2000, 100
    traces, trained = [], []
    for r in range(20):
        rng = np.random.default_rng(500 + r)
        d0 = train.subset(rng.permutation(N)[:n0])
        m0 = fit_model(spec, d0, population_size=N)
        factors = observed_fisher(spec, m0.theta, d0)
        sampler = build_sampler(factors, seed=900 + r)
        before = training_call_count()
        est = min_sample_size(m0.theta, sampler, holdout, spec, n0, N,
                              eps=0.02, delta=DELTA, k=k)
        trained.append(training_call_count() - before)
        traces.append(sorted((p.n, p.p_raw) for p in est.probes))
    return {"traces": traces, "trained": trained, "k": k}


# ---------------------------------------------------------------------------
# criteria


def test_criterion_1_gradient_correctness():
    """Mean per-example gradient vs central finite differences, all four
    model classes, 20 random instances each, relative inf-norm < 1e-5."""
    h = 1e-5
    worst = 0.0
    for kind in ("lin", "lr", "me", "ppca"):
        for rep in range(20):
            seed = 1000 + 17 * rep
            rng = np.random.default_rng(seed)
            if kind == "lin":
                data = synthetic.linear_data(60, 5, seed=seed)
                spec = make_spec("lin", beta=0.01)
                theta = rng.normal(size=5)
            elif kind == "lr":
                data = synthetic.logistic_data(60, 5, seed=seed)
                spec = make_spec("lr", beta=0.01)
                theta = rng.normal(size=5)
            elif kind == "me":
                data = synthetic.multiclass_data(60, 4, 3, seed=seed)
                spec = make_spec("me", beta=0.01, n_classes=3)
                theta = rng.normal(size=12)
            else:
                data = synthetic.factor_data(60, 6, 2, seed=seed)
                spec = make_spec("ppca", n_factors=2)
                theta = rng.normal(0, 0.4, size=13)
                theta[-1] = 0.5 + rng.random()
            g = mean_grad(spec, theta, data)
            g_fd = np.empty_like(g)
            for i in range(g.shape[0]):
                tp, tm = theta.copy(), theta.copy()
                tp[i] += h
                tm[i] -= h
                g_fd[i] = (objective(spec, tp, data) - objective(spec, tm, data)) / (2 * h)
            rel = np.abs(g - g_fd).max() / np.abs(g_fd).max()
            worst = max(worst, rel)
    _report(1, worst < 1e-5, f"gradient vs finite differences, worst rel err {worst:.2e}")


def test_criterion_2_statistics_agreement():
    """ClosedForm / InverseGradients / ObservedFisher covariance agreement on
    LR (d=20, n=10000): pairwise Frobenius / dp^2 < 1e-3, with the stated
    per-method gradient-pass counts."""
    data = synthetic.logistic_data(10_000, 20, seed=7, scale=2.0, coef_scale=0.3)
    spec = make_spec("lr")
    model = fit_model(spec, data, population_size=data.n_rows)
    dp = param_dim(spec, 20)

    cf = closed_form(spec, model.theta, data)

    before = grads_call_count()
    ig = inverse_gradients(spec, model.theta, data)
    ig_calls = grads_call_count() - before

    before = grads_call_count()
    of = observed_fisher(spec, model.theta, data)
    of_calls = grads_call_count() - before

    C = {name: covariance_explicit(s, 1.0) for name, s in
         (("cf", cf), ("ig", ig), ("of", of))}
    dists = {
        "cf-ig": np.linalg.norm(C["cf"] - C["ig"]) / dp**2,
        "cf-of": np.linalg.norm(C["cf"] - C["of"]) / dp**2,
        "ig-of": np.linalg.norm(C["ig"] - C["of"]) / dp**2,
    }
    ok = all(v < 1e-3 for v in dists.values()) and of_calls == 1 and ig_calls == dp + 1
    detail = (", ".join(f"{k}={v:.2e}" for k, v in dists.items())
              + f"; grads calls: observed-fisher {of_calls} (want 1), "
              + f"inverse-gradients {ig_calls} (want {dp + 1})")
    _report(2, ok, detail)


def test_criterion_3_sampler_fidelity():
    """Factor-based draws match explicit-Cholesky draws in empirical
    covariance: 1e5 draws, dp=10, within 5 Monte-Carlo standard errors."""
    data = synthetic.logistic_data(5000, 10, seed=9, scale=1.5)
    spec = make_spec("lr")
    model = fit_model(spec, data, population_size=data.n_rows)
    factors = observed_fisher(spec, model.theta, data)
    pair = pair_from_factors(factors)
    k = 100_000
    draws_factor = build_sampler(factors, seed=11).draw_base(k)
    draws_chol = build_sampler(pair, seed=12).draw_base(k)
    C = covariance_explicit(factors, 1.0)
    se_single = np.sqrt((np.outer(np.diag(C), np.diag(C)) + C**2) / k)
    se_diff = np.sqrt(2.0) * se_single
    gap = np.abs(np.cov(draws_factor.T) - np.cov(draws_chol.T))
    worst = float((gap / se_diff).max())
    _report(3, worst <= 5.0, f"max componentwise covariance gap {worst:.2f} standard errors")


def test_criterion_4_coverage_guarantee(coverage_suite):
    """Requested accuracies 90/95/99% at delta=0.05, 40 runs each against
    the actually trained full model: >= 95% of runs must satisfy v <= eps."""
    lines = []
    ok = True
    for accuracy, runs in coverage_suite["results"].items():
        rate = np.mean([r["met"] for r in runs])
        ok &= rate >= 0.95
        lines.append(f"{accuracy:.0%}: {rate:.1%} of {len(runs)} runs within eps")
    _report(4, ok, "; ".join(lines))


def test_criterion_5_probe_monotonicity(sizing_runs):
    """With common random numbers the raw pass probability is non-decreasing
    along the probe trace (2 Monte-Carlo standard errors), 20/20 runs."""
    k = sizing_runs["k"]
    good = 0
    worst_dip = 0.0
    for trace in sizing_runs["traces"]:
        monotone = True
        for (_, p1), (_, p2) in zip(trace, trace[1:]):
            pooled = 0.5 * (p1 + p2)
            se = math.sqrt(max(pooled * (1 - pooled), 1e-12) * 2.0 / k)
            if p2 < p1 - 2 * se:
                monotone = False
                worst_dip = max(worst_dip, p1 - p2)
        good += monotone
    _report(5, good == 20, f"{good}/20 traces monotone within 2 standard errors"
            + (f" (worst dip {worst_dip:.3f})" if good < 20 else ""))


def test_criterion_6_training_budget(coverage_suite, sizing_runs):
    """Every contract run trains at most two models; size estimation itself
    trains none."""
    max_trainings = max(
        r["trainings"]
        for runs in coverage_suite["results"].values()
        for r in runs
    )
    reported_ok = all(
        r["reported_trainings"] == r["trainings"]
        for runs in coverage_suite["results"].values()
        for r in runs
    )
    sizer_trainings = max(sizing_runs["trained"])
    ok = max_trainings <= 2 and sizer_trainings == 0 and reported_ok
    _report(6, ok, f"max trainings per contract run {max_trainings} (<= 2), "
                   f"trainings during size search {sizer_trainings} (= 0)")


def test_criterion_7_baseline_sanity():
    """At 99% requested accuracy the fixed 1% sample misses the target in a
    majority of runs while the contract flow meets it, and the incremental
    retraining baseline spends more total training time."""
    spec = make_spec("lr")
    full = synthetic.logistic_data(125_000, 30, seed=77)
    ds = split(full, 0.2, seed=0)
    train, holdout = ds.train, ds.holdout
    N = train.n_rows
    m_full = fit_model(spec, train, population_size=N)
    eps = 0.01
    rng = np.random.default_rng(5)

    reps = 9
    fixed_fails = contract_meets = 0
    t_contract = t_inc = 0.0
    for r in range(reps):
        perm = rng.permutation(N)
        n_fixed = baseline_size("fixed_ratio", eps, N)
        m_fixed = fit_model(spec, train.subset(perm[:n_fixed]), population_size=N)
        fixed_fails += diff(spec, m_fixed, m_full, holdout) > eps

        t0 = training_seconds_total()
        rep = train_with_contract(ds, spec, Contract(eps=eps, delta=DELTA, n0=10_000),
                                  seed=1000 + r)
        t_contract += training_seconds_total() - t0
        contract_meets += diff(spec, rep.model, m_full, holdout) <= eps

        t0 = training_seconds_total()
        iteration = 0
        while True:
            iteration += 1
            n_try = min(baseline_size("inc_estimator", eps, N, iteration), N)
            m_try = fit_model(spec, train.subset(perm[:n_try]), population_size=N)
            if diff(spec, m_try, m_full, holdout) <= eps or n_try >= N:
                break
        t_inc += training_seconds_total() - t0

    ok = (fixed_fails > reps / 2 and contract_meets > reps / 2
          and t_inc > t_contract)
    _report(7, ok, f"fixed-ratio missed target {fixed_fails}/{reps}, contract met "
                   f"{contract_meets}/{reps}, training time {t_inc:.2f}s "
                   f"(incremental) vs {t_contract:.2f}s (contract)")


def test_criterion_8_speedup_direction():
    """N=1e6, d=20 at 95% accuracy: the contract flow must be faster
    end-to-end than training the full model."""
    spec = make_spec("lr")
    full = synthetic.logistic_data(1_250_000, 20, seed=31)
    ds = split(full, 0.2, seed=0)
    N = ds.train.n_rows

    t0 = time.perf_counter()
    rep = train_with_contract(ds, spec, Contract(eps=0.05, delta=DELTA, n0=10_000),
                              seed=9)
    t_contract = time.perf_counter() - t0

    t0 = time.perf_counter()
    m_full = fit_model(spec, ds.train, population_size=N)
    t_full = time.perf_counter() - t0

    v = diff(spec, rep.model, m_full, ds.holdout)
    ok = t_contract < t_full
    _report(8, ok, f"contract {t_contract:.2f}s vs full training {t_full:.2f}s "
                   f"({t_full / t_contract:.1f}x, v={v:.4f}, n={rep.model.n}, "
                   f"trainings={rep.trainings_performed})")


def test_criterion_9_generalization_bound(coverage_suite):
    """Full-model holdout error <= eps_g + eps - eps_g*eps in >= 95% of the
    coverage runs."""
    lines = []
    ok = True
    for accuracy, runs in coverage_suite["results"].items():
        rate = np.mean([r["full_err"] <= r["gen_bound"] for r in runs])
        ok &= rate >= 0.95
        lines.append(f"{accuracy:.0%}: {rate:.1%}")
    _report(9, ok, "full-model error within predicted bound: " + "; ".join(lines))
