"""Command-line interface.

Subcommands::

    train     train a model under an accuracy contract (JSON report)
    accuracy  train once at a fixed sample size and bound its accuracy
    size      estimate the minimum sufficient sample size (no final training)
    bench     compare sizing strategies against a truly trained full model (CSV)
    coverage  repeated end-to-end runs vs. the actual full model (CSV)

Requested accuracy is expressed the user-facing way, e.g. ``--accuracy
0.95`` asks that predictions agree with the full model on 95% of held-out
examples; internally that is the error bound eps = 0.05. ``--confidence
0.95`` maps to delta = 0.05.

Exit codes: 0 success, 1 runtime failure, 2 contract saturated at the
full dataset size, 64 usage/config error. The ``SAMPLEFIT_THREADS``
environment variable caps the coverage worker pool.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import models, optimize, synthetic
from .coordinator import (
    Contract,
    estimate_accuracy_only,
    estimate_size_only,
    generalization_bound,
    train_with_contract,
)
from .data import DataError, Dataset, encode_labels, load_dataset, split
from .optimize import OptimizerConfig
from .sizing import BASELINE_STRATEGIES, baseline_size

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SATURATED = 2
EXIT_USAGE = 64

# bench refuses to train a ground-truth full model beyond this many rows
MAX_FULL_ROWS = 5_000_000


class UsageError(ValueError):
    pass


def _add_data_args(p):
    src = p.add_argument_group("data source")
    src.add_argument("--data", help="dataset file path")
    src.add_argument("--format", default="csv", choices=["csv", "sparse-svm"])
    src.add_argument("--label", help="label column name (csv)")
    src.add_argument("--synthetic", choices=["lr", "lin", "me", "ppca"],
                     help="generate a synthetic dataset instead of reading a file")
    src.add_argument("--n-rows", type=int, default=125000,
                     help="rows for --synthetic (before the holdout split)")
    src.add_argument("--dim", type=int, default=10, help="features for --synthetic")
    src.add_argument("--classes", type=int, default=3, help="classes for --synthetic me")
    src.add_argument("--gen-seed", type=int, default=1, help="seed for --synthetic")
    p.add_argument("--holdout-frac", type=float, default=0.2)


def _add_model_args(p):
    m = p.add_argument_group("model")
    m.add_argument("--model", required=True, choices=list(models.MODEL_KINDS))
    m.add_argument("--beta", type=float, default=None,
                   help="L2 coefficient (default 0.001; ppca: 0)")
    m.add_argument("--q", type=int, default=10, help="ppca factor count")


def _add_run_args(p, with_contract=True):
    r = p.add_argument_group("run")
    if with_contract:
        r.add_argument("--accuracy", type=float, default=0.95,
                       help="requested accuracy in (0,1); eps = 1 - accuracy")
        r.add_argument("--n0", type=int, default=10000, help="initial sample size")
    r.add_argument("--confidence", type=float, default=0.95,
                   help="confidence in (0,1); delta = 1 - confidence")
    r.add_argument("--k", type=int, default=100, help="Monte-Carlo draws per estimate")
    r.add_argument("--stats-method", default="observed-fisher",
                   choices=["observed-fisher", "closed-form", "inverse-gradients"])
    r.add_argument("--optimizer", default="auto", choices=["auto", "bfgs", "lbfgs"])
    r.add_argument("--max-iters", type=int, default=500)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--output", help="write the JSON/CSV report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="samplefit",
        description="Train approximate ML models on subsamples with accuracy guarantees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train under an accuracy contract")
    _add_data_args(p_train)
    _add_model_args(p_train)
    _add_run_args(p_train)

    p_acc = sub.add_parser("accuracy", help="train at a fixed size, bound its accuracy")
    _add_data_args(p_acc)
    _add_model_args(p_acc)
    _add_run_args(p_acc, with_contract=False)
    p_acc.add_argument("--sample-size", type=int, required=True)

    p_size = sub.add_parser("size", help="estimate the minimum sufficient sample size")
    _add_data_args(p_size)
    _add_model_args(p_size)
    _add_run_args(p_size)

    p_bench = sub.add_parser("bench", help="compare sizing strategies (needs full training)")
    _add_data_args(p_bench)
    _add_model_args(p_bench)
    _add_run_args(p_bench)
    p_bench.add_argument("--accuracies", type=float, nargs="+",
                         default=[0.9, 0.95, 0.99],
                         help="requested accuracies to benchmark")
    p_bench.add_argument("--strategies", nargs="+",
                         default=["contract", *BASELINE_STRATEGIES])

    p_cov = sub.add_parser("coverage", help="repeated runs vs. the actual full model")
    _add_data_args(p_cov)
    _add_model_args(p_cov)
    _add_run_args(p_cov)
    p_cov.add_argument("--runs", type=int, default=40)

    return parser


def _make_dataset(args) -> tuple[Dataset, dict | None]:
    """Dataset plus the label mapping applied (classification from files)."""
    if args.synthetic and args.data:
        raise UsageError("pass either --data or --synthetic, not both")
    if args.synthetic:
        gen = {
            "lr": lambda: synthetic.logistic_data(args.n_rows, args.dim, seed=args.gen_seed),
            "lin": lambda: synthetic.linear_data(args.n_rows, args.dim, seed=args.gen_seed),
            "me": lambda: synthetic.multiclass_data(args.n_rows, args.dim, args.classes,
                                                    seed=args.gen_seed),
            "ppca": lambda: synthetic.factor_data(args.n_rows, args.dim,
                                                  min(args.q, args.dim - 1),
                                                  seed=args.gen_seed),
        }[args.synthetic]
        return gen(), None
    if not args.data:
        raise UsageError("either --data or --synthetic is required")
    if args.model == "ppca" and args.label:
        raise UsageError("ppca is unsupervised; drop --label")
    if args.model != "ppca" and args.format == "csv" and not args.label:
        raise UsageError(f"model {args.model!r} needs --label")
    dataset = load_dataset(args.data, fmt=args.format, label_col=args.label)
    mapping = None
    if args.model in ("lr", "me"):
        dataset, mapping = encode_labels(dataset)
    return dataset, mapping


def _make_spec(args, dataset: Dataset) -> models.ModelSpec:
    n_classes = None
    if args.model == "me":
        if dataset.labels is None:
            raise UsageError("me needs labels")
        n_classes = int(dataset.labels.max()) + 1
    if args.model == "lr" and dataset.labels is not None:
        bad = np.setdiff1d(np.unique(dataset.labels), [0.0, 1.0])
        if bad.size:
            raise UsageError(f"lr needs binary 0/1 labels, found {bad}")
    try:
        return models.make_spec(args.model, beta=args.beta, n_classes=n_classes,
                                n_factors=args.q if args.model == "ppca" else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _optimizer_config(args) -> OptimizerConfig:
    return OptimizerConfig(method=args.optimizer, max_iters=args.max_iters)


def _contract(args, n_train: int) -> Contract:
    if not 0.0 < args.accuracy < 1.0:
        raise UsageError(f"--accuracy must be in (0,1), got {args.accuracy}")
    if not 0.0 < args.confidence < 1.0:
        raise UsageError(f"--confidence must be in (0,1), got {args.confidence}")
    if args.n0 > n_train:
        raise UsageError(f"--n0 {args.n0} exceeds the {n_train} training rows")
    try:
        return Contract(eps=1.0 - args.accuracy, delta=1.0 - args.confidence, n0=args.n0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_report(args, doc: dict):
    text = json.dumps(doc, indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(args, rows: list[dict], fieldnames: list[str]):
    out = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.output:
            out.close()


def cmd_train(args) -> int:
    dataset, mapping = _make_dataset(args)
    ds = split(dataset, holdout_frac=args.holdout_frac, seed=args.seed)
    spec = _make_spec(args, dataset)
    contract = _contract(args, ds.train.n_rows)
    report = train_with_contract(
        ds, spec, contract, optimizer_config=_optimizer_config(args),
        stats_method=args.stats_method, k=args.k, seed=args.seed,
    )
    doc = report.to_dict()
    if mapping is not None:
        doc["label_mapping"] = {str(k): v for k, v in mapping.items()}
    _write_report(args, doc)
    print(
        f"trained on n={report.model.n} of N={report.model.N} rows: "
        f"eps={report.delivered_epsilon:.4f} (requested {contract.eps:.4f}), "
        f"trainings={report.trainings_performed}, "
        f"time={report.timings['total']:.2f}s",
        file=sys.stderr,
    )
    return EXIT_SATURATED if report.saturated else EXIT_OK


def cmd_accuracy(args) -> int:
    dataset, mapping = _make_dataset(args)
    ds = split(dataset, holdout_frac=args.holdout_frac, seed=args.seed)
    spec = _make_spec(args, dataset)
    if not 1 <= args.sample_size <= ds.train.n_rows:
        raise UsageError(
            f"--sample-size must be in [1, {ds.train.n_rows}], got {args.sample_size}"
        )
    report = estimate_accuracy_only(
        ds, spec, n=args.sample_size, delta=1.0 - args.confidence,
        optimizer_config=_optimizer_config(args),
        stats_method=args.stats_method, k=args.k, seed=args.seed,
    )
    doc = report.to_dict()
    if mapping is not None:
        doc["label_mapping"] = {str(k): v for k, v in mapping.items()}
    _write_report(args, doc)
    print(
        f"n={args.sample_size}: eps={report.delivered_epsilon:.4f} "
        f"at confidence {args.confidence}, time={report.timings['total']:.2f}s",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_size(args) -> int:
    dataset, mapping = _make_dataset(args)
    ds = split(dataset, holdout_frac=args.holdout_frac, seed=args.seed)
    spec = _make_spec(args, dataset)
    contract = _contract(args, ds.train.n_rows)
    report = estimate_size_only(
        ds, spec, contract, optimizer_config=_optimizer_config(args),
        stats_method=args.stats_method, k=args.k, seed=args.seed,
    )
    doc = report.to_dict()
    if mapping is not None:
        doc["label_mapping"] = {str(k): v for k, v in mapping.items()}
    _write_report(args, doc)
    est = report.size_estimate
    print(
        f"estimated minimum sample size n*={est.n_star} of N={ds.train.n_rows} "
        f"({len(est.probes)} probes, saturated={est.saturated})",
        file=sys.stderr,
    )
    return EXIT_SATURATED if est.saturated else EXIT_OK


def _train_plain(spec, data, n, N, config, perm):
    """One baseline training on the first n rows of the permutation."""
    t0 = time.perf_counter()
    model = optimize.fit_model(spec, data.subset(perm[:n]), population_size=N,
                               config=config)
    return model, time.perf_counter() - t0


def cmd_bench(args) -> int:
    dataset, _ = _make_dataset(args)
    ds = split(dataset, holdout_frac=args.holdout_frac, seed=args.seed)
    train, holdout = ds.train, ds.holdout
    N = train.n_rows
    if N > MAX_FULL_ROWS:
        raise UsageError(
            f"bench trains the actual full model as ground truth; {N} rows "
            f"exceed the {MAX_FULL_ROWS} cap. Subsample the input first."
        )
    spec = _make_spec(args, dataset)
    config = _optimizer_config(args)

    t0 = time.perf_counter()
    m_full = optimize.fit_model(spec, train, population_size=N, config=config)
    full_time = time.perf_counter() - t0
    print(f"full model trained on N={N} rows in {full_time:.2f}s", file=sys.stderr)

    rng = np.random.default_rng(args.seed)
    rows = []
    for acc in args.accuracies:
        eps = 1.0 - acc
        perm = rng.permutation(N)
        for strategy in args.strategies:
            t0 = time.perf_counter()
            trainings = 0
            if strategy == "contract":
                contract = Contract(eps=eps, delta=1.0 - args.confidence,
                                    n0=min(args.n0, N))
                report = train_with_contract(
                    ds, spec, contract, optimizer_config=config,
                    stats_method=args.stats_method, k=args.k,
                    seed=int(rng.integers(2**31)),
                )
                model = report.model
                n_used = model.n
                trainings = report.trainings_performed
            elif strategy == "inc_estimator":
                iteration, model, n_used = 0, None, 0
                while True:
                    iteration += 1
                    n_used = min(baseline_size("inc_estimator", eps, N, iteration), N)
                    model, _ = _train_plain(spec, train, n_used, N, config, perm)
                    trainings += 1
                    if models.diff(spec, model, m_full, holdout) <= eps or n_used >= N:
                        break
            else:
                n_used = min(baseline_size(strategy, eps, N), N)
                model, _ = _train_plain(spec, train, n_used, N, config, perm)
                trainings = 1
            wall = time.perf_counter() - t0
            v = models.diff(spec, model, m_full, holdout)
            rows.append({
                "strategy": strategy,
                "requested_accuracy": acc,
                "eps": eps,
                "sample_size": n_used,
                "achieved_v": v,
                "met": v <= eps,
                "trainings": trainings,
                "wall_time_s": wall,
                "full_train_time_s": full_time,
            })
            print(f"  {strategy} @ {acc:.2%}: n={n_used} v={v:.4f} "
                  f"met={v <= eps} time={wall:.2f}s", file=sys.stderr)
    _write_csv(args, rows, list(rows[0].keys()))
    return EXIT_OK


def _coverage_run(run_id, ds, spec, contract, config, args, m_full):
    seed = args.seed + 1000 * (run_id + 1)
    t0 = time.perf_counter()
    report = train_with_contract(
        ds, spec, contract, optimizer_config=config,
        stats_method=args.stats_method, k=args.k, seed=seed,
    )
    wall = time.perf_counter() - t0
    holdout = ds.holdout
    v = models.diff(spec, report.model, m_full, holdout)
    row = {
        "run": run_id,
        "seed": seed,
        "requested_accuracy": args.accuracy,
        "eps": contract.eps,
        "delta": contract.delta,
        "n_used": report.model.n,
        "trainings": report.trainings_performed,
        "eps_delivered": report.delivered_epsilon,
        "v_actual": v,
        "met": v <= contract.eps,
        "wall_time_s": wall,
    }
    if spec.is_classifier:
        pred_a = models.predict(spec, report.model.theta, holdout.features)
        pred_f = models.predict(spec, m_full.theta, holdout.features)
        eps_g = float(np.mean(pred_a != holdout.labels))
        full_err = float(np.mean(pred_f != holdout.labels))
        bound = generalization_bound(eps_g, contract.eps)
        row.update({
            "holdout_error": eps_g,
            "full_model_error": full_err,
            "generalization_bound": bound,
            "generalization_ok": full_err <= bound,
        })
    return row


def cmd_coverage(args) -> int:
    if args.runs < 20:
        raise UsageError(f"coverage needs --runs >= 20, got {args.runs}")
    dataset, _ = _make_dataset(args)
    ds = split(dataset, holdout_frac=args.holdout_frac, seed=args.seed)
    N = ds.train.n_rows
    if N > MAX_FULL_ROWS:
        raise UsageError(f"coverage trains the full model; {N} rows exceed the cap")
    spec = _make_spec(args, dataset)
    contract = _contract(args, N)
    config = _optimizer_config(args)

    m_full = optimize.fit_model(spec, ds.train, population_size=N, config=config)

    workers = max(1, int(os.environ.get("SAMPLEFIT_THREADS", "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(
                lambda i: _coverage_run(i, ds, spec, contract, config, args, m_full),
                range(args.runs),
            ))
    else:
        rows = [_coverage_run(i, ds, spec, contract, config, args, m_full)
                for i in range(args.runs)]

    met = np.array([r["met"] for r in rows])
    acc = 1.0 - np.array([r["v_actual"] for r in rows])
    print(
        f"coverage: {met.mean():.2%} of {args.runs} runs met {args.accuracy:.2%} "
        f"(5th percentile of actual accuracy: {np.percentile(acc, 5):.2%})",
        file=sys.stderr,
    )
    _write_csv(args, rows, list(rows[0].keys()))
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "accuracy": cmd_accuracy,
    "size": cmd_size,
    "bench": cmd_bench,
    "coverage": cmd_coverage,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; keep 0 for --help
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 -- CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
