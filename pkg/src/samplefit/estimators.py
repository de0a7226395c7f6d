"""scikit-learn style estimators wrapping the contract-training workflow.

These classes exist so the approximation machinery composes with the
wider ecosystem: ``get_params``/``set_params``/``clone`` work, ``fit``
takes (X, y) arrays, and fitted state lives in trailing-underscore
attributes. Each ``fit`` call runs the full coordinator workflow: an
internal train/holdout split, an initial model on ``n0`` rows, and --
only if the requested accuracy is not yet certified -- one more training
at the estimated minimum sufficient sample size.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import models
from .coordinator import Contract, train_with_contract
from .data import Dataset, split
from .optimize import OptimizerConfig
from .validation import (
    check_feature_dim,
    check_in_range,
    check_is_fitted,
    check_labels,
    check_matrix,
)


class _ContractEstimator(BaseEstimator):
    """Shared plumbing: contract construction, fit workflow, fitted state."""

    _kind: str = ""

    def __init__(self, accuracy=0.95, confidence=0.95, beta=0.001, n0=10000,
                 k=100, holdout_frac=0.2, stats_method="observed-fisher",
                 max_iters=500, random_state=0):
        self.accuracy = accuracy
        self.confidence = confidence
        self.beta = beta
        self.n0 = n0
        self.k = k
        self.holdout_frac = holdout_frac
        self.stats_method = stats_method
        self.max_iters = max_iters
        self.random_state = random_state

    def _contract(self, n_train):
        check_in_range(self.accuracy, 0.0, 1.0, "accuracy")
        check_in_range(self.confidence, 0.0, 1.0, "confidence")
        return Contract(
            eps=1.0 - self.accuracy,
            delta=1.0 - self.confidence,
            n0=min(self.n0, n_train),
        )

    def _spec(self, y):
        raise NotImplementedError

    def _fit_dataset(self, dataset: Dataset):
        ds = split(dataset, holdout_frac=self.holdout_frac, seed=self.random_state)
        spec = self._spec(ds.train.labels)
        contract = self._contract(ds.train.n_rows)
        config = OptimizerConfig(max_iters=self.max_iters)
        report = train_with_contract(
            ds, spec, contract,
            optimizer_config=config,
            stats_method=self.stats_method,
            k=self.k,
            seed=self.random_state,
        )
        self.report_ = report
        self.model_ = report.model
        self.n_used_ = report.model.n
        self.epsilon_ = report.delivered_epsilon
        self.n_features_in_ = dataset.dim
        return self


class ApproximateClassifier(_ContractEstimator):
    """Classifier trained on an automatically sized subsample.

    With probability at least ``confidence``, its predictions agree with
    the (untrained) full-data model on at least ``accuracy`` of held-out
    examples. Binary problems use logistic regression; multiclass uses a
    softmax (max-entropy) classifier. Set ``model`` to force one.

    Attributes after fit: ``model_`` (trained parameters + provenance),
    ``report_`` (full run report), ``classes_``, ``n_used_``,
    ``epsilon_`` (certified prediction-difference bound).
    """

    def __init__(self, model="auto", accuracy=0.95, confidence=0.95, beta=0.001,
                 n0=10000, k=100, holdout_frac=0.2, stats_method="observed-fisher",
                 max_iters=500, random_state=0):
        super().__init__(accuracy, confidence, beta, n0, k, holdout_frac,
                         stats_method, max_iters, random_state)
        self.model = model

    def _spec(self, y):
        n_classes = len(self.classes_)
        kind = self.model
        if kind == "auto":
            kind = "lr" if n_classes == 2 else "me"
        if kind == "lr" and n_classes != 2:
            raise ValueError(f"lr is binary-only; found {n_classes} classes")
        if kind not in ("lr", "me"):
            raise ValueError(f"unsupported classifier model {kind!r}")
        return models.make_spec(kind, beta=self.beta,
                                n_classes=n_classes if kind == "me" else None)

    def fit(self, X, y):
        X = check_matrix(X, min_rows=2)
        y = check_labels(y, X.shape[0])
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        return self._fit_dataset(Dataset(X, encoded.astype(np.float64)))

    def predict(self, X):
        check_is_fitted(self)
        X = check_feature_dim(check_matrix(X), self.n_features_in_)
        idx = models.predict(self.model_.spec, self.model_.theta, X)
        return self.classes_[idx]


class ApproximateRegressor(_ContractEstimator):
    """L2-regularized linear regression on an automatically sized subsample.

    The certified bound ``epsilon_`` is on the root-mean-square gap
    between this model's predictions and the full-data model's.
    """

    def _spec(self, y):
        return models.make_spec("lin", beta=self.beta)

    def fit(self, X, y):
        X = check_matrix(X, min_rows=2)
        y = check_labels(y, X.shape[0])
        self._fit_dataset(Dataset(X, y))
        self.coef_ = self.model_.theta
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_feature_dim(check_matrix(X), self.n_features_in_)
        return models.predict(self.model_.spec, self.model_.theta, X)


class ApproximatePCA(_ContractEstimator):
    """Probabilistic PCA factors fit on an automatically sized subsample.

    The certified bound is on 1 - cosine similarity between the fitted
    factor parameters and the full-data ones. Assumes (approximately)
    zero-centered input. ``transform`` returns posterior latent means.
    """

    def __init__(self, n_factors=10, accuracy=0.95, confidence=0.95,
                 n0=10000, k=100, holdout_frac=0.2, stats_method="observed-fisher",
                 max_iters=500, random_state=0):
        super().__init__(accuracy, confidence, 0.0, n0, k, holdout_frac,
                         stats_method, max_iters, random_state)
        self.n_factors = n_factors

    def _spec(self, y):
        return models.make_spec("ppca", n_factors=self.n_factors)

    def fit(self, X, y=None):
        X = check_matrix(X, min_rows=2)
        if not 1 <= self.n_factors < X.shape[1]:
            raise ValueError(
                f"need 1 <= n_factors < n_features, got {self.n_factors} vs {X.shape[1]}"
            )
        self._fit_dataset(Dataset(X, None))
        d, q = self.n_features_in_, self.n_factors
        W = self.model_.theta[: d * q].reshape(d, q)
        self.components_ = W.T
        self.noise_variance_ = float(self.model_.theta[-1])
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_feature_dim(check_matrix(X), self.n_features_in_)
        W = self.components_.T
        M = W.T @ W + self.noise_variance_ * np.eye(self.n_factors)
        return np.asarray(X @ W) @ np.linalg.inv(M).T

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)
