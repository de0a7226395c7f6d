"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class NotFittedError(RuntimeError):
    """Estimator used before fit()."""


def check_matrix(X, name: str = "X", min_rows: int = 1):
    """Coerce to a 2-d float64 array (or CSR) with finite entries."""
    if sp.issparse(X):
        X = X.tocsr().astype(np.float64)
        body = X.data
    else:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError(f"{name} must be 2-d, got ndim={X.ndim}")
        body = X
    if X.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} rows, got {X.shape[0]}")
    if not np.all(np.isfinite(body)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_labels(y, n_rows: int, name: str = "y"):
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != n_rows:
        raise ValueError(f"{name} has {y.shape[0]} entries for {n_rows} rows")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    return y


def check_feature_dim(X, dim: int, name: str = "X"):
    if X.shape[1] != dim:
        raise ValueError(f"{name} has {X.shape[1]} features, the model expects {dim}")
    return X


def check_in_range(value, lo, hi, name: str, inclusive: bool = False):
    ok = lo <= value <= hi if inclusive else lo < value < hi
    if not ok:
        bracket = "[]" if inclusive else "()"
        raise ValueError(
            f"{name} must be in {bracket[0]}{lo}, {hi}{bracket[1]}, got {value}"
        )
    return value


def check_is_fitted(estimator, attr: str = "model_"):
    if not hasattr(estimator, attr):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
