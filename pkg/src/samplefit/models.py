"""Model classes behind a shared abstraction.

Every supported model is a maximum-likelihood estimator minimizing

    f_n(theta) = (1/n) * sum_i -log Pr(x_i, y_i; theta) + R(theta)

and exposes four operations: per-example gradients (``grads``), pointwise
prediction (``predict``), a prediction-difference metric between two trained
models (``diff``), and, where a closed form exists, a direct solver
(``solve``). All downstream machinery (optimizer, statistics, samplers)
works only through this surface.

Implemented classes:

* ``lin``  -- linear regression (Gaussian likelihood), L2-regularized
* ``lr``   -- binary logistic regression, L2-regularized
* ``me``   -- max-entropy (softmax) classifier, L2-regularized
* ``ppca`` -- probabilistic PCA with q factors plus a noise scalar

Parameter layouts are flat float64 vectors:

* lin/lr: theta in R^d
* me:     Theta is (K, d), stored row-major  -> R^(K*d)
* ppca:   [vec(W) for W (d, q) row-major, sigma^2] -> R^(d*q + 1)
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.special

from .data import Dataset

logger = logging.getLogger(__name__)

MODEL_KINDS = ("lin", "lr", "me", "ppca")

# Incremented on every grads() evaluation; statistics code is audited
# against it (single call for the score path, dp+1 for finite differences).
_grads_calls = 0


def grads_call_count() -> int:
    return _grads_calls


class UnsupportedOperation(RuntimeError):
    """An operation the model class does not provide (e.g. predict on PPCA)."""


@dataclass(frozen=True)
class ModelSpec:
    """Configuration of one model class.

    ``beta`` is the L2 coefficient (0.001 by default). ``n_classes`` is
    required for ``me``; ``n_factors`` for ``ppca`` (default 10).
    PPCA is unregularized: its ``beta`` must be 0.
    """

    kind: str
    beta: float = 0.001
    n_classes: int | None = None
    n_factors: int | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.kind == "me":
            if self.n_classes is None or self.n_classes < 2:
                raise ValueError("me needs n_classes >= 2")
        if self.kind == "ppca":
            if self.n_factors is None:
                object.__setattr__(self, "n_factors", 10)
            if self.n_factors < 1:
                raise ValueError("ppca needs n_factors >= 1")
            if self.beta != 0.0:
                raise ValueError("ppca is unregularized; use beta=0")

    @property
    def is_classifier(self) -> bool:
        return self.kind in ("lr", "me")

    @property
    def needs_labels(self) -> bool:
        return self.kind != "ppca"


def make_spec(kind: str, beta: float | None = None, n_classes=None, n_factors=None) -> ModelSpec:
    """Build a ModelSpec with per-kind defaults (beta=0.001, q=10)."""
    if beta is None:
        beta = 0.0 if kind == "ppca" else 0.001
    return ModelSpec(kind=kind, beta=beta, n_classes=n_classes, n_factors=n_factors)


@dataclass(frozen=True)
class TrainedModel:
    """A parameter vector plus its training provenance.

    ``grad_norm`` is the inf-norm of the mean gradient at ``theta``; it is
    the convergence certificate attached by the trainer (or solver).
    """

    spec: ModelSpec
    theta: np.ndarray
    n: int
    N: int
    grad_norm: float = 0.0
    converged: bool = True
    iters: int = 0

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=np.float64))
        if not 1 <= self.n <= self.N:
            raise ValueError(f"need 1 <= n <= N, got n={self.n}, N={self.N}")


def param_dim(spec: ModelSpec, d: int) -> int:
    """Flat parameter dimension for feature dimension ``d``."""
    if spec.kind in ("lin", "lr"):
        return d
    if spec.kind == "me":
        return spec.n_classes * d
    return d * spec.n_factors + 1


def layout(spec: ModelSpec, d: int) -> str:
    if spec.kind in ("lin", "lr"):
        return f"vector({d})"
    if spec.kind == "me":
        return f"matrix({spec.n_classes},{d})-row-major"
    return f"matrix({d},{spec.n_factors})-row-major+noise"


def init_params(spec: ModelSpec, d: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Optimizer starting point: zeros, except PPCA which needs to break
    the symmetry of the all-zero stationary point (factors ~ N(0, 1e-2),
    noise variance 1)."""
    dp = param_dim(spec, d)
    if spec.kind != "ppca":
        return np.zeros(dp)
    rng = rng if rng is not None else np.random.default_rng(0)
    theta = np.empty(dp)
    theta[:-1] = rng.normal(0.0, 0.1, size=dp - 1)
    theta[-1] = 1.0
    return theta


def _check_theta(spec, theta, d):
    theta = np.asarray(theta, dtype=np.float64)
    dp = param_dim(spec, d)
    if theta.shape != (dp,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({dp},)")
    return theta


def _check_labels(spec, data: Dataset):
    if spec.kind == "ppca":
        return None
    if data.labels is None:
        raise ValueError(f"model {spec.kind!r} needs labels")
    return data.labels


def _sigmoid(z):
    return scipy.special.expit(z)


def _ppca_unpack(spec, theta, d):
    q = spec.n_factors
    W = theta[: d * q].reshape(d, q)
    sigma2 = theta[-1]
    return W, sigma2


def _ppca_cov_cholesky(W, sigma2, d):
    """Cholesky of C = W W^T + sigma^2 I, with a logged 1e-12 jitter retry."""
    C = W @ W.T + sigma2 * np.eye(d)
    try:
        return scipy.linalg.cho_factor(C, lower=True)
    except scipy.linalg.LinAlgError:
        logger.warning("ppca covariance not positive definite; adding 1e-12 jitter")
        try:
            return scipy.linalg.cho_factor(C + 1e-12 * np.eye(d), lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("ppca covariance numerically singular") from exc


# ---------------------------------------------------------------------------
# objective


def objective(spec: ModelSpec, theta, data: Dataset) -> float:
    """f_n(theta): mean negative log-likelihood plus (beta/2)*||theta||^2."""
    theta = _check_theta(spec, theta, data.dim)
    X = data.features
    y = _check_labels(spec, data)
    n = data.n_rows
    reg = 0.5 * spec.beta * float(theta @ theta)

    if spec.kind == "lin":
        resid = X @ theta - y
        return 0.5 * float(resid @ resid) / n + reg
    if spec.kind == "lr":
        z = X @ theta
        return float(np.mean(np.logaddexp(0.0, z) - y * z)) + reg
    if spec.kind == "me":
        K, d = spec.n_classes, data.dim
        Z = X @ theta.reshape(K, d).T  # (n, K)
        lse = scipy.special.logsumexp(Z, axis=1)
        picked = Z[np.arange(n), y.astype(np.intp)]
        return float(np.mean(lse - picked)) + reg

    # ppca: (1/2) (d log 2pi + log|C| + mean_i x_i^T C^-1 x_i)
    d = data.dim
    W, sigma2 = _ppca_unpack(spec, theta, d)
    if sigma2 <= 0 or not np.all(np.isfinite(theta)):
        return np.inf
    try:
        cho = _ppca_cov_cholesky(W, sigma2, d)
    except ValueError:
        return np.inf
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    Xd = X.toarray() if sp.issparse(X) else X
    solved = scipy.linalg.cho_solve(cho, Xd.T)  # (d, n)
    quad = float(np.mean(np.einsum("ij,ji->i", Xd, solved)))
    return 0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)


# ---------------------------------------------------------------------------
# gradients


def grads(spec: ModelSpec, theta, data: Dataset) -> np.ndarray:
    """Per-example gradient rows ``q(theta; x_i, y_i) + r(theta)``.

    Returns an (n, dp) dense array whose mean over rows is the gradient of
    ``objective``; rows are returned unaveraged because the statistics
    machinery needs the individual values.
    """
    global _grads_calls
    _grads_calls += 1
    Q = _score_rows_impl(spec, _check_theta(spec, theta, data.dim), data)
    r = _regularizer_grad(spec, theta)
    if r is not None:
        Q = Q + r
    return Q


def score_rows(spec: ModelSpec, theta, data: Dataset) -> np.ndarray:
    """Per-example likelihood scores ``q(theta; x_i, y_i)`` (no r term).

    One ``grads`` call: the regularizer contribution is subtracted back
    off the returned rows.
    """
    theta = _check_theta(spec, theta, data.dim)
    Q = grads(spec, theta, data)
    r = _regularizer_grad(spec, theta)
    if r is not None:
        Q = Q - r
    return Q


def _regularizer_grad(spec, theta):
    if spec.kind == "ppca" or spec.beta == 0.0:
        return None
    return spec.beta * np.asarray(theta, dtype=np.float64)


def regularizer_jacobian_diag(spec: ModelSpec) -> float:
    """Diagonal of J_r, the Jacobian of r(theta): beta*I or zero."""
    return 0.0 if spec.kind == "ppca" else spec.beta


def _score_rows_impl(spec, theta, data):
    X = data.features
    y = _check_labels(spec, data)
    n, d = data.n_rows, data.dim

    if spec.kind == "lin":
        resid = X @ theta - y  # (n,)
        return _rows_times_vec(X, resid)
    if spec.kind == "lr":
        resid = _sigmoid(X @ theta) - y
        return _rows_times_vec(X, resid)
    if spec.kind == "me":
        K = spec.n_classes
        Z = X @ theta.reshape(K, d).T
        P = scipy.special.softmax(Z, axis=1)  # (n, K)
        P[np.arange(n), y.astype(np.intp)] -= 1.0
        Xd = X.toarray() if sp.issparse(X) else X
        # row i is vec((p_i - e_i) outer x_i) in (K, d) row-major layout
        return (P[:, :, None] * Xd[:, None, :]).reshape(n, K * d)

    # ppca
    W, sigma2 = _ppca_unpack(spec, theta, d)
    if sigma2 <= 0:
        raise ValueError(f"ppca noise variance must be positive, got {sigma2}")
    cho = _ppca_cov_cholesky(W, sigma2, d)
    Xd = X.toarray() if sp.issparse(X) else X
    G = scipy.linalg.cho_solve(cho, W)  # C^-1 W, (d, q)
    V = scipy.linalg.cho_solve(cho, Xd.T).T  # rows are C^-1 x_i, (n, d)
    M = Xd @ G  # rows are x_i^T C^-1 W, (n, q)
    q = spec.n_factors
    out = np.empty((n, d * q + 1))
    out[:, : d * q] = G.ravel()[None, :] - (V[:, :, None] * M[:, None, :]).reshape(n, d * q)
    tr_cinv = float(np.trace(scipy.linalg.cho_solve(cho, np.eye(d))))
    out[:, -1] = 0.5 * (tr_cinv - np.einsum("ij,ij->i", V, V))
    return out


def _rows_times_vec(X, v):
    if sp.issparse(X):
        return X.multiply(v[:, None]).toarray()
    return v[:, None] * X


def mean_grad(spec: ModelSpec, theta, data: Dataset) -> np.ndarray:
    """Gradient of ``objective`` at theta (the mean of the ``grads`` rows,
    computed without materializing them)."""
    theta = _check_theta(spec, theta, data.dim)
    X = data.features
    y = _check_labels(spec, data)
    n, d = data.n_rows, data.dim

    if spec.kind == "lin":
        resid = X @ theta - y
        g = np.asarray(X.T @ resid).ravel() / n
        return g + spec.beta * theta
    if spec.kind == "lr":
        resid = _sigmoid(X @ theta) - y
        g = np.asarray(X.T @ resid).ravel() / n
        return g + spec.beta * theta
    if spec.kind == "me":
        K = spec.n_classes
        Z = X @ theta.reshape(K, d).T
        P = scipy.special.softmax(Z, axis=1)
        P[np.arange(n), y.astype(np.intp)] -= 1.0
        G = np.asarray((X.T @ P).T) / n  # (K, d)
        return G.ravel() + spec.beta * theta

    # ppca has no fast aggregate shortcut worth keeping in sync by hand
    return _score_rows_impl(spec, theta, data).mean(axis=0)


# ---------------------------------------------------------------------------
# prediction and model difference


def predict(spec: ModelSpec, theta, X) -> np.ndarray:
    """Predictions for feature rows ``X``: class indices for lr/me, reals
    for lin. PPCA has no pointwise prediction."""
    if spec.kind == "ppca":
        raise UnsupportedOperation("ppca has no pointwise prediction")
    d = X.shape[1]
    theta = _check_theta(spec, theta, d)
    if spec.kind == "lin":
        return np.asarray(X @ theta).ravel()
    if spec.kind == "lr":
        return (np.asarray(X @ theta).ravel() >= 0.0).astype(np.int64)
    K = spec.n_classes
    Z = X @ theta.reshape(K, d).T
    # argmax breaks ties toward the lowest class index
    return np.asarray(np.argmax(Z, axis=1), dtype=np.int64)


def predict_many(spec: ModelSpec, thetas: np.ndarray, X) -> np.ndarray:
    """Vectorized ``predict`` over a (k, dp) stack of parameter vectors.

    Returns (k, n_rows); used by the Monte-Carlo estimators, where the
    same holdout is scored under many sampled parameters.
    """
    if spec.kind == "ppca":
        raise UnsupportedOperation("ppca has no pointwise prediction")
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    d = X.shape[1]
    if spec.kind in ("lin", "lr"):
        Z = np.asarray(X @ thetas.T).T  # (k, n)
        return Z if spec.kind == "lin" else (Z >= 0.0).astype(np.int64)
    K = spec.n_classes
    k = thetas.shape[0]
    # (n, k*K) scores in one multiply, then per-draw argmax
    Wt = thetas.reshape(k * K, d).T
    Z = np.asarray(X @ Wt).reshape(-1, k, K)
    return np.asarray(np.argmax(Z, axis=2).T, dtype=np.int64)


def diff(spec: ModelSpec, m1: TrainedModel, m2: TrainedModel, holdout: Dataset | None) -> float:
    """Model difference v(m1, m2).

    Classification: fraction of holdout rows with differing predicted class.
    Regression: root-mean-square prediction gap over the holdout.
    PPCA: 1 - cosine similarity of the factor parts (noise scalar excluded;
    the holdout is ignored).
    """
    if m1.spec != m2.spec:
        raise ValueError("cannot diff models with different specs")
    return diff_params(m1.spec, m1.theta, m2.theta, holdout)


def diff_params(spec: ModelSpec, theta_a, theta_b, holdout: Dataset | None) -> float:
    return float(diff_many(spec, theta_a, np.atleast_2d(theta_b), holdout)[0])


# Row-block size for batched holdout scoring: keeps the (block, k) score
# panel cache-resident instead of materializing an (n_holdout, k) matrix.
_DIFF_BLOCK_ROWS = 8192


def _block_scores(spec, thetas, Xb):
    """Scores for one holdout block: (b, k) for lin/lr, (b, k, K) for me."""
    if spec.kind in ("lin", "lr"):
        return np.asarray(Xb @ thetas.T)
    k = thetas.shape[0]
    K = spec.n_classes
    return np.asarray(Xb @ thetas.reshape(k * K, Xb.shape[1]).T).reshape(-1, k, K)


def _accumulate_diff(spec, X, thetas_a, thetas_b, theta_ref):
    """Sum of per-row disagreements (classification) or squared prediction
    gaps (regression) per draw, streamed over row blocks. Exactly one of
    ``thetas_b`` (paired stacks) or ``theta_ref`` (common reference) is set.
    """
    n = X.shape[0]
    k = thetas_a.shape[0]
    acc = np.zeros(k)
    for start in range(0, n, _DIFF_BLOCK_ROWS):
        Xb = X[start:start + _DIFF_BLOCK_ROWS]
        Za = _block_scores(spec, thetas_a, Xb)
        if thetas_b is not None:
            Zb = _block_scores(spec, thetas_b, Xb)
        else:
            zr = np.asarray(Xb @ theta_ref).ravel() if spec.kind != "me" else None
        if spec.kind == "lin":
            gap = Za - (Zb if thetas_b is not None else zr[:, None])
            acc += np.einsum("ij,ij->j", gap, gap)
        elif spec.kind == "lr":
            right = (Zb >= 0.0) if thetas_b is not None else (zr >= 0.0)[:, None]
            acc += np.sum((Za >= 0.0) != right, axis=0)
        else:
            if thetas_b is not None:
                right = np.argmax(Zb, axis=2)
            else:
                right = predict(spec, theta_ref, Xb)[:, None]
            acc += np.sum(np.argmax(Za, axis=2) != right, axis=0)
    if spec.kind == "lin":
        return np.sqrt(acc / n)
    return acc / n


def diff_many(spec: ModelSpec, theta_ref, thetas: np.ndarray, holdout: Dataset | None) -> np.ndarray:
    """v(theta_ref, thetas[i]) for a stack of parameter vectors."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    if spec.kind == "ppca":
        d_times_q = thetas.shape[1] - 1
        a = np.asarray(theta_ref, dtype=np.float64)[:d_times_q]
        B = thetas[:, :d_times_q]
        denom = np.linalg.norm(a) * np.linalg.norm(B, axis=1)
        if np.any(denom == 0.0):
            raise ValueError("ppca difference undefined for all-zero factors")
        return 1.0 - (B @ a) / denom
    if holdout is None or holdout.n_rows == 0:
        raise ValueError(f"model {spec.kind!r} needs a non-empty holdout for diff")
    theta_ref = np.asarray(theta_ref, dtype=np.float64)
    return _accumulate_diff(spec, holdout.features, thetas, None, theta_ref)


def diff_pairs(spec: ModelSpec, thetas_a: np.ndarray, thetas_b: np.ndarray, holdout: Dataset | None) -> np.ndarray:
    """v(thetas_a[i], thetas_b[i]) for paired stacks of parameter vectors."""
    thetas_a = np.atleast_2d(np.asarray(thetas_a, dtype=np.float64))
    thetas_b = np.atleast_2d(np.asarray(thetas_b, dtype=np.float64))
    if spec.kind == "ppca":
        d_times_q = thetas_a.shape[1] - 1
        A, B = thetas_a[:, :d_times_q], thetas_b[:, :d_times_q]
        denom = np.linalg.norm(A, axis=1) * np.linalg.norm(B, axis=1)
        if np.any(denom == 0.0):
            raise ValueError("ppca difference undefined for all-zero factors")
        return 1.0 - np.einsum("ij,ij->i", A, B) / denom
    if holdout is None or holdout.n_rows == 0:
        raise ValueError(f"model {spec.kind!r} needs a non-empty holdout for diff")
    return _accumulate_diff(spec, holdout.features, thetas_a, thetas_b, None)


# ---------------------------------------------------------------------------
# closed-form solvers


def solve(spec: ModelSpec, data: Dataset) -> np.ndarray:
    """Closed-form optimal parameters (lin and ppca only).

    lin:  theta = (X^T X / n + beta I)^-1 X^T y / n
    ppca: principal-eigenvector solution; the noise variance is the mean
          of the trailing eigenvalues of the sample second-moment matrix
          and factor j is u_j * sqrt(lambda_j - sigma^2). Assumes the
          features are (approximately) zero-centered.
    """
    if spec.kind == "lin":
        y = _check_labels(spec, data)
        X, n = data.features, data.n_rows
        A = np.asarray((X.T @ X).todense() if sp.issparse(X) else X.T @ X) / n
        A[np.diag_indices_from(A)] += spec.beta
        b = np.asarray(X.T @ y).ravel() / n
        try:
            return scipy.linalg.solve(A, b, assume_a="pos")
        except scipy.linalg.LinAlgError as exc:
            raise ValueError(
                "rank-deficient system; use beta > 0 for a unique solution"
            ) from exc
    if spec.kind != "ppca":
        raise UnsupportedOperation(f"no closed-form solver for {spec.kind!r}")

    X, n, d, q = data.features, data.n_rows, data.dim, spec.n_factors
    if not 1 <= q < d:
        raise ValueError(f"ppca needs 1 <= q < d, got q={q}, d={d}")
    S = np.asarray((X.T @ X).todense() if sp.issparse(X) else X.T @ X) / n
    evals, evecs = scipy.linalg.eigh(S)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    sigma2 = float(np.mean(evals[q:]))
    if sigma2 <= 0:
        sigma2 = 1e-12
    scale = np.sqrt(np.clip(evals[:q] - sigma2, 0.0, None))
    W = evecs[:, :q] * scale[None, :]
    # deterministic eigenvector signs: largest-magnitude entry positive
    for j in range(q):
        col = W[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            W[:, j] = -col
    theta = np.empty(d * q + 1)
    theta[: d * q] = W.ravel()
    theta[-1] = sigma2
    return theta


# ---------------------------------------------------------------------------
# serialization


def model_to_dict(model: TrainedModel) -> dict:
    spec = model.spec
    doc = {
        "class": spec.kind,
        "beta": spec.beta,
        "theta": model.theta.tolist(),
        "n": model.n,
        "N": model.N,
        "layout": layout(spec, _feature_dim(spec, model.theta)),
        "grad_norm": model.grad_norm,
        "converged": model.converged,
    }
    if spec.kind == "me":
        doc["K"] = spec.n_classes
    if spec.kind == "ppca":
        doc["q"] = spec.n_factors
    return doc


def model_to_json(model: TrainedModel) -> str:
    return json.dumps(model_to_dict(model))


def model_from_dict(doc: dict) -> TrainedModel:
    spec = ModelSpec(
        kind=doc["class"],
        beta=doc["beta"],
        n_classes=doc.get("K"),
        n_factors=doc.get("q"),
    )
    return TrainedModel(
        spec=spec,
        theta=np.asarray(doc["theta"], dtype=np.float64),
        n=doc["n"],
        N=doc["N"],
        grad_norm=doc.get("grad_norm", 0.0),
        converged=doc.get("converged", True),
    )


def model_from_json(text: str) -> TrainedModel:
    return model_from_dict(json.loads(text))


def _feature_dim(spec: ModelSpec, theta) -> int:
    dp = len(theta)
    if spec.kind in ("lin", "lr"):
        return dp
    if spec.kind == "me":
        return dp // spec.n_classes
    return (dp - 1) // spec.n_factors
