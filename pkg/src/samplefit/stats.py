"""Curvature and score-covariance statistics at a trained parameter vector.

The parameter-perturbation law behind the accuracy and sample-size
estimators needs two matrices at theta_n:

* ``H`` -- Jacobian of the full mean gradient (objective curvature), and
* ``J`` -- Jacobian of the unregularized part, ``J = H - J_r``, which is
  asymptotically the covariance of the per-example likelihood scores.

Three interchangeable estimators are provided. ``closed_form`` (lin/lr
only) and ``inverse_gradients`` produce explicit (dp, dp) matrices;
``observed_fisher`` -- the default -- produces SVD factors (U, s) with
J = U diag(s^2) U^T, never materializing a dp x dp matrix, at the cost of
a single per-example-gradients pass.

All quantities are on the per-example scale of the mean gradient: J is
the covariance of one score vector, matching ``closed_form``'s
H = X^T Q X / n + beta I. The factor builder therefore normalizes the
stacked score rows by 1/sqrt(n) before the SVD (see
``factors_from_scores`` for the unnormalized primitive).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.special

from . import models
from .data import Dataset

# Explicit (dp, dp) paths are for tests and small problems.
EXPLICIT_DIM_CAP = 2000

# Singular values below s_max * this are treated as zero rank.
SV_FLOOR = 1e-10


@dataclass(frozen=True)
class HessianPair:
    """Explicit curvature matrices: H (full) and J = H - J_r."""

    H: np.ndarray
    J: np.ndarray
    n: int

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.float64)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError(f"H must be square, got {H.shape}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "J", np.asarray(self.J, dtype=np.float64))


@dataclass(frozen=True)
class StatFactors:
    """Truncated SVD factors with J = U diag(s^2) U^T.

    ``U`` has orthonormal columns, ``s`` is strictly positive and
    descending, ``beta`` is the L2 coefficient entering H = J + beta I,
    and ``n`` records the sample size that produced the factors.
    """

    U: np.ndarray
    s: np.ndarray
    beta: float
    n: int

    def __post_init__(self):
        U = np.asarray(self.U, dtype=np.float64)
        s = np.asarray(self.s, dtype=np.float64)
        if U.ndim != 2 or s.ndim != 1 or U.shape[1] != s.shape[0]:
            raise ValueError("inconsistent factor shapes")
        if np.any(s <= 0):
            raise ValueError("singular values must be strictly positive")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "s", s)

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    @property
    def rank(self) -> int:
        return self.s.shape[0]

    def implied_j(self) -> np.ndarray:
        return (self.U * self.s**2) @ self.U.T

    def to_arrays(self) -> dict:
        """Flat-array form for report bundling."""
        return {
            "U": self.U.tolist(),
            "s": self.s.tolist(),
            "beta": self.beta,
            "n": self.n,
        }


def closed_form(spec, theta, data: Dataset) -> HessianPair:
    """Analytic H for lin/lr: H = X^T Q X / n + beta I.

    Q is the identity for lin and diag(sigma(z_i)(1 - sigma(z_i))) for lr.
    """
    if spec.kind not in ("lin", "lr"):
        raise models.UnsupportedOperation(f"no closed-form curvature for {spec.kind!r}")
    X, n = data.features, data.n_rows
    theta = np.asarray(theta, dtype=np.float64)
    if spec.kind == "lr":
        s = scipy.special.expit(np.asarray(X @ theta).ravel())
        w = s * (1.0 - s)
        Xw = X.multiply(w[:, None]) if sp.issparse(X) else X * w[:, None]
    else:
        Xw = X
    H = np.asarray((X.T @ Xw).todense() if sp.issparse(X) else X.T @ Xw) / n
    H = 0.5 * (H + H.T)
    J = H.copy()
    H[np.diag_indices_from(H)] += spec.beta
    return HessianPair(H=H, J=J, n=n)


def inverse_gradients(spec, theta, data: Dataset, eps: float = 1e-6) -> HessianPair:
    """Finite-difference H from dp+1 mean-gradient evaluations.

    Column i is (g(theta + eps e_i) - g(theta)) / eps; the result is
    symmetrized, since the exact Jacobian is a Hessian. Works for every
    model class but costs dp + 1 ``grads`` passes.
    """
    theta = np.asarray(theta, dtype=np.float64)
    dp = theta.shape[0]
    g0 = models.grads(spec, theta, data).mean(axis=0)
    H = np.empty((dp, dp))
    for i in range(dp):
        step = theta.copy()
        step[i] += eps
        gi = models.grads(spec, step, data).mean(axis=0)
        if not np.all(np.isfinite(gi)):
            raise ValueError(f"non-finite perturbed gradient at coordinate {i}")
        H[:, i] = (gi - g0) / eps
    H = 0.5 * (H + H.T)
    J = H.copy()
    J[np.diag_indices_from(J)] -= models.regularizer_jacobian_diag(spec)
    return HessianPair(H=H, J=J, n=data.n_rows)


def factors_from_scores(Q: np.ndarray, beta: float, n: int | None = None,
                        j_diag_eps: float = 0.0) -> StatFactors:
    """SVD factorization of a stacked score matrix: Q^T Q = U diag(s^2) U^T.

    Singular values below ``SV_FLOOR * s_max`` are truncated, which keeps
    the implied J strictly positive on the retained spectrum.
    ``j_diag_eps`` is added uniformly to s^2 for callers who want to
    inflate the score covariance of non-fully-converged models.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if not np.any(Q):
        raise ValueError("degenerate all-zero score matrix")
    U, s, _ = scipy.linalg.svd(Q.T, full_matrices=False)
    keep = s > SV_FLOOR * s[0]
    U, s = U[:, keep], s[keep]
    if j_diag_eps > 0.0:
        s = np.sqrt(s**2 + j_diag_eps)
    return StatFactors(U=U, s=s, beta=beta, n=n if n is not None else Q.shape[0])


def observed_fisher(spec, theta, data: Dataset, beta: float | None = None,
                    j_diag_eps: float = 0.0) -> StatFactors:
    """Score-covariance factors from a single per-example-gradients pass.

    The rows of the score matrix are the pure likelihood scores
    q(theta; x_i, y_i) (regularizer term excluded), mean-centered and
    scaled by 1/sqrt(n) so the implied J is the empirical covariance of
    one score -- the same scale as ``closed_form``'s J.
    """
    if data.n_rows < 2:
        raise ValueError("observed_fisher needs at least 2 rows")
    if beta is None:
        beta = models.regularizer_jacobian_diag(spec)
    Q = models.score_rows(spec, theta, data)
    Q = Q - Q.mean(axis=0)
    Q /= np.sqrt(data.n_rows)
    return factors_from_scores(Q, beta=beta, n=data.n_rows, j_diag_eps=j_diag_eps)


def covariance_explicit(stats, alpha: float) -> np.ndarray:
    """alpha * H^-1 J H^-1 as an explicit symmetric PSD matrix.

    Accepts either a HessianPair or StatFactors; for factors with an L2
    regularizer the result is alpha * U Lambda^2 U^T with
    Lambda_ii = s_i / (s_i^2 + beta), restricted to the retained spectrum.
    Intended for tests and small dimensions (capped at EXPLICIT_DIM_CAP).
    """
    if isinstance(stats, StatFactors):
        if stats.dim > EXPLICIT_DIM_CAP:
            raise ValueError(f"dimension {stats.dim} above explicit cap {EXPLICIT_DIM_CAP}")
        lam = stats.s / (stats.s**2 + stats.beta)
        return alpha * (stats.U * lam**2) @ stats.U.T
    pair = stats
    dp = pair.H.shape[0]
    if dp > EXPLICIT_DIM_CAP:
        raise ValueError(f"dimension {dp} above explicit cap {EXPLICIT_DIM_CAP}")
    try:
        A = scipy.linalg.solve(pair.H, pair.J, assume_a="sym")
        C = scipy.linalg.solve(pair.H, A.T, assume_a="sym")
    except scipy.linalg.LinAlgError as exc:
        raise ValueError(
            "H is singular; rank-deficient data with beta=0 -- use beta > 0"
        ) from exc
    return alpha * 0.5 * (C + C.T)


def pair_from_factors(factors: StatFactors) -> HessianPair:
    """Materialize the explicit H, J implied by SVD factors (small dp only)."""
    if factors.dim > EXPLICIT_DIM_CAP:
        raise ValueError(f"dimension {factors.dim} above explicit cap {EXPLICIT_DIM_CAP}")
    J = factors.implied_j()
    H = J.copy()
    H[np.diag_indices_from(H)] += factors.beta
    return HessianPair(H=H, J=J, n=factors.n)


def compute_statistics(spec, theta, data: Dataset, method: str = "observed-fisher",
                       j_diag_eps: float = 0.0):
    """Dispatch on the configured statistics method."""
    if method == "observed-fisher":
        return observed_fisher(spec, theta, data, j_diag_eps=j_diag_eps)
    if method == "closed-form":
        return closed_form(spec, theta, data)
    if method == "inverse-gradients":
        return inverse_gradients(spec, theta, data)
    raise ValueError(f"unknown statistics method {method!r}")
