"""Fast i.i.d. sampling from the trained-parameter perturbation law.

Draws come from N(0, H^-1 J H^-1) once ("base" draws) and are rescaled by
sqrt(1/n - 1/N) for whatever sample sizes are being considered -- the same
base draws serve every size, which both saves work and gives the
sample-size search common random numbers.

With SVD factors (J = U diag(s^2) U^T) and an L2 regularizer the base
transform is L = U Lambda with Lambda_ii = s_i / (s_i^2 + beta), so
L L^T = H^-1 J H^-1 exactly on the retained spectrum and nothing dp x dp
is ever formed. With explicit matrices a Cholesky factor of
H^-1 J H^-1 is used instead.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg

from .stats import EXPLICIT_DIM_CAP, HessianPair, StatFactors, covariance_explicit

logger = logging.getLogger(__name__)


class ParamSampler:
    """Immutable sampler for the zero-mean base distribution.

    Build through :func:`build_sampler`. Draws are deterministic for a
    fixed seed; each instance owns its generator, so two samplers built
    with equal seeds produce identical streams.
    """

    def __init__(self, transform: np.ndarray, mode: str, seed):
        self._L = np.asarray(transform, dtype=np.float64)
        self.mode = mode
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    @property
    def dim(self) -> int:
        return self._L.shape[0]

    def draw_base(self, k: int) -> np.ndarray:
        """k draws from N(0, H^-1 J H^-1), as a (k, dp) array."""
        if k < 1:
            raise ValueError("k must be >= 1")
        z = self._rng.standard_normal((k, self._L.shape[1]))
        return z @ self._L.T

    def base_covariance(self) -> np.ndarray:
        """The exact covariance L L^T of the base draws (small dp only)."""
        return self._L @ self._L.T


def build_sampler(stats, seed=0, validate: bool = True) -> ParamSampler:
    """Construct a ParamSampler from StatFactors or an explicit HessianPair.

    The factor path requires an L2 (or absent) regularizer, which all
    built-in model classes satisfy. The explicit path takes a Cholesky
    factor of H^-1 J H^-1, retrying once with 1e-12 jitter (logged).
    """
    if isinstance(stats, StatFactors):
        lam = stats.s / (stats.s**2 + stats.beta)
        L = stats.U * lam
        sampler = ParamSampler(L, mode="factor", seed=seed)
        if validate and stats.dim <= EXPLICIT_DIM_CAP:
            target = covariance_explicit(stats, 1.0)
            err = np.linalg.norm(L @ L.T - target) / max(np.linalg.norm(target), 1e-300)
            if err > 1e-6:
                raise ValueError(f"factor transform does not reproduce covariance: {err}")
        return sampler
    if isinstance(stats, HessianPair):
        C = covariance_explicit(stats, 1.0)
        try:
            L = scipy.linalg.cholesky(C, lower=True)
        except scipy.linalg.LinAlgError:
            logger.warning("covariance not positive definite; adding 1e-12 jitter")
            try:
                L = scipy.linalg.cholesky(C + 1e-12 * np.eye(C.shape[0]), lower=True)
            except scipy.linalg.LinAlgError as exc:
                raise ValueError("covariance Cholesky failed after jitter") from exc
        return ParamSampler(L, mode="explicit-cholesky", seed=seed)
    raise TypeError(f"cannot build a sampler from {type(stats).__name__}")


def size_scale(n: int, N: int) -> float:
    """sqrt(1/n - 1/N), the deviation scale of a size-n model against size N."""
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
    return float(np.sqrt(1.0 / n - 1.0 / N))


def scale_draws(base_draws: np.ndarray, n: int, N: int) -> np.ndarray:
    """Rescale base draws to N(0, (1/n - 1/N) H^-1 J H^-1).

    Pure scalar multiplication: no re-sampling happens per size.
    """
    return size_scale(n, N) * np.asarray(base_draws, dtype=np.float64)


def sample_full_given_approx(sampler: ParamSampler, theta_n: np.ndarray,
                             n: int, N: int, k: int) -> np.ndarray:
    """k draws of the unknown full-data parameters conditioned on theta_n.

    theta_N | theta_n ~ N(theta_n, (1/n - 1/N) H^-1 J H^-1).
    """
    theta_n = np.asarray(theta_n, dtype=np.float64)
    return theta_n[None, :] + scale_draws(sampler.draw_base(k), n, N)
