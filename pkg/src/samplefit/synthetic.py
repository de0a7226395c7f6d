"""Synthetic dataset generators for benchmarks, coverage experiments, and tests."""

from __future__ import annotations

import numpy as np

from .data import Dataset


def logistic_data(n: int, d: int, seed=0, scale: float = 1.0, coef_scale: float = 1.0) -> Dataset:
    """Binary labels from a planted logistic model on N(0, scale^2) features.

    ``coef_scale`` controls separation: larger coefficients push class
    probabilities toward 0/1 and shrink the disagreement-prone boundary mass.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, scale, size=(n, d))
    theta = coef_scale * rng.normal(size=d) / np.sqrt(d)
    p = 1.0 / (1.0 + np.exp(-(X @ theta)))
    y = (rng.random(n) < p).astype(np.float64)
    return Dataset(X, y)


def linear_data(n: int, d: int, seed=0, noise: float = 1.0, scale: float = 1.0) -> Dataset:
    """Real targets from a planted linear model with Gaussian noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, scale, size=(n, d))
    theta = rng.normal(size=d) / np.sqrt(d)
    y = X @ theta + noise * rng.normal(size=n)
    return Dataset(X, y)


def multiclass_data(n: int, d: int, n_classes: int, seed=0, coef_scale: float = 2.0) -> Dataset:
    """Class labels sampled from a planted softmax model."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    W = coef_scale * rng.normal(size=(n_classes, d)) / np.sqrt(d)
    Z = X @ W.T
    Z -= Z.max(axis=1, keepdims=True)
    P = np.exp(Z)
    P /= P.sum(axis=1, keepdims=True)
    y = np.array([rng.choice(n_classes, p=row) for row in P], dtype=np.float64)
    return Dataset(X, y)


def factor_data(n: int, d: int, q: int, seed=0, noise: float = 0.1,
                factor_scale: float = 2.0) -> Dataset:
    """Zero-mean data with a planted q-factor covariance plus isotropic noise."""
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(d, q))
    W, _ = np.linalg.qr(W)
    W = W * factor_scale
    Z = rng.normal(size=(n, q))
    X = Z @ W.T + noise * rng.normal(size=(n, d))
    return Dataset(X, None)
