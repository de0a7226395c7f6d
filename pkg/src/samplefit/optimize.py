"""Deterministic convex minimization of f_n through the model abstraction.

BFGS for small parameter dimensions, limited-memory BFGS above the dimension
switch (default 100). The line search is backtracking Armijo (c = 1e-4,
halving, floor 1e-12), so accepted steps never increase the objective and
runs are bit-reproducible for fixed inputs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import models
from .data import Dataset

# Audited by tests: a contract run may perform at most two trainings and
# size estimation none.
_minimize_calls = 0
_training_calls = 0
_training_seconds = 0.0


def minimize_call_count() -> int:
    return _minimize_calls


def training_call_count() -> int:
    return _training_calls


def training_seconds_total() -> float:
    """Cumulative wall time spent inside fit_model."""
    return _training_seconds


class OptimizationError(RuntimeError):
    """Non-finite objective/gradient; carries the offending iterate."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "auto"  # "auto" | "bfgs" | "lbfgs"
    lbfgs_memory: int = 10
    grad_tol: float = 1e-6  # inf-norm of the mean gradient
    max_iters: int = 500
    dim_switch: int = 100  # params >= this -> lbfgs under "auto"
    armijo_c: float = 1e-4
    step_floor: float = 1e-12

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.method not in ("auto", "bfgs", "lbfgs"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class MinimizeResult:
    theta: np.ndarray
    iters: int
    grad_norm: float
    converged: bool
    message: str = ""


def objective(spec, theta, data: Dataset) -> float:
    """f_n(theta) for the given model class."""
    return models.objective(spec, theta, data)


def minimize(spec, data: Dataset, config: OptimizerConfig | None = None,
             init: np.ndarray | None = None,
             rng: np.random.Generator | None = None) -> MinimizeResult:
    """Minimize f_n(theta), returning a gradient-norm-certified iterate.

    ``init`` defaults to the model class's canonical starting point
    (zeros; small seeded random factors for PPCA). Convergence means
    inf-norm of the mean gradient <= ``grad_tol``; hitting ``max_iters``
    first returns the partial iterate with ``converged=False``.
    """
    global _minimize_calls
    _minimize_calls += 1

    if data.n_rows == 0:
        raise ValueError("cannot train on an empty dataset")
    config = config or OptimizerConfig()
    if init is None:
        theta = models.init_params(spec, data.dim, rng)
    else:
        theta = np.array(init, dtype=np.float64, copy=True)
    dp = theta.shape[0]

    use_lbfgs = config.method == "lbfgs" or (
        config.method == "auto" and dp >= config.dim_switch
    )

    f = models.objective(spec, theta, data)
    g = models.mean_grad(spec, theta, data)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise OptimizationError("objective or gradient not finite at start", theta)

    if use_lbfgs:
        return _lbfgs(spec, data, theta, f, g, config)
    return _bfgs(spec, data, theta, f, g, config)


def _grad_norm(g):
    return float(np.max(np.abs(g)))


def _line_search(spec, data, theta, f, g, direction, config):
    """Backtracking Armijo search; non-finite trial values are rejected
    like failed decreases. Returns (step, theta_new, f_new) or None."""
    slope = float(g @ direction)
    if slope >= 0:
        # fall back to steepest descent if the model direction degenerated
        direction = -g
        slope = float(g @ direction)
        if slope >= 0:
            return None
    step = 1.0
    while step >= config.step_floor:
        trial = theta + step * direction
        f_trial = models.objective(spec, trial, data)
        if np.isfinite(f_trial) and f_trial <= f + config.armijo_c * step * slope:
            return step, trial, f_trial
        step *= 0.5
    return None


def _bfgs(spec, data, theta, f, g, config):
    dp = theta.shape[0]
    H_inv = np.eye(dp)
    iters = 0
    message = "converged"
    while _grad_norm(g) > config.grad_tol:
        if iters >= config.max_iters:
            return MinimizeResult(theta, iters, _grad_norm(g), False, "max_iters reached")
        direction = -(H_inv @ g)
        found = _line_search(spec, data, theta, f, g, direction, config)
        if found is None:
            return MinimizeResult(theta, iters, _grad_norm(g), False, "line search failed")
        step, theta_new, f = found
        g_new = models.mean_grad(spec, theta_new, data)
        if not np.all(np.isfinite(g_new)):
            raise OptimizationError("gradient not finite", theta_new)
        s = theta_new - theta
        y_vec = g_new - g
        sy = float(s @ y_vec)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y_vec)):
            rho = 1.0 / sy
            Hy = H_inv @ y_vec
            # standard BFGS inverse update
            H_inv += (sy + float(y_vec @ Hy)) * rho * rho * np.outer(s, s)
            H_inv -= rho * (np.outer(Hy, s) + np.outer(s, Hy))
        theta, g = theta_new, g_new
        iters += 1
    return MinimizeResult(theta, iters, _grad_norm(g), True, message)


def _lbfgs(spec, data, theta, f, g, config):
    mem_s, mem_y, mem_rho = [], [], []
    iters = 0
    while _grad_norm(g) > config.grad_tol:
        if iters >= config.max_iters:
            return MinimizeResult(theta, iters, _grad_norm(g), False, "max_iters reached")
        direction = -_two_loop(g, mem_s, mem_y, mem_rho)
        found = _line_search(spec, data, theta, f, g, direction, config)
        if found is None:
            return MinimizeResult(theta, iters, _grad_norm(g), False, "line search failed")
        step, theta_new, f = found
        g_new = models.mean_grad(spec, theta_new, data)
        if not np.all(np.isfinite(g_new)):
            raise OptimizationError("gradient not finite", theta_new)
        s = theta_new - theta
        y_vec = g_new - g
        sy = float(s @ y_vec)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y_vec)):
            mem_s.append(s)
            mem_y.append(y_vec)
            mem_rho.append(1.0 / sy)
            if len(mem_s) > config.lbfgs_memory:
                mem_s.pop(0)
                mem_y.pop(0)
                mem_rho.pop(0)
        theta, g = theta_new, g_new
        iters += 1
    return MinimizeResult(theta, iters, _grad_norm(g), True, "converged")


def _two_loop(g, mem_s, mem_y, mem_rho):
    q = g.copy()
    alphas = []
    for s, y_vec, rho in zip(reversed(mem_s), reversed(mem_y), reversed(mem_rho)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y_vec
    if mem_s:
        s, y_vec = mem_s[-1], mem_y[-1]
        q *= float(s @ y_vec) / float(y_vec @ y_vec)
    for (s, y_vec, rho), a in zip(zip(mem_s, mem_y, mem_rho), reversed(alphas)):
        b = rho * float(y_vec @ q)
        q += (a - b) * s
    return q


def fit_model(spec, data: Dataset, population_size: int,
              config: OptimizerConfig | None = None,
              init: np.ndarray | None = None,
              rng: np.random.Generator | None = None) -> models.TrainedModel:
    """Train on ``data`` and wrap the result with provenance (n, N).

    Prefers the model's closed-form solver when one exists and its
    solution already meets the gradient certificate; otherwise runs the
    iterative path (seeded from the closed form when available).
    """
    global _training_calls, _training_seconds
    _training_calls += 1
    t_start = time.perf_counter()
    try:
        config = config or OptimizerConfig()
        if spec.kind in ("lin", "ppca") and init is None:
            theta = models.solve(spec, data)
            gnorm = _grad_norm(models.mean_grad(spec, theta, data))
            if gnorm <= config.grad_tol:
                return models.TrainedModel(
                    spec, theta, n=data.n_rows, N=population_size,
                    grad_norm=gnorm, converged=True, iters=0,
                )
            # polish the closed-form iterate; still one training
            init = theta
        result = minimize(spec, data, config, init=init, rng=rng)
        return models.TrainedModel(
            spec, result.theta, n=data.n_rows, N=population_size,
            grad_norm=result.grad_norm, converged=result.converged, iters=result.iters,
        )
    finally:
        _training_seconds += time.perf_counter() - t_start
