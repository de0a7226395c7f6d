import numpy as np
import pytest

from samplefit import synthetic
from samplefit.data import Dataset
from samplefit.models import make_spec, mean_grad, objective, param_dim, solve
from samplefit.optimize import (
    OptimizerConfig,
    fit_model,
    minimize,
    minimize_call_count,
    training_call_count,
)


class TestMinimize:
    def test_lin_exact_fit(self):
        # oracle: the closed-form solution of the same problem
        spec = make_spec("lin", beta=0.0)
        data = Dataset(np.array([[1.0], [2.0]]), np.array([2.0, 4.0]))
        res = minimize(spec, data)
        assert res.converged
        np.testing.assert_allclose(res.theta, [2.0], atol=1e-6)

    def test_lr_separable_converges_with_regularizer(self):
        X = np.concatenate([np.full((30, 1), -1.0), np.full((30, 1), 1.0)])
        y = np.concatenate([np.zeros(30), np.ones(30)])
        res = minimize(make_spec("lr", beta=0.001), Dataset(X, y))
        assert res.converged
        assert res.grad_norm <= 1e-6

    def test_iteration_cap_sets_failure_flag(self):
        data = synthetic.logistic_data(200, 5, seed=0)
        res = minimize(make_spec("lr"), data, OptimizerConfig(max_iters=1))
        assert not res.converged
        assert res.iters == 1
        assert res.theta.shape == (5,)

    def test_deterministic(self):
        data = synthetic.logistic_data(300, 4, seed=1)
        a = minimize(make_spec("lr"), data)
        b = minimize(make_spec("lr"), data)
        np.testing.assert_array_equal(a.theta, b.theta)
        assert a.iters == b.iters

    @pytest.mark.parametrize("kind", ["lin", "lr", "me"])
    def test_two_inits_agree_on_strongly_convex(self, kind):
        if kind == "me":
            data = synthetic.multiclass_data(300, 4, 3, seed=2)
            spec = make_spec("me", beta=0.01, n_classes=3)
        elif kind == "lr":
            data = synthetic.logistic_data(300, 4, seed=2)
            spec = make_spec("lr", beta=0.01)
        else:
            data = synthetic.linear_data(300, 4, seed=2)
            spec = make_spec("lin", beta=0.01)
        dp = param_dim(spec, 4)
        tol = 1e-6
        cfg = OptimizerConfig(grad_tol=tol)
        a = minimize(spec, data, cfg, init=np.zeros(dp))
        b = minimize(spec, data, cfg, init=np.full(dp, 0.5))
        assert a.converged and b.converged
        assert np.abs(a.theta - b.theta).max() < 10 * tol

    def test_objective_never_increases_along_run(self):
        # re-evaluate f at each recorded iterate by shrinking max_iters
        spec = make_spec("lr", beta=0.001)
        data = synthetic.logistic_data(400, 5, seed=3)
        values = []
        for cap in range(1, 8):
            res = minimize(spec, data, OptimizerConfig(max_iters=cap))
            values.append(objective(spec, res.theta, data))
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))

    def test_lbfgs_matches_bfgs(self):
        spec = make_spec("lr", beta=0.01)
        data = synthetic.logistic_data(500, 6, seed=4)
        a = minimize(spec, data, OptimizerConfig(method="bfgs"))
        b = minimize(spec, data, OptimizerConfig(method="lbfgs"))
        assert np.abs(a.theta - b.theta).max() < 1e-5

    def test_auto_switches_on_parameter_count(self):
        # dim_switch tiny -> auto must take the lbfgs path and still converge
        spec = make_spec("lr", beta=0.01)
        data = synthetic.logistic_data(300, 8, seed=5)
        res = minimize(spec, data, OptimizerConfig(dim_switch=2))
        assert res.converged

    def test_ppca_converges_to_closed_form(self):
        data = synthetic.factor_data(5000, 6, 2, seed=6, noise=0.3)
        spec = make_spec("ppca", n_factors=2)
        res = minimize(spec, data, rng=np.random.default_rng(0))
        assert res.converged
        direct = solve(spec, data)
        gap = objective(spec, res.theta, data) - objective(spec, direct, data)
        assert abs(gap) < 1e-8

    def test_empty_dataset_rejected(self):
        with pytest.raises(Exception):
            minimize(make_spec("lr"), Dataset(np.zeros((0, 2)), np.zeros(0)))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(grad_tol=0.0)
        with pytest.raises(ValueError):
            OptimizerConfig(max_iters=0)
        with pytest.raises(ValueError):
            OptimizerConfig(method="sgd")


class TestFitModel:
    def test_certificate_attached(self):
        data = synthetic.logistic_data(500, 4, seed=7)
        model = fit_model(make_spec("lr"), data, population_size=5000)
        assert model.n == 500 and model.N == 5000
        assert model.grad_norm <= 1e-6
        g = mean_grad(model.spec, model.theta, data)
        assert np.abs(g).max() == pytest.approx(model.grad_norm, rel=1e-9)

    def test_counters(self):
        data = synthetic.logistic_data(200, 3, seed=8)
        m0, t0 = minimize_call_count(), training_call_count()
        fit_model(make_spec("lr"), data, population_size=200)
        assert training_call_count() == t0 + 1
        assert minimize_call_count() == m0 + 1

    def test_solve_path_counts_as_one_training(self):
        data = synthetic.linear_data(200, 3, seed=9)
        m0, t0 = minimize_call_count(), training_call_count()
        model = fit_model(make_spec("lin"), data, population_size=200)
        assert model.grad_norm <= 1e-6
        assert training_call_count() == t0 + 1
        assert minimize_call_count() == m0  # closed form, no iterations
