import numpy as np
import pytest
from sklearn.base import clone

from samplefit import synthetic
from samplefit.estimators import (
    ApproximateClassifier,
    ApproximatePCA,
    ApproximateRegressor,
)
from samplefit.validation import NotFittedError


def binary_problem(n=30000, d=6, seed=0, labels=(3.0, 7.0)):
    data = synthetic.logistic_data(n, d, seed=seed)
    y = np.where(data.labels > 0.5, labels[1], labels[0])
    return np.asarray(data.features), y


class TestApproximateClassifier:
    def test_fit_predict_binary(self):
        X, y = binary_problem()
        clf = ApproximateClassifier(accuracy=0.9, n0=4000, random_state=1).fit(X, y)
        assert clf.model_.spec.kind == "lr"
        np.testing.assert_array_equal(clf.classes_, [3.0, 7.0])
        preds = clf.predict(X[:50])
        assert set(np.unique(preds)) <= {3.0, 7.0}
        assert clf.epsilon_ <= 0.1 or clf.report_.trainings_performed == 2
        assert clf.n_used_ >= 1

    def test_multiclass_uses_softmax(self):
        data = synthetic.multiclass_data(25000, 5, 3, seed=2)
        clf = ApproximateClassifier(accuracy=0.85, n0=4000, random_state=2)
        clf.fit(np.asarray(data.features), data.labels)
        assert clf.model_.spec.kind == "me"
        assert clf.predict(np.asarray(data.features[:10])).shape == (10,)

    def test_lr_rejected_for_multiclass(self):
        data = synthetic.multiclass_data(1000, 4, 3, seed=3)
        clf = ApproximateClassifier(model="lr")
        with pytest.raises(ValueError):
            clf.fit(np.asarray(data.features), data.labels)

    def test_sklearn_protocol(self):
        clf = ApproximateClassifier(accuracy=0.9, n0=123)
        params = clf.get_params()
        assert params["accuracy"] == 0.9 and params["n0"] == 123
        cloned = clone(clf)
        assert cloned.get_params() == params
        clf.set_params(accuracy=0.8)
        assert clf.accuracy == 0.8

    def test_predict_before_fit(self):
        with pytest.raises(NotFittedError):
            ApproximateClassifier().predict(np.ones((2, 3)))

    def test_feature_dim_checked(self):
        X, y = binary_problem(n=20000, d=4, seed=5)
        clf = ApproximateClassifier(accuracy=0.85, n0=3000, random_state=3).fit(X, y)
        with pytest.raises(ValueError):
            clf.predict(np.ones((2, 5)))

    def test_non_finite_rejected(self):
        X = np.ones((100, 2))
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            ApproximateClassifier().fit(X, np.zeros(100))

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            ApproximateClassifier().fit(np.ones((50, 2)), np.zeros(50))

    def test_sparse_input(self):
        import scipy.sparse as sp

        X, y = binary_problem(n=20000, d=5, seed=6)
        X[np.abs(X) < 0.8] = 0.0
        Xs = sp.csr_matrix(X)
        clf = ApproximateClassifier(accuracy=0.85, n0=3000, random_state=6).fit(Xs, y)
        assert clf.predict(Xs[:10]).shape == (10,)


class TestApproximateRegressor:
    def test_fit_predict(self):
        data = synthetic.linear_data(30000, 5, seed=4)
        reg = ApproximateRegressor(accuracy=0.7, n0=4000, random_state=4)
        reg.fit(np.asarray(data.features), data.labels)
        assert reg.coef_.shape == (5,)
        preds = reg.predict(np.asarray(data.features[:20]))
        assert preds.shape == (20,)
        # predictions are the linear map under the fitted coefficients
        np.testing.assert_allclose(preds, np.asarray(data.features[:20]) @ reg.coef_,
                                   atol=1e-12)


class TestApproximatePCA:
    def test_fit_transform(self):
        data = synthetic.factor_data(25000, 8, 2, seed=5)
        pca = ApproximatePCA(n_factors=2, accuracy=0.9, n0=4000, random_state=5)
        Z = pca.fit_transform(np.asarray(data.features))
        assert pca.components_.shape == (2, 8)
        assert pca.noise_variance_ > 0
        assert Z.shape == (25000, 2)

    def test_factor_count_validated(self):
        with pytest.raises(ValueError):
            ApproximatePCA(n_factors=9).fit(np.random.default_rng(0).normal(size=(100, 4)))
