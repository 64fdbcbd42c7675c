"""The estimators must compose with scikit-learn's param machinery."""

import numpy as np
import pytest
from sklearn.base import clone

from agcast.baselines import (
    GradientBoosting,
    PolynomialRegression,
    RandomForest,
    RegressionTree,
)
from agcast.lstm import LstmForecaster
from agcast.outliers import IsolationForestDetector
from agcast.preprocess import MinMaxScaler

ESTIMATORS = [
    PolynomialRegression(degree=2),
    RegressionTree(min_leaf=2),
    RandomForest(n_trees=3, seed=1),
    GradientBoosting(rounds=5, seed=2),
    IsolationForestDetector(n_trees=5, contamination=0.1, seed=3),
    LstmForecaster(lookback=4, horizon=2, hidden_size=3, epochs=2, seed=4),
    MinMaxScaler(tolerate_constant=True),
]


@pytest.mark.parametrize("estimator", ESTIMATORS,
                         ids=lambda e: type(e).__name__)
def test_clone_and_params_round_trip(estimator):
    copy = clone(estimator)
    assert copy.get_params() == estimator.get_params()
    assert copy is not estimator
    copy.set_params(**estimator.get_params())
    assert copy.get_params() == estimator.get_params()


def test_cloned_estimator_fits_identically():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 2))
    y = rng.normal(size=40)
    original = RandomForest(n_trees=4, seed=9).fit(X, y)
    cloned = clone(RandomForest(n_trees=4, seed=9)).fit(X, y)
    assert np.array_equal(original.predict(X), cloned.predict(X))


def test_not_fitted_error_is_sklearns():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        IsolationForestDetector().score_samples(np.zeros((3, 1)))
    with pytest.raises(NotFittedError):
        LstmForecaster(lookback=2, horizon=1).predict(np.zeros((1, 2, 1)))
