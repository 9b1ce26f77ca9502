import numpy as np
import pytest

from conftest import encoded, matrix
from swb.config import EstimatorConfig
from swb.errors import IsaError
from swb.estimators import (BaseEstimator, BaselineEstimator, EstimationMethod, EstimatorFactory,
                            InverseEstimator)
from swb.isa import OpinionDistribution


@pytest.mark.parametrize("method, expected", [
    (EstimationMethod.INVERSE, InverseEstimator),
    (EstimationMethod.BASELINE, BaselineEstimator),
    ("inverse", InverseEstimator),
    ("baseline", BaselineEstimator),
])
def test_factory_creates_estimators(method, expected):
    estimator = EstimatorFactory.create_estimator(method)
    assert isinstance(estimator, expected)
    assert estimator.config == EstimatorConfig()


def test_factory_rejects_unknown_method():
    with pytest.raises(IsaError, match="unknown estimation method"):
        EstimatorFactory.create_estimator("median")


def test_factory_lists_available_methods():
    assert set(EstimatorFactory.get_available_estimators()) >= {EstimationMethod.INVERSE, EstimationMethod.BASELINE}


def test_register_estimator_replaces_strategy():
    class UniformEstimator(BaseEstimator):
        method = "uniform"

        def estimate(self, cond, test):
            size = len(cond.categories)
            return OpinionDistribution(cond.categories, np.full(size, 1.0 / size), self.method)

    original = EstimatorFactory._estimators[EstimationMethod.BASELINE]
    try:
        EstimatorFactory.register_estimator(EstimationMethod.BASELINE, UniformEstimator)
        estimator = EstimatorFactory.create_estimator("baseline")
        result = estimator(matrix([[1.0, 0.0], [0.0, 1.0]]), encoded(["a"]))
        np.testing.assert_allclose(result.probs, [0.5, 0.5])
    finally:
        EstimatorFactory.register_estimator(EstimationMethod.BASELINE, original)


def test_inverse_estimator_reports_coverage():
    cond = matrix([[0.8, 0.1], [0.2, 0.9]])
    test = encoded(["a", "a", "b", "z"])
    result = InverseEstimator()(cond, test)
    assert result.method == "inverse"
    assert result.diagnostics.uncovered_mass == pytest.approx(0.25)
    assert result.diagnostics.n_docs == 3
    assert result.probs.sum() == pytest.approx(1.0)


def test_inverse_estimator_strict_coverage():
    cond = matrix([[0.8, 0.1], [0.2, 0.9]])
    estimator = InverseEstimator(EstimatorConfig(strict=True, max_uncovered=0.1))
    with pytest.raises(IsaError, match="uncovered mass"):
        estimator(cond, encoded(["a", "z"]))


def test_inverse_estimator_uses_ridge_from_config():
    cond = matrix([[0.5, 0.5], [0.5, 0.5]])
    test = encoded(["a", "b"])
    with pytest.raises(IsaError, match="rank-deficient"):
        InverseEstimator()(cond, test)
    result = InverseEstimator(EstimatorConfig(ridge=1e-8))(cond, test)
    np.testing.assert_allclose(result.probs, [0.5, 0.5], atol=1e-6)


def test_baseline_estimator_applies_priors_and_strictness():
    cond = matrix([[0.5, 0.5], [0.5, 0.5]])
    priors = OpinionDistribution(cond.categories, np.array([0.3, 0.7]), "prior")
    result = BaselineEstimator(priors=priors)(cond, encoded(["a", "b"]))
    np.testing.assert_allclose(result.probs, [0.0, 1.0])

    strict = BaselineEstimator(EstimatorConfig(strict=True, max_uncovered=0.1))
    with pytest.raises(IsaError, match="uncovered mass"):
        strict(cond, encoded(["a", "z"]))
