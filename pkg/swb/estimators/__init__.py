"""
Пакет методов оценки распределения мнений (паттерн стратегия)
"""
from .base_estimator import BaseEstimator
from .inverse_estimator import InverseEstimator
from .baseline_estimator import BaselineEstimator
from .estimator_factory import EstimatorFactory, EstimationMethod

__all__ = [
    'BaseEstimator',
    'InverseEstimator',
    'BaselineEstimator',
    'EstimatorFactory',
    'EstimationMethod'
]
