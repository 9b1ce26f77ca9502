"""
Фабрика методов оценки для выбора стратегии
"""
import logging
from enum import Enum
from typing import Dict, Optional, Type

from ..config import EstimatorConfig
from ..errors import IsaError
from ..isa import OpinionDistribution
from .base_estimator import BaseEstimator
from .baseline_estimator import BaselineEstimator
from .inverse_estimator import InverseEstimator

logger = logging.getLogger(__name__)


class EstimationMethod(Enum):
    """Методы оценки"""
    INVERSE = "inverse"
    BASELINE = "baseline"


class EstimatorFactory:
    """Фабрика для создания методов оценки"""

    _estimators: Dict[EstimationMethod, Type[BaseEstimator]] = {
        EstimationMethod.INVERSE: InverseEstimator,
        EstimationMethod.BASELINE: BaselineEstimator,
    }

    @classmethod
    def create_estimator(cls, method: EstimationMethod, config: Optional[EstimatorConfig] = None,
                         priors: Optional[OpinionDistribution] = None) -> BaseEstimator:
        """
        Создает метод оценки указанного типа

        Args:
            method: Тип метода (или его строковое имя)
            config: Настройки оценивания
            priors: Априорное распределение для базового метода

        Returns:
            Экземпляр метода оценки

        Raises:
            IsaError: Если метод не поддерживается
        """
        if isinstance(method, str):
            try:
                method = EstimationMethod(method)
            except ValueError as e:
                raise IsaError(f"unknown estimation method {method!r}") from e
        if method not in cls._estimators:
            raise IsaError(f"unsupported estimation method {method}")

        estimator_class = cls._estimators[method]
        logger.debug(f"Создание метода оценки: {method.value}")
        return estimator_class(config, priors)

    @classmethod
    def get_available_estimators(cls) -> list[EstimationMethod]:
        """Возвращает список доступных методов"""
        return list(cls._estimators.keys())

    @classmethod
    def register_estimator(cls, method: EstimationMethod, estimator_class: Type[BaseEstimator]) -> None:
        """
        Регистрирует новый метод оценки

        Args:
            method: Тип метода
            estimator_class: Класс метода
        """
        cls._estimators[method] = estimator_class
        logger.info(f"Зарегистрирован новый метод оценки: {method.value}")
