"""
Базовый класс для методов оценки с паттерном стратегия
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import replace
from typing import Optional

from ..config import EstimatorConfig
from ..isa import ConditionalStemMatrix, OpinionDistribution
from ..textproc import EncodedCorpus

logger = logging.getLogger(__name__)


class BaseEstimator(ABC):
    """Абстрактный базовый класс для методов оценки P(D)"""

    method = "base"

    def __init__(self, config: Optional[EstimatorConfig] = None, priors: Optional[OpinionDistribution] = None):
        self.config = config or EstimatorConfig()
        self.priors = priors

    @abstractmethod
    def estimate(self, cond: ConditionalStemMatrix, test: EncodedCorpus) -> OpinionDistribution:
        """
        Оценивает распределение мнений тестового корпуса

        Args:
            cond: Матрица P(S|D)
            test: Закодированный тестовый корпус

        Returns:
            Распределение мнений с диагностикой
        """

    def __call__(self, cond: ConditionalStemMatrix, test: EncodedCorpus) -> OpinionDistribution:
        return self.estimate(cond, test)

    @staticmethod
    def _with_coverage(distribution: OpinionDistribution, uncovered_mass: float, n_docs: int) -> OpinionDistribution:
        diagnostics = replace(distribution.diagnostics, uncovered_mass=uncovered_mass, n_docs=n_docs)
        return replace(distribution, diagnostics=diagnostics)
