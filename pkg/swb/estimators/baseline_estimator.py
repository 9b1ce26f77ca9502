"""
Базовый метод: классификация каждого документа и подсчёт долей
"""
import logging

from ..errors import IsaError
from ..isa import ConditionalStemMatrix, OpinionDistribution, classify_baseline
from ..textproc import EncodedCorpus
from .base_estimator import BaseEstimator

logger = logging.getLogger(__name__)


class BaselineEstimator(BaseEstimator):
    """argmax P(s|D)·prior(D) для каждого документа, затем агрегирование"""

    method = "baseline"

    def estimate(self, cond: ConditionalStemMatrix, test: EncodedCorpus) -> OpinionDistribution:
        _, distribution = classify_baseline(cond, test, priors=self.priors)
        uncovered_mass = distribution.diagnostics.uncovered_mass
        if self.config.strict and uncovered_mass > self.config.max_uncovered:
            raise IsaError(f"uncovered mass {uncovered_mass:.4f} exceeds {self.config.max_uncovered}")
        return distribution
