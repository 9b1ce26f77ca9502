"""
Прямое обратное оценивание P(D) без классификации отдельных документов
"""
import logging

from ..isa import ConditionalStemMatrix, OpinionDistribution, estimate_inverse, vector_distribution
from ..textproc import EncodedCorpus
from .base_estimator import BaseEstimator

logger = logging.getLogger(__name__)


class InverseEstimator(BaseEstimator):
    """МНК-решение P(S|D)·P(D) ≈ P(S) с проекцией на симплекс"""

    method = "inverse"

    def estimate(self, cond: ConditionalStemMatrix, test: EncodedCorpus) -> OpinionDistribution:
        test_dist, uncovered_mass = vector_distribution(
            cond, test, strict=self.config.strict, max_uncovered=self.config.max_uncovered
        )
        distribution = estimate_inverse(cond, test_dist, ridge=self.config.ridge)
        covered = round(test.n_docs * (1.0 - uncovered_mass))
        diagnostics = distribution.diagnostics
        if diagnostics.projected:
            logger.debug(f"[isa] Проекция на симплекс, перенесённая масса {diagnostics.clipped_mass:.3g}")
        return self._with_coverage(distribution, uncovered_mass, covered)
