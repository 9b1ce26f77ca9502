"""
Оценка агрегированного распределения мнений P(D).

Два пути: классификация каждого документа с последующим подсчётом (базовый метод)
и прямое обратное оценивание из P(S) = P(S|D)·P(D) без классификации документов.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from .errors import IsaError, UncoveredCorpusError
from .rng import PortableRandom
from .textproc import Document, EncodedCorpus

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9
COLUMN_TOL = 1e-12
MIN_BOOTSTRAP = 100
MAX_UNCOVERED = 0.05
GRANULARITIES = ("day", "month", "year")
DEFAULT_UNIT = "all"


@dataclass(frozen=True)
class CategorySet:
    """
    Упорядоченный набор категорий D0..DM.

    off_topic - категория D0 (шум, не по теме); по умолчанию первая в списке.
    """
    categories: Tuple[str, ...]
    off_topic: Optional[str] = None

    def __post_init__(self):
        categories = tuple(self.categories)
        object.__setattr__(self, "categories", categories)
        if len(categories) < 2:
            raise IsaError("category set needs at least two categories")
        if len(set(categories)) != len(categories):
            raise IsaError(f"duplicate categories in {list(categories)}")
        if self.off_topic is None:
            object.__setattr__(self, "off_topic", categories[0])
        elif self.off_topic not in categories:
            raise IsaError(f"off-topic category {self.off_topic!r} is not in {list(categories)}")

    def __len__(self) -> int:
        return len(self.categories)

    def index(self, category: str) -> int:
        return self.categories.index(category)

    @property
    def on_topic(self) -> Tuple[str, ...]:
        return tuple(c for c in self.categories if c != self.off_topic)


@dataclass(frozen=True)
class Diagnostics:
    """Диагностика оценки"""
    residual: float = 0.0
    condition: float = 1.0
    rank: int = 0
    clipped_mass: float = 0.0
    uncovered_mass: float = 0.0
    n_docs: int = 0
    projected: bool = False

    def to_dict(self) -> Dict[str, float]:
        return {
            "residual": self.residual,
            "condition": self.condition,
            "rank": self.rank,
            "clipped_mass": self.clipped_mass,
            "uncovered_mass": self.uncovered_mass,
            "n_docs": self.n_docs,
            "projected": self.projected,
        }


@dataclass(frozen=True, eq=False)
class OpinionDistribution:
    """Точка на симплексе над категориями"""
    categories: CategorySet
    probs: np.ndarray
    method: str
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        names = self.names
        if probs.shape != (len(names),):
            raise IsaError(f"expected {len(names)} probabilities, got shape {probs.shape}")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > SIMPLEX_TOL:
            raise IsaError(f"probabilities are not on the simplex: {probs.tolist()}")

    @property
    def names(self) -> Tuple[str, ...]:
        """Категории, по которым задано распределение"""
        return self.labels if self.labels is not None else self.categories.categories

    def as_dict(self) -> Dict[str, float]:
        return {name: float(p) for name, p in zip(self.names, self.probs)}

    def on_topic(self) -> "OpinionDistribution":
        """
        Перенормирует распределение на категории, отличные от D0

        Returns:
            Распределение по тематическим категориям
        """
        keep = [i for i, name in enumerate(self.names) if name != self.categories.off_topic]
        mass = self.probs[keep].sum()
        if mass <= 0:
            raise IsaError("no on-topic mass to renormalize")
        return replace(self, probs=self.probs[keep] / mass, labels=tuple(self.names[i] for i in keep))


@dataclass(frozen=True, eq=False)
class ConditionalStemMatrix:
    """
    Матрица P(S|D): строка - уникальный вектор основ обучающего корпуса,
    столбец - категория; столбец c - распределение векторов среди документов с меткой c.
    """
    values: np.ndarray
    row_keys: Tuple[Tuple[int, ...], ...]
    categories: CategorySet
    counts: Tuple[int, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.row_keys), len(self.categories)):
            raise IsaError(f"matrix shape {values.shape} does not match "
                           f"{len(self.row_keys)} rows x {len(self.categories)} categories")
        if np.any(values < 0) or np.any(values > 1):
            raise IsaError("conditional probabilities must lie in [0, 1]")
        sums = values.sum(axis=0)
        bad = [c for c, s in zip(self.categories.categories, sums) if abs(s - 1.0) > COLUMN_TOL]
        if bad:
            raise IsaError(f"columns do not sum to 1 for {bad}")

    @property
    def n_rows(self) -> int:
        return len(self.row_keys)

    def row_index(self) -> Dict[Tuple[int, ...], int]:
        return {key: i for i, key in enumerate(self.row_keys)}


def _labeled(train: EncodedCorpus, cats: CategorySet) -> Tuple[np.ndarray, np.ndarray]:
    """Индексы уникальных векторов и категорий всех размеченных документов"""
    vec_idx, lab_idx = [], []
    for doc_id in train.doc_ids:
        label = train.labels.get(doc_id)
        if label is None:
            continue
        if label not in cats.categories:
            raise IsaError(f"label {label!r} of document {doc_id!r} is not in {list(cats.categories)}")
        vec_idx.append(train.assignment[doc_id])
        lab_idx.append(cats.index(label))
    return np.asarray(vec_idx, dtype=np.int64), np.asarray(lab_idx, dtype=np.int64)


def _matrix_from_counts(counts: np.ndarray, train: EncodedCorpus, cats: CategorySet) -> ConditionalStemMatrix:
    totals = counts.sum(axis=0)
    missing = [c for c, n in zip(cats.categories, totals) if n == 0]
    if missing:
        raise IsaError(f"no training documents for {missing[0]}")
    rows = np.flatnonzero(counts.sum(axis=1) > 0)
    values = counts[rows] / totals
    return ConditionalStemMatrix(
        values=values,
        row_keys=tuple(train.unique_vectors[i].indices for i in rows),
        categories=cats,
        counts=tuple(int(n) for n in totals),
    )


def estimate_conditional(train: EncodedCorpus, cats: CategorySet) -> ConditionalStemMatrix:
    """
    Оценивает матрицу P(S|D) по размеченным документам обучающего корпуса

    Args:
        train: Закодированный обучающий корпус
        cats: Набор категорий

    Returns:
        Матрица условных вероятностей (строки - векторы, встретившиеся в разметке)
    """
    vec_idx, lab_idx = _labeled(train, cats)
    counts = np.zeros((len(train.unique_vectors), len(cats)), dtype=float)
    np.add.at(counts, (vec_idx, lab_idx), 1.0)
    cond = _matrix_from_counts(counts, train, cats)
    logger.info(f"[isa] P(S|D): {cond.n_rows} векторов x {len(cats)} категорий, "
                f"размечено {len(vec_idx)} документов")
    return cond


def training_priors(train: EncodedCorpus, cats: CategorySet) -> OpinionDistribution:
    """Доли категорий среди размеченных обучающих документов"""
    _, lab_idx = _labeled(train, cats)
    if lab_idx.size == 0:
        raise IsaError("no labeled training documents")
    counts = np.bincount(lab_idx, minlength=len(cats)).astype(float)
    return OpinionDistribution(
        categories=cats,
        probs=counts / counts.sum(),
        method="prior",
        diagnostics=Diagnostics(n_docs=int(lab_idx.size)),
    )


def vector_distribution(cond: ConditionalStemMatrix, test: EncodedCorpus, strict: bool = False,
                        max_uncovered: float = MAX_UNCOVERED) -> Tuple[np.ndarray, float]:
    """
    Выравнивает тестовый корпус по строкам P(S|D)

    Векторы, которых нет в обучающей разметке, отбрасываются, P(S) перенормируется.

    Args:
        cond: Матрица P(S|D)
        test: Закодированный тестовый корпус
        strict: Ошибка, если непокрытая масса больше max_uncovered
        max_uncovered: Порог непокрытой массы

    Returns:
        (P(S) по строкам матрицы, непокрытая масса)
    """
    rows = cond.row_index()
    counts = np.zeros(cond.n_rows, dtype=float)
    uncovered = 0
    for vector in test.unique_vectors:
        row = rows.get(vector.indices)
        if row is None:
            uncovered += vector.multiplicity
        else:
            counts[row] += vector.multiplicity

    total = counts.sum() + uncovered
    if total == 0:
        raise UncoveredCorpusError("empty test corpus")
    if counts.sum() == 0:
        raise UncoveredCorpusError("no test documents share a stem vector with the training set")

    uncovered_mass = uncovered / total
    if uncovered_mass > 0:
        logger.debug(f"[isa] Непокрытая масса тестового корпуса: {uncovered_mass:.4f}")
    if uncovered_mass > max_uncovered:
        if strict:
            raise IsaError(f"uncovered mass {uncovered_mass:.4f} exceeds {max_uncovered}")
        # перенормировка сдвигает оценку, если категории покрыты неравномерно
        logger.warning(f"[isa] Непокрытая масса {uncovered_mass:.4f} больше порога {max_uncovered}, "
                       f"оценка может быть смещена")
    return counts / counts.sum(), float(uncovered_mass)


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Евклидова проекция вектора на вероятностный симплекс"""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - cssv / ks > 0)[-1]
    theta = cssv[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def estimate_inverse(cond: ConditionalStemMatrix, test_dist: np.ndarray,
                     ridge: Optional[float] = None) -> OpinionDistribution:
    """
    Прямое обратное оценивание: МНК-решение P(S|D)·p ≈ P(S) и проекция на симплекс

    Args:
        cond: Матрица P(S|D), K x M'
        test_dist: P(S) по строкам матрицы
        ridge: Параметр гребневой регуляризации при ранговой неполноте (None - ошибка)

    Returns:
        Распределение мнений с диагностикой
    """
    a = cond.values
    b = np.asarray(test_dist, dtype=float)
    k, m = a.shape
    if b.shape != (k,):
        raise IsaError(f"test distribution has shape {b.shape}, expected ({k},)")
    if abs(b.sum() - 1.0) > SIMPLEX_TOL or np.any(b < 0):
        raise IsaError("test distribution must be a probability vector")
    if k < m:
        raise IsaError(f"conditional matrix has {k} rows for {m} categories")

    singular = linalg.svd(a, compute_uv=False)
    tol = singular[0] * max(k, m) * np.finfo(float).eps
    rank = int(np.sum(singular > tol))
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else float("inf")

    if rank < m:
        if ridge is None:
            raise IsaError("conditional matrix rank-deficient")
        logger.warning(f"[isa] Ранг P(S|D) = {rank} < {m}, гребневая поправка lambda={ridge:g}")
        a_fit = np.vstack([a, np.sqrt(ridge) * np.eye(m)])
        b_fit = np.concatenate([b, np.zeros(m)])
    else:
        a_fit, b_fit = a, b

    raw, _, _, _ = linalg.lstsq(a_fit, b_fit, lapack_driver="gelsd")
    residual = float(np.linalg.norm(a @ raw - b))

    if np.all(raw >= 0) and abs(raw.sum() - 1.0) <= COLUMN_TOL:
        probs, projected = raw / raw.sum(), False
    else:
        probs, projected = project_to_simplex(raw), True
    clipped = float(np.abs(probs - raw).sum()) if projected else 0.0

    return OpinionDistribution(
        categories=cond.categories,
        probs=probs,
        method="inverse",
        diagnostics=Diagnostics(
            residual=residual,
            condition=condition,
            rank=rank,
            clipped_mass=clipped,
            projected=projected,
        ),
    )


def classify_baseline(cond: ConditionalStemMatrix, test: EncodedCorpus,
                      priors: Optional[OpinionDistribution] = None
                      ) -> Tuple[Dict[str, Optional[str]], OpinionDistribution]:
    """
    Базовый метод: каждый документ относится к argmax P(s|D)·prior(D), затем подсчёт

    При равенстве побеждает категория с меньшим индексом. Документы с векторами,
    которых нет в обучающей разметке, не классифицируются (категория None).

    Args:
        cond: Матрица P(S|D)
        test: Закодированный тестовый корпус
        priors: Априорное распределение (None - равномерное)

    Returns:
        (категория каждого документа, агрегированное распределение)
    """
    cats = cond.categories
    prior = np.full(len(cats), 1.0 / len(cats)) if priors is None else priors.probs
    winners = np.argmax(cond.values * prior, axis=1)
    rows = cond.row_index()

    counts = np.zeros(len(cats), dtype=float)
    vector_category: List[Optional[int]] = []
    uncovered = 0
    for vector in test.unique_vectors:
        row = rows.get(vector.indices)
        if row is None:
            vector_category.append(None)
            uncovered += vector.multiplicity
        else:
            vector_category.append(int(winners[row]))
            counts[winners[row]] += vector.multiplicity

    if counts.sum() == 0:
        raise UncoveredCorpusError("no test documents share a stem vector with the training set")

    assigned = {}
    for doc_id, vector_index in test.assignment.items():
        category = vector_category[vector_index]
        assigned[doc_id] = cats.categories[category] if category is not None else None

    covered = counts.sum()
    distribution = OpinionDistribution(
        categories=cats,
        probs=counts / covered,
        method="baseline",
        diagnostics=Diagnostics(
            rank=int(np.linalg.matrix_rank(cond.values)),
            uncovered_mass=uncovered / (covered + uncovered),
            n_docs=int(covered),
        ),
    )
    return assigned, distribution


class _CategoryLost(Exception):
    """Бутстреп-выборка потеряла все документы какой-то категории"""


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Перцентильные интервалы (2.5%, 97.5%) и стандартные отклонения по категориям"""
    categories: CategorySet
    lower: np.ndarray
    upper: np.ndarray
    sd: np.ndarray
    n_boot: int
    seed: int
    redraws: int = 0
    labels: Tuple[str, ...] = ()

    @property
    def names(self) -> Tuple[str, ...]:
        return self.labels or self.categories.categories

    def intervals(self) -> Dict[str, List[float]]:
        return {c: [float(lo), float(hi)] for c, lo, hi in zip(self.names, self.lower, self.upper)}

    def sds(self) -> Dict[str, float]:
        return {c: float(s) for c, s in zip(self.names, self.sd)}


Estimate = Callable[[ConditionalStemMatrix, EncodedCorpus], OpinionDistribution]


def _default_estimate(cond: ConditionalStemMatrix, test: EncodedCorpus) -> OpinionDistribution:
    test_dist, _ = vector_distribution(cond, test)
    return estimate_inverse(cond, test_dist)


def bootstrap_ci(train: EncodedCorpus, test: EncodedCorpus, cats: CategorySet, n_boot: int, seed: int,
                 estimate: Optional[Estimate] = None, jobs: int = 1, max_redraws: int = 50,
                 on_topic: bool = False) -> BootstrapResult:
    """
    Бутстреп-интервалы: размеченные обучающие документы выбираются с возвращением
    n_boot раз, для каждой выборки P(S|D) и оценка пересчитываются

    Выборка, потерявшая все документы категории, перевыбирается из того же потока
    (не более max_redraws попыток).

    Args:
        train: Обучающий корпус
        test: Тестовый корпус
        cats: Набор категорий
        n_boot: Число бутстреп-повторов (не меньше 100)
        seed: Зерно; повтор b использует поток (seed, b)
        estimate: Функция оценки (cond, test) -> распределение; по умолчанию обратная оценка
        jobs: Число потоков
        max_redraws: Предел перевыборок одного повтора
        on_topic: Интервалы для распределения, перенормированного без D0

    Returns:
        Интервалы и стандартные отклонения
    """
    if n_boot < MIN_BOOTSTRAP:
        raise IsaError(f"bootstrap needs at least {MIN_BOOTSTRAP} replicates, got {n_boot}")
    if seed is None:
        raise IsaError("bootstrap requires an explicit seed")
    estimate = estimate or _default_estimate

    vec_idx, lab_idx = _labeled(train, cats)
    if vec_idx.size == 0:
        raise IsaError("no labeled training documents")
    n_vectors, n_cats = len(train.unique_vectors), len(cats)
    # проверка исходной разметки: пустая категория - ошибка сразу, а не после перевыборок
    estimate_conditional(train, cats)

    def replicate(b: int) -> Tuple[np.ndarray, int]:
        rng = PortableRandom(seed, stream=b)
        attempts = 0

        def draw() -> ConditionalStemMatrix:
            nonlocal attempts
            attempts += 1
            picks = rng.integers(vec_idx.size, vec_idx.size)
            flat = np.bincount(vec_idx[picks] * n_cats + lab_idx[picks], minlength=n_vectors * n_cats)
            counts = flat.reshape(n_vectors, n_cats).astype(float)
            if np.any(counts.sum(axis=0) == 0):
                raise _CategoryLost()
            return _matrix_from_counts(counts, train, cats)

        retrying = Retrying(
            stop=stop_after_attempt(max_redraws),
            retry=retry_if_exception_type(_CategoryLost),
            reraise=True,
        )
        try:
            cond = retrying(draw)
        except (_CategoryLost, RetryError) as e:
            raise IsaError(f"bootstrap replicate {b} lost a category {max_redraws} times in a row") from e
        distribution = estimate(cond, test)
        if on_topic:
            distribution = distribution.on_topic()
        return distribution.probs, attempts - 1

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            outcomes = list(executor.map(replicate, range(n_boot)))
    else:
        outcomes = [replicate(b) for b in range(n_boot)]

    estimates = np.vstack([probs for probs, _ in outcomes])
    redraws = sum(extra for _, extra in outcomes)
    lower, upper = np.percentile(estimates, [2.5, 97.5], axis=0)
    sd = estimates.std(axis=0, ddof=1)
    if redraws:
        logger.info(f"[isa] Бутстреп: {redraws} перевыборок из-за потерянных категорий")
    logger.info(f"[isa] Бутстреп: {n_boot} повторов, seed={seed}, потоков={jobs}")
    return BootstrapResult(categories=cats, lower=lower, upper=upper, sd=sd, n_boot=n_boot, seed=seed,
                           redraws=redraws, labels=cats.on_topic if on_topic else ())


@dataclass(frozen=True)
class CellEstimate:
    """Оценка для ячейки (период, единица)"""
    period: str
    unit: str
    distribution: OpinionDistribution


def period_label(timestamp, granularity: str) -> str:
    """Метка периода: день (ISO-дата), месяц (ГГГГ-ММ) или год"""
    if granularity not in GRANULARITIES:
        raise IsaError(f"unknown granularity {granularity!r}")
    freq = {"day": "D", "month": "M", "year": "Y"}[granularity]
    stamp = pd.Timestamp(timestamp)
    if stamp.tzinfo is not None:
        stamp = stamp.tz_convert("UTC").tz_localize(None)
    return str(stamp.to_period(freq))


def estimate_cells(cond: ConditionalStemMatrix, test_docs: Sequence[Document], test: EncodedCorpus,
                   granularity: str, estimate: Optional[Estimate] = None) -> List[CellEstimate]:
    """
    Оценки по ячейкам (период, единица) тестового корпуса

    Args:
        cond: Матрица P(S|D)
        test_docs: Тестовые документы (метки времени и единицы)
        test: Закодированный тестовый корпус
        granularity: day, month или year
        estimate: Функция оценки (по умолчанию обратная оценка)

    Returns:
        Оценки в порядке (период, единица)
    """
    estimate = estimate or _default_estimate
    cells: Dict[Tuple[str, str], List[str]] = {}
    for doc in test_docs:
        if doc.timestamp is None:
            raise IsaError(f"document {doc.id!r} has no timestamp")
        key = (period_label(doc.timestamp, granularity), doc.unit or DEFAULT_UNIT)
        cells.setdefault(key, []).append(doc.id)

    results = []
    skipped = 0
    for period, unit in sorted(cells):
        try:
            distribution = estimate(cond, test.subset(cells[(period, unit)]))
        except UncoveredCorpusError:
            logger.warning(f"[cell {period}/{unit}] Нет документов с векторами из обучающей разметки, пропуск")
            skipped += 1
            continue
        results.append(CellEstimate(period=period, unit=unit, distribution=distribution))

    logger.info(f"[isa] Ячеек оценено: {len(results)}, пропущено: {skipped}")
    return results
