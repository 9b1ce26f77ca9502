"""
Синтетические корпуса и ряды с известной истиной.

Все случайные числа берутся из PortableRandom(seed, stream): номер потока
закреплён за каждой величиной, поэтому результат воспроизводим на любой платформе.
"""
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import SwbError, SynthError
from .file_utils import get_results_from_json, write_frame_csv
from .isa import CategorySet, Diagnostics, OpinionDistribution
from .leadlag import AsyncSeries
from .rng import PortableRandom
from .textproc import Document

logger = logging.getLogger(__name__)

MIXTURE_TOL = 1e-9

# потоки генератора корпуса
_TRAIN_LABELS, _TRAIN_STEMS, _TEST_LABELS, _TEST_STEMS, _STAMPS = range(5)
# потоки генератора рядов
_LATENT, _X_NOISE, _Y_NOISE, _X_THIN, _Y_THIN = range(5)


class CorpusSpec(BaseModel):
    """Параметры синтетического корпуса"""
    model_config = ConfigDict(extra="forbid")

    categories: List[str] = Field(min_length=2)
    mixture: List[float]
    train_mixture: Optional[List[float]] = None
    off_topic: Optional[str] = None
    stems_per_category: int = Field(2, ge=1)
    emission: Union[float, List[float]] = 0.5
    overlap: float = Field(0.0, ge=0.0, le=1.0)
    n_train: int = Field(1000, ge=1)
    n_test: int = Field(1000, ge=1)
    seed: int = Field(ge=0)
    days: Optional[int] = Field(None, ge=1)
    units: Optional[List[str]] = None
    start: date = date(2012, 1, 1)

    @model_validator(mode="after")
    def _check(self) -> "CorpusSpec":
        m = len(self.categories)
        if len(set(self.categories)) != m:
            raise ValueError("categories must be distinct")
        for name in ("mixture", "train_mixture"):
            values = getattr(self, name)
            if values is None:
                continue
            if len(values) != m:
                raise ValueError(f"{name} needs {m} entries")
            if any(v < 0 for v in values) or abs(sum(values) - 1.0) > MIXTURE_TOL:
                raise ValueError(f"{name} must lie on the simplex")
        emission = self.emission_by_category
        if len(emission) != m:
            raise ValueError(f"emission needs {m} entries")
        if any(not 0.0 < e <= 1.0 for e in emission):
            raise ValueError("emission probabilities must lie in (0, 1]")
        if self.units is not None and not self.units:
            raise ValueError("units must not be empty")
        return self

    @property
    def emission_by_category(self) -> List[float]:
        if isinstance(self.emission, list):
            return list(self.emission)
        return [float(self.emission)] * len(self.categories)

    @property
    def n_stems(self) -> int:
        return self.stems_per_category * len(self.categories)


class SeriesSpec(BaseModel):
    """Параметры синтетической пары рядов с известным запаздыванием"""
    model_config = ConfigDict(extra="forbid")

    process: Literal["random_walk", "seasonal"] = "random_walk"
    lag: int = 0
    x_sampling: Literal["daily", "weekly", "poisson"] = "daily"
    y_sampling: Literal["daily", "weekly", "poisson"] = "daily"
    thinning_rate: float = Field(0.5, gt=0.0, le=1.0)
    noise: float = Field(0.0, ge=0.0)
    x_noise: float = Field(0.0, ge=0.0)
    length: int = Field(500, ge=2)
    seed: int = Field(ge=0)
    season_period: float = Field(365.0, gt=0.0)
    amplitude: float = 1.0
    start: date = date(2012, 1, 1)


def load_spec(path: Union[str, Path], model):
    """Читает и проверяет JSON-описание генератора"""
    try:
        data = get_results_from_json(path)
    except SwbError as e:
        raise SynthError(str(e)) from e
    try:
        return model(**data)
    except (ValidationError, TypeError) as e:
        raise SynthError(f"{path}: invalid {model.__name__}: {e}") from e


@dataclass(frozen=True)
class SyntheticCorpus:
    train: List[Document]
    test: List[Document]
    truth: OpinionDistribution
    nominal: Tuple[float, ...]
    stems: Tuple[str, ...]

    def truth_record(self) -> Dict:
        return {
            "categories": list(self.truth.names),
            "truth": self.truth.as_dict(),
            "nominal": dict(zip(self.truth.names, self.nominal)),
            "n_train": len(self.train),
            "n_test": len(self.test),
        }


def _stem_probabilities(spec: CorpusSpec) -> np.ndarray:
    """Матрица M x L вероятностей активации основ"""
    m, per = len(spec.categories), spec.stems_per_category
    emission = np.asarray(spec.emission_by_category)
    owner = np.repeat(np.arange(m), per)
    own = owner[None, :] == np.arange(m)[:, None]
    return np.where(own, 1.0, spec.overlap) * emission[:, None]


def _draw_documents(spec: CorpusSpec, probs: np.ndarray, labels: np.ndarray, rng: PortableRandom,
                    stems: Tuple[str, ...]) -> List[List[str]]:
    per = spec.stems_per_category
    active = rng.uniform((labels.size, len(stems))) < probs[labels]
    texts = []
    for row, label in zip(active, labels):
        own = slice(label * per, (label + 1) * per)
        if spec.overlap == 0 and not row[own].any():
            row[label * per + int(rng.integers(per, 1)[0])] = True
        texts.append([stems[i] for i in np.flatnonzero(row)])
    return texts


def gen_corpus(spec: CorpusSpec) -> SyntheticCorpus:
    """
    Генерирует размеченный обучающий и неразмеченный тестовый корпуса

    Основа принадлежит одной категории; документ категории c включает свою основу
    с вероятностью emission[c], чужую - с вероятностью overlap·emission[c].
    При overlap = 0 у документа всегда есть хотя бы одна своя основа.

    Args:
        spec: Параметры корпуса

    Returns:
        Корпуса и реализованное распределение категорий тестового корпуса
    """
    cats = CategorySet(tuple(spec.categories), spec.off_topic)
    stems = tuple(f"t{i:03d}" for i in range(spec.n_stems))
    probs = _stem_probabilities(spec)
    train_mixture = spec.train_mixture or spec.mixture

    train_labels = PortableRandom(spec.seed, _TRAIN_LABELS).categorical(train_mixture, spec.n_train)
    train_texts = _draw_documents(spec, probs, train_labels, PortableRandom(spec.seed, _TRAIN_STEMS), stems)
    test_labels = PortableRandom(spec.seed, _TEST_LABELS).categorical(spec.mixture, spec.n_test)
    test_texts = _draw_documents(spec, probs, test_labels, PortableRandom(spec.seed, _TEST_STEMS), stems)

    train = [
        Document(id=f"train-{i:06d}", text=" ".join(words), label=spec.categories[label])
        for i, (words, label) in enumerate(zip(train_texts, train_labels))
    ]

    stamps: List[Tuple[Optional[datetime], Optional[str]]] = [(None, None)] * spec.n_test
    if spec.days is not None:
        rng = PortableRandom(spec.seed, _STAMPS)
        days = rng.integers(spec.days, spec.n_test)
        units = spec.units or ["all"]
        unit_index = rng.integers(len(units), spec.n_test)
        origin = datetime.combine(spec.start, datetime.min.time())
        stamps = [(origin + timedelta(days=int(d)), units[u]) for d, u in zip(days, unit_index)]
    test = [
        Document(id=f"test-{i:06d}", text=" ".join(words), label=None, timestamp=ts, unit=unit)
        for i, (words, (ts, unit)) in enumerate(zip(test_texts, stamps))
    ]

    counts = np.bincount(test_labels, minlength=len(cats)).astype(float)
    truth = OpinionDistribution(categories=cats, probs=counts / counts.sum(), method="truth",
                                diagnostics=Diagnostics(n_docs=spec.n_test))
    logger.info(f"[synth] Корпус: {spec.n_train} обучающих, {spec.n_test} тестовых документов, "
                f"L={len(stems)}, overlap={spec.overlap}, seed={spec.seed}")
    return SyntheticCorpus(train=train, test=test, truth=truth, nominal=tuple(spec.mixture), stems=stems)


@dataclass(frozen=True)
class SyntheticPair:
    x: AsyncSeries
    y: AsyncSeries
    true_lag: float
    start: date

    def truth_record(self) -> Dict:
        return {"lag": self.true_lag, "n_x": len(self.x), "n_y": len(self.y), "start": self.start.isoformat()}


def _latent(spec: SeriesSpec, days: np.ndarray) -> np.ndarray:
    rng = PortableRandom(spec.seed, _LATENT)
    shocks = rng.normal(days.size)
    if spec.process == "random_walk":
        return np.cumsum(shocks)
    return spec.amplitude * np.sin(2.0 * np.pi * days / spec.season_period) + shocks


def _sampled_days(scheme: str, length: int, rate: float, rng: PortableRandom) -> np.ndarray:
    days = np.arange(length)
    if scheme == "daily":
        return days
    if scheme == "weekly":
        weekly = days[days % 7 == 6]
        if weekly.size < 2:
            raise SynthError(f"length {length} gives fewer than two weekly observations")
        return weekly
    u = rng.uniform(length)
    kept = days[u < rate]
    if kept.size < 2:
        kept = np.sort(np.argsort(u, kind="stable")[:2])
    return kept


def gen_lagged_pair(spec: SeriesSpec) -> SyntheticPair:
    """
    Генерирует пару x_t = L(t) (+ шум), y_t = L(t - lag) + шум, каждый ряд на своей сетке

    Положительный lag означает, что x опережает y.

    Args:
        spec: Параметры пары

    Returns:
        Ряды (время - дни от start) и истинное запаздывание
    """
    lo = min(0, -spec.lag)
    hi = max(spec.length - 1, spec.length - 1 - spec.lag)
    grid = np.arange(lo, hi + 1)
    latent = _latent(spec, grid.astype(float))

    def at(days: np.ndarray) -> np.ndarray:
        return latent[days - lo]

    x_days = _sampled_days(spec.x_sampling, spec.length, spec.thinning_rate, PortableRandom(spec.seed, _X_THIN))
    y_days = _sampled_days(spec.y_sampling, spec.length, spec.thinning_rate, PortableRandom(spec.seed, _Y_THIN))

    x_values = at(x_days)
    if spec.x_noise > 0:
        x_values = x_values + spec.x_noise * PortableRandom(spec.seed, _X_NOISE).normal(x_days.size)
    y_values = at(y_days - spec.lag)
    if spec.noise > 0:
        y_values = y_values + spec.noise * PortableRandom(spec.seed, _Y_NOISE).normal(y_days.size)

    logger.debug(f"[synth] Пара рядов: lag={spec.lag}, x={spec.x_sampling}/{x_days.size}, "
                 f"y={spec.y_sampling}/{y_days.size}, seed={spec.seed}")
    return SyntheticPair(
        x=AsyncSeries(x_days.astype(float), x_values, "x"),
        y=AsyncSeries(y_days.astype(float), y_values, "y"),
        true_lag=float(spec.lag),
        start=spec.start,
    )


def series_frame(series: AsyncSeries, start: date) -> pd.DataFrame:
    """Ряд в виде таблицы ts,value (время - дни от start)"""
    origin = pd.Timestamp(start)
    stamps = origin + pd.to_timedelta(series.times, unit="D")
    whole_days = np.all(series.times == np.floor(series.times))
    labels = [s.date().isoformat() if whole_days else s.isoformat() for s in stamps]
    return pd.DataFrame({"ts": labels, "value": series.values})


def write_series_csv(series: AsyncSeries, path: Union[str, Path], start: date) -> Path:
    return write_frame_csv(series_frame(series, start), path)
