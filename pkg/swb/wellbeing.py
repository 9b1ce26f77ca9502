"""
Индекс социального благополучия: восемь компонент и их среднее
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import SwbError, WellbeingError
from .file_utils import get_results_from_json, read_frame_csv, write_frame_csv

logger = logging.getLogger(__name__)

POLARITY_TOL = 1e-9
NEUTRAL_SCORE = 50.0
PERIODS = ("month", "year")


class ComponentCode(Enum):
    """Компоненты индекса в каноническом порядке"""
    EMO = "emo"  # эмоциональное благополучие
    SAT = "sat"  # удовлетворённость жизнью
    VIT = "vit"  # жизненная энергия
    RES = "res"  # устойчивость и самооценка
    FUN = "fun"  # позитивное функционирование
    TRU = "tru"  # доверие и принадлежность
    REL = "rel"  # отношения
    WOR = "wor"  # качество работы

    @classmethod
    def parse(cls, value: Union[str, "ComponentCode"]) -> "ComponentCode":
        if isinstance(value, ComponentCode):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as e:
            raise WellbeingError(f"unknown component {value!r}") from e


COMPONENTS: Tuple[ComponentCode, ...] = tuple(ComponentCode)
PANEL_COMPONENTS: Tuple[str, ...] = tuple(sorted(c.value for c in ComponentCode))
PANEL_COLUMNS: Tuple[str, ...] = ("period", "unit", *PANEL_COMPONENTS, "swbi", "n_docs", "unpolarized")
# компоненты без поляризованной массы (оценка 50), через ";"
UNPOLARIZED_SEP = ";"


@dataclass(frozen=True)
class PolarityDistribution:
    """Доли кодов -1, 0, +1 для одной компоненты"""
    p_neg: float
    p_neu: float
    p_pos: float
    n_docs: int = 0

    def __post_init__(self):
        values = (self.p_neg, self.p_neu, self.p_pos)
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise WellbeingError(f"polarity probabilities must be nonnegative: {values}")
        if abs(sum(values) - 1.0) > POLARITY_TOL:
            raise WellbeingError(f"polarity probabilities must sum to 1: {values}")

    @property
    def polarized(self) -> float:
        return self.p_neg + self.p_pos

    @classmethod
    def from_probs(cls, probs: Mapping[str, float], tags: Sequence[str] = ("-1", "0", "1"),
                   n_docs: int = 0) -> "PolarityDistribution":
        """
        Строит распределение полярности из оценки по категориям

        Категории вне tags (например, не по теме) отбрасываются, остаток перенормируется.

        Args:
            probs: Вероятности по категориям
            tags: Метки кодов -1, 0, +1
            n_docs: Число документов в оценке

        Returns:
            Распределение полярности
        """
        neg_tag, neu_tag, pos_tag = tags
        missing = [tag for tag in tags if tag not in probs]
        if missing:
            raise WellbeingError(f"polarity tags {missing} missing from {sorted(probs)}")
        values = [float(probs[neg_tag]), float(probs[neu_tag]), float(probs[pos_tag])]
        total = sum(values)
        if total <= 0:
            raise WellbeingError("no on-topic mass in the estimate")
        return cls(*(v / total for v in values), n_docs=n_docs)


def component_score(d: PolarityDistribution) -> float:
    """
    Доля положительных среди поляризованных документов, x100

    Args:
        d: Распределение полярности

    Returns:
        Значение в [0, 100]; 50, если поляризованной массы нет
    """
    if d.polarized <= 0:
        return NEUTRAL_SCORE
    return 100.0 * d.p_pos / d.polarized


def compose_swbi(scores: Union[Mapping, Sequence[float]]) -> float:
    """
    Среднее арифметическое восьми компонент

    Args:
        scores: Словарь компонента -> значение или восемь значений в каноническом порядке

    Returns:
        Значение индекса
    """
    if isinstance(scores, Mapping):
        values = {ComponentCode.parse(key): value for key, value in scores.items()}
        missing = [c.value for c in COMPONENTS if values.get(c) is None]
        if missing:
            raise WellbeingError(f"missing components: {', '.join(missing)}")
        ordered = [float(values[c]) for c in COMPONENTS]
    else:
        ordered = [float(v) for v in scores]
        if len(ordered) != len(COMPONENTS):
            missing = [c.value for c in COMPONENTS[len(ordered):]]
            raise WellbeingError(f"expected {len(COMPONENTS)} component scores, got {len(ordered)}"
                                 + (f"; missing components: {', '.join(missing)}" if missing else ""))
    out_of_range = [v for v in ordered if not 0.0 <= v <= 100.0]
    if out_of_range:
        raise WellbeingError(f"component scores must lie in [0, 100]: {out_of_range}")
    return math.fsum(ordered) / len(ordered)


def integrate_period(daily: pd.Series, period: str = "month", average: bool = False) -> pd.DataFrame:
    """
    Интегральное значение по календарным периодам: сумма доступных дневных значений

    Args:
        daily: Дневной ряд с индексом дат
        period: month или year
        average: Вернуть средние за день вместо сумм

    Returns:
        Таблица period, value, count (пустые периоды опущены)
    """
    if period not in PERIODS:
        raise WellbeingError(f"unknown period {period!r}")
    series = pd.Series(daily, dtype=float).dropna()
    if series.empty:
        raise WellbeingError("daily series is empty")
    index = pd.DatetimeIndex(pd.to_datetime(series.index))
    if index.tz is not None:
        index = index.tz_convert("UTC").tz_localize(None)
    labels = index.to_period("M" if period == "month" else "Y").astype(str)

    grouped = pd.Series(series.to_numpy(), index=labels).groupby(level=0, sort=True)
    frame = pd.DataFrame({
        "period": grouped.sum().index,
        "value": grouped.mean().to_numpy() if average else grouped.sum().to_numpy(),
        "count": grouped.size().to_numpy(),
    })
    return frame.reset_index(drop=True)


@dataclass(frozen=True)
class PanelRow:
    """Строка панели: период, единица, восемь компонент и индекс"""
    period: str
    unit: str
    scores: Dict[str, Optional[float]]
    swbi: Optional[float]
    n_docs: int = 0
    unpolarized: Tuple[str, ...] = ()

    @property
    def complete(self) -> bool:
        return self.swbi is not None


@dataclass(frozen=True)
class WellBeingPanel:
    """Панель (период, единица) -> компоненты и индекс"""
    rows: Tuple[PanelRow, ...] = field(default_factory=tuple)

    def complete_rows(self) -> List[PanelRow]:
        return [row for row in self.rows if row.complete]

    def to_frame(self) -> pd.DataFrame:
        records = [
            {"period": row.period, "unit": row.unit, **row.scores, "swbi": row.swbi, "n_docs": row.n_docs,
             "unpolarized": UNPOLARIZED_SEP.join(row.unpolarized)}
            for row in self.rows
        ]
        frame = pd.DataFrame.from_records(records, columns=list(PANEL_COLUMNS))
        for column in (*PANEL_COMPONENTS, "swbi"):
            frame[column] = frame[column].astype(float)
        frame["n_docs"] = frame["n_docs"].astype(int)
        return frame

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_frame_csv(self.to_frame(), path)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "WellBeingPanel":
        """Строит панель из таблицы; столбец unpolarized необязателен"""
        missing = [column for column in PANEL_COLUMNS if column not in frame.columns and column != "unpolarized"]
        if missing:
            raise WellbeingError(f"panel is missing columns {missing}")
        rows = []
        for record in frame.to_dict(orient="records"):
            scores = {c: (None if pd.isna(record[c]) else float(record[c])) for c in PANEL_COMPONENTS}
            swbi = None if pd.isna(record["swbi"]) else float(record["swbi"])
            n_docs = 0 if pd.isna(record["n_docs"]) else int(record["n_docs"])
            flags = record.get("unpolarized")
            unpolarized: Tuple[str, ...] = ()
            if isinstance(flags, str) and flags:
                unpolarized = tuple(flags.split(UNPOLARIZED_SEP))
            rows.append(PanelRow(period=str(record["period"]), unit=str(record["unit"]),
                                 scores=scores, swbi=swbi, n_docs=n_docs, unpolarized=unpolarized))
        return cls(rows=tuple(rows))

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "WellBeingPanel":
        try:
            frame = read_frame_csv(path, dtype={"period": str, "unit": str, "unpolarized": str})
        except SwbError as e:
            raise WellbeingError(str(e)) from e
        return cls.from_frame(frame)


PanelKey = Tuple[str, str, ComponentCode]


def build_panel(estimates: Mapping[PanelKey, PolarityDistribution]) -> WellBeingPanel:
    """
    Собирает панель из оценок компонент по ячейкам

    Args:
        estimates: (период, единица, компонента) -> распределение полярности

    Returns:
        Панель; строки без какой-либо компоненты помечены неполными (swbi = None)
    """
    cells: Dict[Tuple[str, str], Dict[ComponentCode, PolarityDistribution]] = {}
    for (period, unit, code), distribution in estimates.items():
        cells.setdefault((str(period), str(unit)), {})[ComponentCode.parse(code)] = distribution

    rows = []
    for period, unit in sorted(cells):
        components = cells[(period, unit)]
        scores: Dict[str, Optional[float]] = {c: None for c in PANEL_COMPONENTS}
        unpolarized = []
        for code, distribution in components.items():
            scores[code.value] = component_score(distribution)
            if distribution.polarized <= 0:
                unpolarized.append(code.value)

        missing = [c.value for c in COMPONENTS if c not in components]
        if missing:
            logger.warning(f"[cell {period}/{unit}] Нет компонент: {', '.join(missing)}, строка неполная")
            swbi = None
        else:
            swbi = compose_swbi({c: scores[c.value] for c in COMPONENTS})
        if unpolarized:
            logger.info(f"[cell {period}/{unit}] Нет поляризованной массы: {', '.join(sorted(unpolarized))}")

        n_docs = max((d.n_docs for d in components.values()), default=0)
        rows.append(PanelRow(period=period, unit=unit, scores=scores, swbi=swbi,
                             n_docs=n_docs, unpolarized=tuple(sorted(unpolarized))))

    panel = WellBeingPanel(rows=tuple(rows))
    logger.info(f"Панель: {len(rows)} строк, полных {len(panel.complete_rows())}")
    return panel


def read_estimates(directory: Union[str, Path], tags: Sequence[str] = ("-1", "0", "1")
                   ) -> Dict[PanelKey, PolarityDistribution]:
    """
    Читает JSON-оценки компонент из директории

    Файл содержит либо одну оценку (component, period, unit, probs), либо
    component и список cells с оценками по ячейкам.

    Args:
        directory: Директория с *.json
        tags: Метки кодов -1, 0, +1

    Returns:
        Словарь для build_panel
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise WellbeingError(f"estimates directory not found: {directory}")

    estimates: Dict[PanelKey, PolarityDistribution] = {}
    files = sorted(directory.glob("*.json"))
    if not files:
        raise WellbeingError(f"no *.json estimates in {directory}")
    for path in files:
        try:
            data = get_results_from_json(path)
        except SwbError as e:
            raise WellbeingError(str(e)) from e
        if not isinstance(data, dict) or "component" not in data:
            raise WellbeingError(f"{path}: estimate has no 'component'")
        code = ComponentCode.parse(data["component"])
        for cell in data.get("cells", [data]):
            try:
                key = (str(cell["period"]), str(cell["unit"]), code)
                n_docs = int(cell.get("diagnostics", {}).get("n_docs", cell.get("n_docs", 0)) or 0)
                distribution = PolarityDistribution.from_probs(cell["probs"], tags=tags, n_docs=n_docs)
            except KeyError as e:
                raise WellbeingError(f"{path}: estimate is missing {e}") from e
            except WellbeingError as e:
                raise WellbeingError(f"{path}: {e}") from e
            if key in estimates:
                raise WellbeingError(f"{path}: duplicate estimate for {key[0]}/{key[1]}/{code.value}")
            estimates[key] = distribution
    logger.info(f"Загружено {len(estimates)} оценок компонент из {directory}")
    return estimates


def panel_series(panel: WellBeingPanel, unit: str, column: str = "swbi") -> pd.Series:
    """
    Дневной ряд одного столбца панели для одной единицы

    Args:
        panel: Панель
        unit: Единица
        column: swbi или код компоненты

    Returns:
        Ряд с индексом дат (пропуски опущены)
    """
    if column not in (*PANEL_COMPONENTS, "swbi"):
        raise WellbeingError(f"unknown panel column {column!r}")
    frame = panel.to_frame()
    frame = frame[frame["unit"] == unit].dropna(subset=[column])
    if frame.empty:
        raise WellbeingError(f"no {column} values for unit {unit!r}")
    index = pd.DatetimeIndex(pd.to_datetime(frame["period"]), name="ts")
    return pd.Series(frame[column].to_numpy(), index=index, name=column).sort_index()


def summarize_panel(panel: WellBeingPanel, period: str = "year") -> pd.DataFrame:
    """
    Средние компонент и индекса по периодам (только полные строки)

    Args:
        panel: Панель
        period: month или year

    Returns:
        Таблица period, emo..wor, swbi, rows
    """
    if period not in PERIODS:
        raise WellbeingError(f"unknown period {period!r}")
    frame = panel.to_frame().dropna(subset=["swbi"])
    if frame.empty:
        raise WellbeingError("panel has no complete rows")
    stamps = pd.DatetimeIndex(pd.to_datetime(frame["period"]))
    frame = frame.assign(period=stamps.to_period("M" if period == "month" else "Y").astype(str))
    grouped = frame.groupby("period", sort=True)
    summary = grouped[[*PANEL_COMPONENTS, "swbi"]].mean()
    summary["rows"] = grouped.size()
    return summary.reset_index()


def mean_identity_gap(rows: Iterable[PanelRow]) -> float:
    """Наибольшее отклонение swbi от среднего компонент по полным строкам"""
    gaps = [abs(row.swbi - float(np.mean(list(row.scores.values())))) for row in rows if row.complete]
    return max(gaps, default=0.0)
