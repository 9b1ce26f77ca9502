"""
Оценка запаздывания между асинхронно наблюдаемыми рядами.

Ковариация Хаяси-Ёсиды суммирует произведения приращений по всем парам
пересекающихся интервалов наблюдений, без синхронизации и интерполяции.
Контраст U(theta) - ковариация x и y, сдвинутого на theta; оценка запаздывания -
точка сетки с наибольшим |U|. Положительное значение: x опережает y.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import LeadLagError, NoOverlapError, SwbError
from .file_utils import read_frame_csv

logger = logging.getLogger(__name__)

TIE_RTOL = 1e-9
GRID_EPS = 1e-9
PERIOD_FREQ = {"week": "W", "month": "M"}
STAMPS = ("end", "midpoint")


@dataclass(frozen=True, eq=False)
class AsyncSeries:
    """Ряд с нерегулярными моментами наблюдений (в днях)"""
    times: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        label = self.name or "series"
        if times.ndim != 1 or times.shape != values.shape:
            raise LeadLagError(f"{label}: times and values must be 1-d arrays of equal length")
        if times.size < 2:
            raise LeadLagError(f"{label}: at least two observations are required")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise LeadLagError(f"{label}: non-finite times or values")
        if np.any(np.diff(times) <= 0):
            raise LeadLagError(f"{label}: times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def scaled(self, factor: float) -> "AsyncSeries":
        return AsyncSeries(self.times, self.values * factor, self.name)


def _overlapping_products(x: AsyncSeries, y: AsyncSeries) -> List[float]:
    """Произведения приращений по парам пересекающихся интервалов (t_{i-1}, t_i] и (s_{j-1}, s_j]"""
    t, s = x.times, y.times
    dx, dy = x.increments, y.increments
    products = []
    i = j = 0
    nx, ny = dx.size, dy.size
    while i < nx and j < ny:
        if t[i] < s[j + 1] and s[j] < t[i + 1]:
            products.append(dx[i] * dy[j])
        # продвигается интервал, который заканчивается раньше
        if t[i + 1] < s[j + 1]:
            i += 1
        elif s[j + 1] < t[i + 1]:
            j += 1
        else:
            i += 1
            j += 1
    return products


def hy_covariance(x: AsyncSeries, y: AsyncSeries) -> float:
    """
    Ковариация Хаяси-Ёсиды, линейный проход по двум упорядоченным наборам интервалов

    Args:
        x: Первый ряд
        y: Второй ряд

    Returns:
        Сумма dX_i·dY_j по пересекающимся интервалам
    """
    products = _overlapping_products(x, y)
    if not products:
        raise NoOverlapError("no interval overlap")
    return math.fsum(products)


def hy_covariance_reference(x: AsyncSeries, y: AsyncSeries) -> float:
    """Та же ковариация двойным циклом по всем парам интервалов"""
    t, s = x.times, y.times
    dx, dy = x.increments, y.increments
    products = [
        dx[i] * dy[j]
        for i in range(dx.size)
        for j in range(dy.size)
        if t[i] < s[j + 1] and s[j] < t[i + 1]
    ]
    if not products:
        raise NoOverlapError("no interval overlap")
    return math.fsum(products)


def realized_variance(x: AsyncSeries) -> float:
    return math.fsum(d * d for d in x.increments)


class HyCorrelation(NamedTuple):
    value: float
    out_of_range: bool


def hy_correlation(x: AsyncSeries, y: AsyncSeries) -> HyCorrelation:
    """
    Корреляция Хаяси-Ёсиды: ковариация, нормированная реализованными дисперсиями
    по всей выборке каждого ряда

    Значение вне [-1, 1] возвращается как есть, с флагом.

    Args:
        x: Первый ряд
        y: Второй ряд

    Returns:
        (значение, флаг выхода за [-1, 1])
    """
    rv_x, rv_y = realized_variance(x), realized_variance(y)
    for series, rv in ((x, rv_x), (y, rv_y)):
        if rv == 0:
            raise LeadLagError(f"zero realized variance for {series.name or 'series'}")
    value = hy_covariance(x, y) / math.sqrt(rv_x * rv_y)
    return HyCorrelation(value=value, out_of_range=abs(value) > 1.0)


def shift(y: AsyncSeries, theta: float) -> AsyncSeries:
    """Сдвиг: в момент t сдвинутый ряд несёт значение исходного в момент t + theta"""
    return AsyncSeries(y.times - theta, y.values, y.name)


@dataclass(frozen=True)
class LagGrid:
    """Симметричная сетка сдвигов {-delta, ..., -step, 0, step, ..., delta}"""
    delta: float = 5.0
    step: float = 1.0

    def __post_init__(self):
        if not (self.delta > 0 and self.step > 0):
            raise LeadLagError("lag grid delta and step must be positive")
        if self.step > self.delta:
            raise LeadLagError(f"lag grid step {self.step} exceeds delta {self.delta}")

    @property
    def offsets(self) -> np.ndarray:
        n = int(math.floor(self.delta / self.step + GRID_EPS))
        return np.arange(-n, n + 1, dtype=float) * self.step


@dataclass(frozen=True)
class LeadLagResult:
    """Оценка запаздывания, профиль контраста и корреляция в точке максимума"""
    theta_hat: float
    correlation: float
    out_of_range: bool
    profile: Tuple[Tuple[float, Optional[float]], ...]
    ties: Tuple[float, ...]
    excluded: Tuple[float, ...] = ()

    def to_dict(self) -> Dict:
        return {
            "theta_hat": self.theta_hat,
            "correlation": self.correlation,
            "out_of_range_flag": self.out_of_range,
            "profile": [{"theta": theta, "contrast": contrast} for theta, contrast in self.profile],
            "ties": list(self.ties),
            "excluded_offsets": list(self.excluded),
        }


def _contrast(x: AsyncSeries, y: AsyncSeries, theta: float) -> Optional[float]:
    try:
        return hy_covariance(x, shift(y, theta))
    except NoOverlapError:
        return None


def estimate_lead_lag(x: AsyncSeries, y: AsyncSeries, grid: Optional[LagGrid] = None,
                      jobs: int = 1) -> LeadLagResult:
    """
    Оценка запаздывания максимизацией |U(theta)| по сетке

    При равенстве максимумов выбирается наименьший |theta|, затем отрицательный.

    Args:
        x: Ряд-кандидат в опережающие
        y: Второй ряд
        grid: Сетка сдвигов
        jobs: Число потоков для вычисления контраста

    Returns:
        Результат с полным профилем контраста
    """
    grid = grid or LagGrid()
    offsets = [float(theta) for theta in grid.offsets]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            contrasts = list(executor.map(lambda theta: _contrast(x, y, theta), offsets))
    else:
        contrasts = [_contrast(x, y, theta) for theta in offsets]

    excluded = tuple(theta for theta, u in zip(offsets, contrasts) if u is None)
    kept = [(theta, u) for theta, u in zip(offsets, contrasts) if u is not None]
    if not kept:
        raise LeadLagError(f"no grid offset leaves {x.name or 'x'} and {y.name or 'y'} overlapping")
    if excluded:
        logger.warning(f"[leadlag] Сдвиги без пересечения интервалов исключены: {list(excluded)}")

    magnitudes = np.abs(np.array([u for _, u in kept]))
    peak = magnitudes.max()
    if peak == 0:
        raise LeadLagError("no covariation detected")
    ties = tuple(theta for (theta, _), m in zip(kept, magnitudes) if np.isclose(m, peak, rtol=TIE_RTOL, atol=0.0))
    theta_hat = min(ties, key=lambda theta: (abs(theta), theta))

    correlation = hy_correlation(x, shift(y, theta_hat))
    logger.info(f"[leadlag] {x.name or 'x'} / {y.name or 'y'}: theta={theta_hat:g}, "
                f"корреляция={correlation.value:.4f}, совпадений максимума {len(ties)}")
    return LeadLagResult(
        theta_hat=theta_hat,
        correlation=correlation.value,
        out_of_range=correlation.out_of_range,
        profile=tuple(zip(offsets, contrasts)),
        ties=ties,
        excluded=excluded,
    )


def lead_lag_table(x: AsyncSeries, ys: Mapping[str, AsyncSeries], grid: Optional[LagGrid] = None,
                   jobs: int = 1) -> pd.DataFrame:
    """
    Таблица запаздываний: строки theta_hat и correlation, столбец на каждый ряд y

    Args:
        x: Общий ряд x
        ys: Именованные ряды y
        grid: Сетка сдвигов
        jobs: Число потоков

    Returns:
        Таблица pandas
    """
    columns = {}
    for name, y in ys.items():
        result = estimate_lead_lag(x, y, grid, jobs=jobs)
        columns[name] = [result.theta_hat, result.correlation]
    return pd.DataFrame(columns, index=["theta_hat", "correlation"])


def previous_tick_correlation(x: AsyncSeries, y: AsyncSeries, step: float = 1.0) -> float:
    """
    Корреляция после синхронизации по предыдущему наблюдению на регулярной сетке

    Args:
        x: Первый ряд
        y: Второй ряд
        step: Шаг сетки (дни)

    Returns:
        Реализованная корреляция синхронизированных приращений
    """
    start = max(x.times[0], y.times[0])
    end = min(x.times[-1], y.times[-1])
    if end <= start:
        raise NoOverlapError("no interval overlap")
    grid = start + step * np.arange(int(math.floor((end - start) / step + GRID_EPS)) + 1)
    if grid.size < 2:
        raise LeadLagError(f"step {step} leaves fewer than two synchronization points")

    def sample(series: AsyncSeries) -> np.ndarray:
        positions = np.searchsorted(series.times, grid, side="right") - 1
        return np.diff(series.values[positions])

    dx, dy = sample(x), sample(y)
    denominator = math.sqrt(math.fsum(dx * dx) * math.fsum(dy * dy))
    if denominator == 0:
        raise LeadLagError("zero variance after previous-tick synchronization")
    return math.fsum(dx * dy) / denominator


def _stamp(index: pd.DatetimeIndex, period: Optional[str], stamp: str) -> pd.DatetimeIndex:
    if period is None:
        return index
    if period not in PERIOD_FREQ:
        raise LeadLagError(f"unknown period {period!r}")
    if stamp not in STAMPS:
        raise LeadLagError(f"unknown stamp {stamp!r}")
    periods = index.to_period(PERIOD_FREQ[period])
    first = periods.start_time.normalize()
    last = periods.end_time.normalize()
    if stamp == "end":
        return pd.DatetimeIndex(last)
    return pd.DatetimeIndex(first + (last + pd.Timedelta(days=1) - first) / 2)


def read_series_csv(path: Union[str, Path], period: Optional[str] = None, stamp: str = "end") -> pd.Series:
    """
    Читает ряд из CSV с заголовком ts,value

    Args:
        path: Путь к файлу
        period: week или month - значения относятся к периодам и штампуются
        stamp: end (последний день периода) или midpoint (середина периода)

    Returns:
        Ряд pandas с индексом дат, упорядоченный по времени
    """
    try:
        frame = read_frame_csv(path, dtype={"ts": str})
    except SwbError as e:
        raise LeadLagError(str(e)) from e
    if list(frame.columns[:2]) != ["ts", "value"]:
        raise LeadLagError(f"{path}: expected header 'ts,value', got {list(frame.columns)}")
    try:
        index = pd.DatetimeIndex(pd.to_datetime(frame["ts"], format="ISO8601"))
    except (ValueError, TypeError) as e:
        raise LeadLagError(f"{path}: cannot parse timestamps ({e})") from e
    if index.tz is not None:
        index = index.tz_convert("UTC").tz_localize(None)
    values = pd.to_numeric(frame["value"], errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise LeadLagError(f"{path}: non-finite value at row {int(bad[0]) + 1}")

    index = _stamp(index, period, stamp)
    series = pd.Series(values, index=index, name=Path(path).stem).sort_index()
    duplicated = series.index[series.index.duplicated()]
    if len(duplicated):
        raise LeadLagError(f"{path}: duplicate timestamp {duplicated[0].isoformat()}")
    return series


def to_async_pair(x: pd.Series, y: pd.Series) -> Tuple[AsyncSeries, AsyncSeries, pd.Timestamp]:
    """
    Переводит два ряда с датами в дробные дни от самого раннего наблюдения обоих рядов

    Returns:
        (x, y, начало отсчёта)
    """
    origin = min(x.index.min(), y.index.min())

    def days(series: pd.Series) -> AsyncSeries:
        offsets = (series.index - origin) / pd.Timedelta(days=1)
        return AsyncSeries(np.asarray(offsets, dtype=float), series.to_numpy(dtype=float), str(series.name or ""))

    return days(x), days(y), origin
