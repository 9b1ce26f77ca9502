"""
Канонические корреляции, критерий Уилкса и МНК-регрессия
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import linalg
from scipy import stats as sps
from statsmodels.multivariate.cancorr import CanCorr

from .errors import StatsError, SwbError
from .file_utils import read_frame_csv

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
INTERCEPT = "(Intercept)"


@dataclass(frozen=True, eq=False)
class IndicatorMatrix:
    """Таблица показателей: строки - единицы наблюдения, столбцы - именованные показатели"""
    keys: Tuple[str, ...]
    columns: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "keys", tuple(str(k) for k in self.keys))
        object.__setattr__(self, "columns", tuple(str(c) for c in self.columns))
        if values.shape != (len(self.keys), len(self.columns)):
            raise StatsError(f"values shape {values.shape} does not match "
                             f"{len(self.keys)} rows x {len(self.columns)} columns")
        if len(set(self.columns)) != len(self.columns):
            raise StatsError(f"duplicate column names in {list(self.columns)}")
        if len(set(self.keys)) != len(self.keys):
            raise StatsError("duplicate row keys")
        bad_rows = np.flatnonzero(~np.all(np.isfinite(values), axis=1))
        if bad_rows.size:
            raise StatsError(f"missing or non-finite value in row {self.keys[bad_rows[0]]!r}")

    @property
    def n(self) -> int:
        return len(self.keys)

    @property
    def p(self) -> int:
        return len(self.columns)

    def select(self, columns: Sequence[str]) -> "IndicatorMatrix":
        missing = [c for c in columns if c not in self.columns]
        if missing:
            raise StatsError(f"unknown columns {missing}")
        positions = [self.columns.index(c) for c in columns]
        return IndicatorMatrix(self.keys, tuple(columns), self.values[:, positions])

    def reorder(self, keys: Sequence[str]) -> "IndicatorMatrix":
        position = {key: i for i, key in enumerate(self.keys)}
        return IndicatorMatrix(tuple(keys), self.columns, self.values[[position[k] for k in keys]])

    def to_frame(self, key: str = "unit") -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=list(self.columns))
        frame.insert(0, key, list(self.keys))
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, key: str = "unit",
                   columns: Optional[Sequence[str]] = None) -> "IndicatorMatrix":
        """
        Строит таблицу из DataFrame с ключевым столбцом

        Args:
            frame: Исходная таблица
            key: Имя ключевого столбца
            columns: Столбцы показателей (по умолчанию все, кроме ключа)

        Returns:
            Таблица показателей
        """
        if key not in frame.columns:
            raise StatsError(f"key column {key!r} not found in {list(frame.columns)}")
        columns = [c for c in frame.columns if c != key] if columns is None else list(columns)
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise StatsError(f"unknown columns {missing}")
        keys = frame[key].astype(str).tolist()
        values = frame[columns].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
        return cls(tuple(keys), tuple(columns), values)


def read_indicators(path: Union[str, Path], key: str = "unit",
                    columns: Optional[Sequence[str]] = None) -> IndicatorMatrix:
    """Читает таблицу показателей из CSV с ключевым столбцом"""
    try:
        frame = read_frame_csv(path, dtype={key: str})
    except SwbError as e:
        raise StatsError(str(e)) from e
    try:
        return IndicatorMatrix.from_frame(frame, key=key, columns=columns)
    except StatsError as e:
        raise StatsError(f"{path}: {e}") from e


def join_on_key(x: IndicatorMatrix, y: IndicatorMatrix) -> Tuple[IndicatorMatrix, IndicatorMatrix]:
    """
    Выравнивает вторую таблицу по порядку ключей первой

    Наборы ключей обязаны совпадать.
    """
    only_x = sorted(set(x.keys) - set(y.keys))
    only_y = sorted(set(y.keys) - set(x.keys))
    if only_x or only_y:
        raise StatsError(f"row keys differ: only in x {only_x[:5]}, only in y {only_y[:5]}")
    return x, y.reorder(x.keys)


def _standardize(m: IndicatorMatrix) -> np.ndarray:
    centered = m.values - m.values.mean(axis=0)
    scale = centered.std(axis=0, ddof=1)
    constant = [c for c, s in zip(m.columns, scale) if s == 0]
    if constant:
        raise StatsError(f"constant columns cannot be standardized: {constant}")
    return centered / scale


def _pivoted_qr(a: np.ndarray, names: Sequence[str], what: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """QR с выбором ведущего столбца; при неполном ранге - ошибка с именами зависимых столбцов"""
    q, r, piv = linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < a.shape[1]:
        dependent = [names[i] for i in piv[rank:]]
        raise StatsError(f"{what} is rank-deficient; collinear or aliased columns: {dependent}")
    return q, r, piv


@dataclass(frozen=True)
class WilksRow:
    """Критерий Уилкса для размерностей k..d"""
    dimension: int
    wilks_lambda: float
    statistic: float
    df: int
    p_value: float


def wilks_test(correlations: Sequence[float], n: int, px: int, py: int) -> List[WilksRow]:
    """
    Лямбда Уилкса с хи-квадрат приближением Бартлетта

    Args:
        correlations: Канонические корреляции по убыванию
        n: Число наблюдений
        px: Число переменных x
        py: Число переменных y

    Returns:
        Строка на каждую размерность k: Lambda_k = prod_{i>=k}(1 - r_i^2)
    """
    r = np.asarray(correlations, dtype=float)
    factor = n - 1 - (px + py + 1) / 2.0
    rows = []
    for k in range(1, r.size + 1):
        wilks_lambda = float(np.prod(1.0 - r[k - 1:] ** 2))
        df = (px - k + 1) * (py - k + 1)
        if wilks_lambda <= 0:
            statistic, p_value = math.inf, 0.0
        else:
            statistic = -factor * math.log(wilks_lambda) + 0.0
            p_value = float(sps.chi2.sf(statistic, df))
        rows.append(WilksRow(dimension=k, wilks_lambda=wilks_lambda, statistic=statistic, df=df, p_value=p_value))
    return rows


@dataclass(frozen=True, eq=False)
class CcaResult:
    """Результат анализа канонических корреляций (нормированные коэффициенты)"""
    x_columns: Tuple[str, ...]
    y_columns: Tuple[str, ...]
    keys: Tuple[str, ...]
    correlations: np.ndarray
    x_coef: np.ndarray
    y_coef: np.ndarray
    x_scores: np.ndarray
    y_scores: np.ndarray
    x_structure: np.ndarray
    y_structure: np.ndarray
    wilks: Tuple[WilksRow, ...]

    def to_dict(self) -> Dict:
        axes = [f"cv{k + 1}" for k in range(self.correlations.size)]

        def table(names, matrix):
            return {name: dict(zip(axes, row)) for name, row in zip(names, matrix.tolist())}

        return {
            "n": len(self.keys),
            "correlations": self.correlations.tolist(),
            "x_coefficients": table(self.x_columns, self.x_coef),
            "y_coefficients": table(self.y_columns, self.y_coef),
            "x_structure": table(self.x_columns, self.x_structure),
            "y_structure": table(self.y_columns, self.y_structure),
            "wilks": [
                {"dimension": w.dimension, "lambda": w.wilks_lambda, "statistic": w.statistic,
                 "df": w.df, "p_value": w.p_value}
                for w in self.wilks
            ],
        }

    def scores_frame(self, key: str = "unit") -> pd.DataFrame:
        """Канонические переменные по единицам (данные для биплота)"""
        frame = pd.DataFrame({key: list(self.keys)})
        for k in range(self.correlations.size):
            frame[f"x_cv{k + 1}"] = self.x_scores[:, k]
            frame[f"y_cv{k + 1}"] = self.y_scores[:, k]
        return frame


def cca(x: IndicatorMatrix, y: IndicatorMatrix) -> CcaResult:
    """
    Канонические корреляции стандартизованных переменных (statsmodels CanCorr)

    Знак каждой оси выбирается так, чтобы наибольший по модулю коэффициент x был положительным.

    Args:
        x: Первый набор показателей
        y: Второй набор показателей (те же ключи в том же порядке)

    Returns:
        Корреляции, коэффициенты, канонические переменные, структурные корреляции, критерий Уилкса
    """
    if x.keys != y.keys:
        raise StatsError("x and y row keys do not match (same keys in the same order are required)")
    n, px, py = x.n, x.p, y.p
    if n <= max(px, py):
        raise StatsError(f"need more rows than columns on each side: n={n}, px={px}, py={py}")

    zx, zy = _standardize(x), _standardize(y)
    _pivoted_qr(zx, x.columns, "x")
    _pivoted_qr(zy, y.columns, "y")
    try:
        model = CanCorr(zy, zx)
    except ValueError as e:
        raise StatsError(f"canonical correlation failed: {e}") from e

    d = min(px, py)
    correlations = np.asarray(model.cancorr[:d], dtype=float)
    # CanCorr нормирует x1'x1 = I, здесь канонические переменные с единичной дисперсией
    scale = math.sqrt(n - 1)
    x_coef = np.array(model.x_cancoef[:, :d], dtype=float) * scale
    y_coef = np.array(model.y_cancoef[:, :d], dtype=float) * scale

    for k in range(d):
        if x_coef[np.argmax(np.abs(x_coef[:, k])), k] < 0:
            x_coef[:, k] *= -1
            y_coef[:, k] *= -1

    x_scores = zx @ x_coef
    y_scores = zy @ y_coef
    x_structure = zx.T @ x_scores / (n - 1)
    y_structure = zy.T @ y_scores / (n - 1)
    wilks = tuple(wilks_test(correlations, n, px, py))

    logger.info(f"[stats] CCA: n={n}, px={px}, py={py}, r1={correlations[0]:.4f}")
    return CcaResult(
        x_columns=x.columns, y_columns=y.columns, keys=x.keys,
        correlations=correlations, x_coef=x_coef, y_coef=y_coef,
        x_scores=x_scores, y_scores=y_scores,
        x_structure=x_structure, y_structure=y_structure, wilks=wilks,
    )


def cross_correlation(x: IndicatorMatrix, y: IndicatorMatrix) -> pd.DataFrame:
    """Матрица корреляций Пирсона px x py между двумя наборами"""
    if x.keys != y.keys:
        raise StatsError("x and y row keys do not match")
    zx, zy = _standardize(x), _standardize(y)
    return pd.DataFrame(zx.T @ zy / (x.n - 1), index=list(x.columns), columns=list(y.columns))


def significance_stars(p: float) -> str:
    """*** p <= 0.001, ** p <= 0.01, * p <= 0.05"""
    if p is None or not math.isfinite(p):
        return ""
    if p <= 0.001:
        return "***"
    if p <= 0.01:
        return "**"
    if p <= 0.05:
        return "*"
    return ""


def information_criteria(loglik: float, n: int, k: int) -> Tuple[float, float]:
    """
    AIC и BIC

    Args:
        loglik: Логарифм правдоподобия
        n: Число наблюдений
        k: Число параметров (коэффициенты и дисперсия ошибки)

    Returns:
        (AIC, BIC)
    """
    return -2.0 * loglik + 2.0 * k, -2.0 * loglik + k * math.log(n)


@dataclass(frozen=True, eq=False)
class OlsResult:
    """Результат МНК-регрессии"""
    response: str
    names: Tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    sigma: float
    f_stat: float
    f_p_value: float
    log_lik: float
    deviance: float
    aic: float
    bic: float
    n: int
    df_resid: int
    residuals: np.ndarray

    @property
    def stars(self) -> Tuple[str, ...]:
        return tuple(significance_stars(p) for p in self.p_values)

    def statistics(self) -> Dict[str, float]:
        return {
            "r_squared": self.r_squared,
            "adj_r_squared": self.adj_r_squared,
            "sigma": self.sigma,
            "f_stat": self.f_stat,
            "f_p_value": self.f_p_value,
            "log_lik": self.log_lik,
            "deviance": self.deviance,
            "aic": self.aic,
            "bic": self.bic,
            "n": self.n,
        }

    def to_dict(self) -> Dict:
        return {
            "response": self.response,
            "coefficients": [
                {"term": name, "estimate": b, "std_error": se, "t_value": t, "p_value": p, "stars": star}
                for name, b, se, t, p, star in zip(self.names, self.coefficients, self.std_errors,
                                                    self.t_values, self.p_values, self.stars)
            ],
            "statistics": self.statistics(),
            "df_resid": self.df_resid,
        }


def ols(y: np.ndarray, x: IndicatorMatrix, intercept: bool = True, response: str = "y") -> OlsResult:
    """
    МНК-регрессия (statsmodels OLS, разложение QR)

    Ранг матрицы плана проверяется заранее: при коллинеарности ошибка называет зависимые столбцы.
    AIC и BIC считают дисперсию ошибки отдельным параметром (k = p + 1).

    Args:
        y: Отклик (длина n)
        x: Регрессоры
        intercept: Добавить свободный член
        response: Имя отклика

    Returns:
        Коэффициенты, стандартные ошибки, статистики качества модели
    """
    y = np.asarray(y, dtype=float).ravel()
    n = x.n
    if y.size != n:
        raise StatsError(f"response has {y.size} values for {n} rows")
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        raise StatsError(f"missing or non-finite response in row {x.keys[bad]!r}")

    names = ((INTERCEPT,) if intercept else ()) + x.columns
    design = np.column_stack([np.ones(n), x.values]) if intercept else x.values
    p = design.shape[1]
    if p == 0:
        raise StatsError("empty design")
    if n <= p:
        raise StatsError(f"need more observations than parameters: n={n}, p={p}")

    _pivoted_qr(design, names, "design")
    k_model = p - (1 if intercept else 0)
    # без свободного члена statsmodels считает нецентрированный R^2
    with np.errstate(divide="ignore", invalid="ignore"):
        fit = sm.OLS(y, design, hasconst=intercept).fit(method="qr")
        beta = np.asarray(fit.params, dtype=float)
        std_errors = np.asarray(fit.bse, dtype=float)
        t_values = np.asarray(fit.tvalues, dtype=float)
        p_values = np.asarray(fit.pvalues, dtype=float)
        rss = float(fit.ssr)
        r_squared = max(0.0, float(fit.rsquared)) if math.isfinite(fit.rsquared) else 0.0
        adj_r_squared = float(fit.rsquared_adj) if math.isfinite(fit.rsquared_adj) else 0.0
        if k_model > 0 and rss > 0:
            f_stat, f_p_value = float(fit.fvalue), float(fit.f_pvalue)
        elif k_model > 0:
            f_stat, f_p_value = math.inf, 0.0
        else:
            f_stat, f_p_value = math.nan, math.nan
        log_lik = float(fit.llf)

    df_resid = int(round(fit.df_resid))
    sigma = math.sqrt(float(fit.scale))
    aic, bic = information_criteria(log_lik, n, p + 1)
    logger.debug(f"[stats] OLS {response}: n={n}, p={p}, R2={r_squared:.4f}")
    return OlsResult(
        response=response, names=names, coefficients=beta, std_errors=std_errors,
        t_values=t_values, p_values=p_values, r_squared=r_squared, adj_r_squared=adj_r_squared,
        sigma=sigma, f_stat=f_stat, f_p_value=f_p_value, log_lik=log_lik, deviance=rss,
        aic=aic, bic=bic, n=n, df_resid=df_resid, residuals=np.asarray(fit.resid, dtype=float),
    )


STATISTIC_ROWS = (
    ("R-squared", "r_squared"),
    ("adj. R-squared", "adj_r_squared"),
    ("sigma", "sigma"),
    ("F", "f_stat"),
    ("p", "f_p_value"),
    ("Log-likelihood", "log_lik"),
    ("Deviance", "deviance"),
    ("AIC", "aic"),
    ("BIC", "bic"),
    ("N", "n"),
)


def regress_all(ys: IndicatorMatrix, x: IndicatorMatrix, intercept: bool = True,
                jobs: int = 1) -> Dict[str, OlsResult]:
    """Одна регрессия на каждый столбец откликов по общему набору регрессоров"""
    if ys.keys != x.keys:
        raise StatsError("response and regressor row keys do not match")

    def fit(column: str) -> OlsResult:
        return ols(ys.select([column]).values[:, 0], x, intercept=intercept, response=column)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(fit, ys.columns))
    else:
        results = [fit(column) for column in ys.columns]
    return dict(zip(ys.columns, results))


def regress_table(ys: IndicatorMatrix, x: IndicatorMatrix, intercept: bool = True,
                  jobs: int = 1) -> pd.DataFrame:
    """
    Таблица регрессий: столбец на каждый отклик, строки - коэффициенты
    (оценка, стандартная ошибка, звёзды) и статистики модели

    Args:
        ys: Отклики
        x: Регрессоры
        intercept: Добавить свободный член
        jobs: Число потоков

    Returns:
        Таблица pandas (index - название строки)
    """
    results = regress_all(ys, x, intercept=intercept, jobs=jobs)
    rows: Dict[str, Dict[str, object]] = {}
    for column, result in results.items():
        for name, b, se, star in zip(result.names, result.coefficients, result.std_errors, result.stars):
            rows.setdefault(name, {})[column] = float(b)
            rows.setdefault(f"{name} (se)", {})[column] = float(se)
            rows.setdefault(f"{name} (stars)", {})[column] = star
        statistics = result.statistics()
        for label, attribute in STATISTIC_ROWS:
            rows.setdefault(label, {})[column] = statistics[attribute]
    return pd.DataFrame.from_dict(rows, orient="index")[list(results)]
