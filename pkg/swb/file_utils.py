import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np
import pandas as pd

from .errors import SwbError

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12


def _normalize(value: Any) -> Any:
    """Приводит значение к JSON-виду: 12 значащих цифр, нечисловые значения -> null"""
    if isinstance(value, dict):
        return {str(key): _normalize(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_normalize(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    if isinstance(value, Path):
        return str(value)
    return value


def atomic_write_text(text: str, path: Union[str, Path]) -> Path:
    """
    Атомарно записывает текст: временный файл в той же директории и rename

    Args:
        text: Содержимое
        path: Путь к итоговому файлу

    Returns:
        Путь к записанному файлу
    """
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)

    fd, tmp_name = tempfile.mkstemp(prefix=f".{file_path.name}.", suffix=".tmp", dir=file_path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as tmp_file:
            tmp_file.write(text)
        os.replace(tmp_name, file_path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return file_path


def save_results_to_json(results: Union[Dict, List], path: Union[str, Path]) -> Path:
    """
    Сохраняет результаты в JSON файл (фиксированный порядок ключей, 12 значащих цифр)

    Args:
        results: Данные для сохранения
        path: Путь к файлу

    Returns:
        Путь к записанному файлу
    """
    text = json.dumps(_normalize(results), ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False)
    file_path = atomic_write_text(text + "\n", path)

    count = len(results) if isinstance(results, (dict, list)) else 1
    logger.info(f"Сохранено {count} записей в {file_path}")
    return file_path


def get_results_from_json(path: Union[str, Path]) -> Any:
    """
    Загружает данные из JSON файла

    Args:
        path: Путь к файлу

    Returns:
        Разобранные данные
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise SwbError(f"file not found: {file_path}")
    try:
        with open(file_path, "r", encoding="utf-8") as json_file:
            data = json.load(json_file)
    except json.JSONDecodeError as e:
        raise SwbError(f"{file_path}: invalid JSON ({e})") from e
    logger.debug(f"Загружено {len(data) if hasattr(data, '__len__') else 1} записей из {file_path}")
    return data


def read_json_lines(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """
    Читает JSON-lines файл: один объект на строку, пустые строки пропускаются

    Args:
        path: Путь к файлу

    Returns:
        Список объектов
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise SwbError(f"file not found: {file_path}")
    records = []
    with open(file_path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise SwbError(f"{file_path}:{number}: invalid JSON ({e})") from e
            if not isinstance(record, dict):
                raise SwbError(f"{file_path}:{number}: expected a JSON object")
            records.append(record)
    logger.info(f"Загружено {len(records)} записей из {file_path}")
    return records


def write_json_lines(records: Iterable[Dict[str, Any]], path: Union[str, Path]) -> Path:
    """Атомарно записывает JSON-lines файл"""
    lines = [json.dumps(_normalize(record), ensure_ascii=False, sort_keys=True) for record in records]
    file_path = atomic_write_text("".join(line + "\n" for line in lines), path)
    logger.info(f"Сохранено {len(lines)} записей в {file_path}")
    return file_path


def write_frame_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """
    Атомарно записывает таблицу в CSV (пропуски - пустые поля)

    Args:
        frame: Таблица
        path: Путь к файлу

    Returns:
        Путь к записанному файлу
    """
    text = frame.to_csv(index=False, na_rep="", float_format=f"%.{SIGNIFICANT_DIGITS}g", lineterminator="\n")
    file_path = atomic_write_text(text, path)
    logger.info(f"Сохранено {len(frame)} строк в {file_path}")
    return file_path


def read_frame_csv(path: Union[str, Path], **kwargs: Any) -> pd.DataFrame:
    """Читает CSV в таблицу pandas с проверкой существования файла"""
    file_path = Path(path)
    if not file_path.is_file():
        raise SwbError(f"file not found: {file_path}")
    try:
        return pd.read_csv(file_path, **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as e:
        raise SwbError(f"{file_path}: cannot parse CSV ({e})") from e


def missing_paths(paths: Iterable[Union[str, Path, None]]) -> List[Path]:
    """
    Возвращает входные пути, которых нет на диске

    Args:
        paths: Пути (None пропускаются)

    Returns:
        Список отсутствующих путей
    """
    return [Path(p) for p in paths if p is not None and not Path(p).exists()]
