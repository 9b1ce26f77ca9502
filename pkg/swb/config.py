"""
Конфигурация конвейера и настройка логирования

Файл key = value читается в PipelineConfig (pydantic), флаги командной строки
переопределяют значения из файла. TokenizerConfig и EstimatorConfig передаются
в модули обработки текста и оценки.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import colorlog
from dataclasses_json import dataclass_json
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError


@dataclass_json
@dataclass(frozen=True)
class TokenizerConfig:
    """Настройки токенизации и построения словаря основ"""
    ngram_min: int = 1
    ngram_max: int = 2
    min_df: int = 2
    casefold: bool = True
    stemmer: Optional[str] = None  # язык SnowballStemmer, None - без стемминга


@dataclass_json
@dataclass(frozen=True)
class EstimatorConfig:
    """Настройки оценивания распределения мнений"""
    ridge: Optional[float] = None  # None - ранговая неполнота является ошибкой
    strict: bool = False
    max_uncovered: float = 0.05


DEFAULT_RIDGE = 1e-8


class PipelineConfig(BaseModel):
    """
    Конфигурация запуска: файл вида "ключ = значение" плюс флаги командной строки.
    Неизвестные ключи отклоняются.
    """
    model_config = ConfigDict(extra="forbid")

    cats: Optional[List[str]] = None
    off_topic: Optional[str] = None
    ngram_min: int = Field(1, ge=1)
    ngram_max: int = Field(2, ge=1)
    min_df: int = Field(2, ge=1)
    casefold: bool = True
    stemmer: Optional[str] = None
    train_only_lexicon: bool = False
    method: str = "inverse"
    ridge: Optional[float] = Field(None, gt=0)
    strict: bool = False
    on_topic: bool = False
    bootstrap: int = Field(0, ge=0)
    seed: Optional[int] = Field(None, ge=0)
    jobs: int = Field(1, ge=1)
    delta: float = Field(5.0, gt=0)
    step: float = Field(1.0, gt=0)
    stamp: str = "end"
    log_file: Optional[Path] = None
    train: Optional[Path] = None
    test: Optional[Path] = None
    lexicon: Optional[Path] = None

    @field_validator("cats", mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("stemmer", "off_topic", mode="before")
    @classmethod
    def _none_literal(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip().lower() in ("", "none", "null"):
            return None
        return value

    @field_validator("method")
    @classmethod
    def _check_method(cls, value: str) -> str:
        if value not in ("inverse", "baseline"):
            raise ValueError(f"unknown method {value!r}")
        return value

    @field_validator("stamp")
    @classmethod
    def _check_stamp(cls, value: str) -> str:
        if value not in ("end", "midpoint"):
            raise ValueError(f"unknown stamp {value!r}")
        return value

    @model_validator(mode="after")
    def _check_ngrams(self) -> "PipelineConfig":
        if self.ngram_min > self.ngram_max:
            raise ValueError("ngram_min must not exceed ngram_max")
        return self

    def tokenizer(self) -> TokenizerConfig:
        return TokenizerConfig(
            ngram_min=self.ngram_min,
            ngram_max=self.ngram_max,
            min_df=self.min_df,
            casefold=self.casefold,
            stemmer=self.stemmer,
        )

    def estimator(self) -> EstimatorConfig:
        return EstimatorConfig(ridge=self.ridge, strict=self.strict)

    def merged(self, overrides: Dict[str, Any]) -> "PipelineConfig":
        """
        Возвращает новую конфигурацию с применёнными флагами командной строки

        Args:
            overrides: Значения флагов (None означает "не задано")

        Returns:
            Проверенная объединённая конфигурация
        """
        data = self.model_dump()
        data.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return PipelineConfig(**data)
        except ValidationError as e:
            raise ConfigError(f"invalid option: {_first_error(e)}") from e


def parse_key_value(text: str) -> Dict[str, str]:
    """
    Разбирает текст вида "ключ = значение"

    Args:
        text: Содержимое файла конфигурации

    Returns:
        Словарь строковых значений
    """
    values: Dict[str, str] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected 'key = value', got {raw_line.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {number}: duplicate key {key!r}")
        values[key] = value
    return values


def load_config(path: Optional[Path]) -> PipelineConfig:
    """
    Загружает конфигурацию из файла (или возвращает значения по умолчанию)

    Args:
        path: Путь к файлу конфигурации

    Returns:
        Проверенная конфигурация
    """
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = parse_key_value(path.read_text(encoding="utf-8"))
    try:
        return PipelineConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"{path}: {_first_error(e)}") from e


def _first_error(error: ValidationError) -> str:
    details = error.errors()[0]
    location = ".".join(str(part) for part in details.get("loc", ())) or "config"
    return f"{location}: {details.get('msg')}"


def setup_logging(log_file: Optional[Path] = None, verbose: bool = False) -> None:
    """
    Настраивает логирование: цветная консоль и, при необходимости, файл-спутник

    Args:
        log_file: Путь к файлу журнала (только в нём появляются отметки времени запуска)
        verbose: Выводить DEBUG в консоль
    """
    log_format = "%(log_color)s%(asctime)s [%(levelname)s] %(name)s: %(message)s%(reset)s"
    file_format = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)

    # Очистка существующих обработчиков
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        if isinstance(handler, logging.FileHandler):
            handler.close()

    console_handler = colorlog.StreamHandler()
    console_handler.setFormatter(colorlog.ColoredFormatter(log_format))
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.addHandler(console_handler)

    if log_file is not None:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, mode="a", encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(file_format))
        file_handler.setLevel(logging.DEBUG)
        logger.addHandler(file_handler)

    # Отключение избыточных логов
    logging.getLogger("nltk").setLevel(logging.WARNING)

