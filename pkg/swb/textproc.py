"""
Токенизация, словарь основ и бинарное кодирование документов
"""
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from nltk.stem.snowball import SnowballStemmer
from pydantic import BaseModel, ConfigDict, ValidationError
from sklearn.feature_extraction.text import CountVectorizer

from .config import TokenizerConfig
from .errors import SwbError, TextprocError
from .file_utils import atomic_write_text, read_json_lines, write_json_lines

logger = logging.getLogger(__name__)

LEXICON_HEADER = "# swb-lexicon "
_WORD_RE = re.compile(r"\w+")


@dataclass(frozen=True)
class Document:
    """Документ корпуса"""
    id: str
    text: str
    label: Optional[str] = None
    timestamp: Optional[datetime] = None
    unit: Optional[str] = None


class DocumentRecord(BaseModel):
    """Строка JSON-lines корпуса"""
    model_config = ConfigDict(extra="forbid")

    id: str
    text: str
    label: Optional[str] = None
    ts: Optional[datetime] = None
    unit: Optional[str] = None

    def to_document(self) -> Document:
        return Document(id=self.id, text=self.text, label=self.label, timestamp=self.ts, unit=self.unit)


def read_corpus(path: Union[str, Path]) -> List[Document]:
    """
    Читает корпус из JSON-lines файла

    Args:
        path: Путь к файлу

    Returns:
        Список документов
    """
    try:
        records = read_json_lines(path)
    except SwbError as e:
        raise TextprocError(str(e)) from e

    docs = []
    seen = set()
    for number, record in enumerate(records, start=1):
        try:
            doc = DocumentRecord(**record).to_document()
        except ValidationError as e:
            details = e.errors()[0]
            location = ".".join(str(part) for part in details.get("loc", ()))
            raise TextprocError(f"{path}: record {number}: {location}: {details.get('msg')}") from e
        if doc.id in seen:
            raise TextprocError(f"{path}: duplicate document id {doc.id!r}")
        seen.add(doc.id)
        docs.append(doc)
    return docs


def write_corpus(docs: Iterable[Document], path: Union[str, Path]) -> Path:
    """Записывает корпус в JSON-lines файл"""
    records = [
        {
            "id": doc.id,
            "text": doc.text,
            "label": doc.label,
            "ts": doc.timestamp.isoformat() if doc.timestamp is not None else None,
            "unit": doc.unit,
        }
        for doc in docs
    ]
    return write_json_lines(records, path)


def _stemmer(config: TokenizerConfig) -> Optional[Callable[[str], str]]:
    if config.stemmer is None:
        return None
    try:
        return SnowballStemmer(config.stemmer).stem
    except ValueError as e:
        raise TextprocError(f"unknown stemmer language {config.stemmer!r}") from e


def tokenize(text: str, config: TokenizerConfig) -> List[str]:
    """
    Разбивает текст на токены: NFC, приведение регистра, слова Unicode, стемминг

    Args:
        text: Текст документа
        config: Настройки токенизации

    Returns:
        Список токенов
    """
    text = unicodedata.normalize("NFC", text)
    if config.casefold:
        text = text.casefold()
    tokens = _WORD_RE.findall(text)
    stem = _stemmer(config)
    if stem is not None:
        tokens = [stem(token) for token in tokens]
    return tokens


def _check_config(config: TokenizerConfig) -> None:
    if config.ngram_min < 1 or config.ngram_max < config.ngram_min:
        raise TextprocError(f"invalid n-gram orders {config.ngram_min}..{config.ngram_max}")
    if config.min_df < 1:
        raise TextprocError(f"invalid minimum document frequency {config.min_df}")


def _vectorizer(config: TokenizerConfig, vocabulary: Optional[Sequence[str]] = None) -> CountVectorizer:
    stem = _stemmer(config)

    def analyzer_tokens(text: str) -> List[str]:
        text = unicodedata.normalize("NFC", text)
        if config.casefold:
            text = text.casefold()
        tokens = _WORD_RE.findall(text)
        return [stem(token) for token in tokens] if stem is not None else tokens

    return CountVectorizer(
        tokenizer=analyzer_tokens,
        token_pattern=None,
        lowercase=False,
        ngram_range=(config.ngram_min, config.ngram_max),
        min_df=config.min_df if vocabulary is None else 1,
        binary=True,
        vocabulary=list(vocabulary) if vocabulary is not None else None,
        dtype=np.uint8,
    )


@dataclass(frozen=True)
class StemLexicon:
    """Упорядоченный словарь основ (униграммы, биграммы, ...)"""
    stems: Tuple[str, ...]
    config: TokenizerConfig = field(default_factory=TokenizerConfig)

    def __post_init__(self):
        if len(self.stems) < 1:
            raise TextprocError("lexicon must contain at least one stem")
        if len(set(self.stems)) != len(self.stems):
            raise TextprocError("lexicon stems must be distinct")
        if list(self.stems) != sorted(self.stems):
            raise TextprocError("lexicon stems must be sorted")

    @property
    def size(self) -> int:
        return len(self.stems)

    def save(self, path: Union[str, Path]) -> Path:
        """
        Сохраняет словарь: строка-заголовок с настройками, затем по одной основе в строке

        Args:
            path: Путь к файлу

        Returns:
            Путь к записанному файлу
        """
        header = LEXICON_HEADER + json.dumps(self.config.to_dict(), sort_keys=True)
        file_path = atomic_write_text("\n".join([header, *self.stems]) + "\n", path)
        logger.info(f"Словарь из {self.size} основ сохранён в {file_path}")
        return file_path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "StemLexicon":
        file_path = Path(path)
        if not file_path.is_file():
            raise TextprocError(f"lexicon file not found: {file_path}")
        lines = file_path.read_text(encoding="utf-8").split("\n")
        if not lines or not lines[0].startswith(LEXICON_HEADER):
            raise TextprocError(f"{file_path}: missing lexicon header")
        try:
            config = TokenizerConfig.from_dict(json.loads(lines[0][len(LEXICON_HEADER):]))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise TextprocError(f"{file_path}: invalid lexicon header ({e})") from e
        stems = tuple(line for line in lines[1:] if line)
        return cls(stems=stems, config=config)


@dataclass(frozen=True)
class StemVector:
    """Уникальный бинарный вектор основ: индексы единиц и число документов с ним"""
    indices: Tuple[int, ...]
    length: int
    multiplicity: int = 1

    def __post_init__(self):
        if self.multiplicity < 1:
            raise TextprocError("multiplicity must be at least 1")
        if any(i < 0 or i >= self.length for i in self.indices):
            raise TextprocError("stem index out of range")

    @property
    def bits(self) -> np.ndarray:
        bits = np.zeros(self.length, dtype=np.uint8)
        bits[list(self.indices)] = 1
        return bits


@dataclass(frozen=True)
class EncodedCorpus:
    """
    Корпус в пространстве уникальных векторов основ.

    unique_vectors упорядочены канонически (по кортежу индексов), поэтому порядок
    не зависит от порядка документов на входе.
    """
    lexicon: StemLexicon
    unique_vectors: Tuple[StemVector, ...]
    assignment: Dict[str, int]
    labels: Dict[str, Optional[str]]
    doc_ids: Tuple[str, ...] = ()
    zero_vector_docs: int = 0

    @property
    def n_docs(self) -> int:
        return len(self.assignment)

    @property
    def keys(self) -> List[Tuple[int, ...]]:
        return [vector.indices for vector in self.unique_vectors]

    def vector_distribution(self) -> np.ndarray:
        """Эмпирическое распределение уникальных векторов P(S)"""
        counts = np.array([v.multiplicity for v in self.unique_vectors], dtype=float)
        return counts / counts.sum()

    def subset(self, doc_ids: Iterable[str]) -> "EncodedCorpus":
        """
        Ограничивает корпус частью документов

        Args:
            doc_ids: Идентификаторы документов

        Returns:
            Новый корпус с пересчитанными кратностями
        """
        rows = {doc_id: self.unique_vectors[self.assignment[doc_id]].indices for doc_id in doc_ids}
        labels = {doc_id: self.labels[doc_id] for doc_id in rows}
        return _assemble(self.lexicon, rows, labels)


def _assemble(lexicon: StemLexicon, rows: Dict[str, Tuple[int, ...]],
              labels: Dict[str, Optional[str]]) -> EncodedCorpus:
    counts: Dict[Tuple[int, ...], int] = {}
    for key in rows.values():
        counts[key] = counts.get(key, 0) + 1

    ordered = sorted(counts)
    index = {key: i for i, key in enumerate(ordered)}
    vectors = tuple(StemVector(indices=key, length=lexicon.size, multiplicity=counts[key]) for key in ordered)
    assignment = {doc_id: index[key] for doc_id, key in rows.items()}
    return EncodedCorpus(
        lexicon=lexicon,
        unique_vectors=vectors,
        assignment=assignment,
        labels=dict(labels),
        doc_ids=tuple(rows),
        zero_vector_docs=counts.get((), 0),
    )


def build_lexicon(docs: Sequence[Document], config: Optional[TokenizerConfig] = None) -> StemLexicon:
    """
    Строит словарь основ по корпусу

    Args:
        docs: Документы
        config: Настройки токенизации

    Returns:
        Словарь основ с частотой не ниже min_df, в лексикографическом порядке
    """
    config = config or TokenizerConfig()
    _check_config(config)
    if not docs:
        raise TextprocError("empty corpus")
    if not any(tokenize(doc.text, config) for doc in docs):
        raise TextprocError("all documents are empty")

    vectorizer = _vectorizer(config)
    try:
        vectorizer.fit([doc.text for doc in docs])
    except ValueError as e:
        raise TextprocError(f"no stems survive min_df={config.min_df}: {e}") from e

    stems = tuple(sorted(vectorizer.get_feature_names_out().tolist()))
    logger.info(f"[textproc] Словарь: {len(stems)} основ по {len(docs)} документам "
                f"(n-граммы {config.ngram_min}..{config.ngram_max}, min_df={config.min_df})")
    return StemLexicon(stems=stems, config=config)


def encode(docs: Sequence[Document], lexicon: StemLexicon) -> EncodedCorpus:
    """
    Кодирует документы бинарными векторами основ и объединяет одинаковые векторы

    Args:
        docs: Документы
        lexicon: Словарь основ

    Returns:
        Закодированный корпус
    """
    vectorizer = _vectorizer(lexicon.config, vocabulary=lexicon.stems)
    matrix = vectorizer.transform([doc.text for doc in docs]).tocsr()
    matrix.sort_indices()

    rows: Dict[str, Tuple[int, ...]] = {}
    labels: Dict[str, Optional[str]] = {}
    for position, doc in enumerate(docs):
        if doc.id in rows:
            raise TextprocError(f"duplicate document id {doc.id!r}")
        start, end = matrix.indptr[position], matrix.indptr[position + 1]
        rows[doc.id] = tuple(int(i) for i in matrix.indices[start:end])
        labels[doc.id] = doc.label

    corpus = _assemble(lexicon, rows, labels)
    if corpus.zero_vector_docs:
        logger.info(f"[textproc] {corpus.zero_vector_docs} документов без основ словаря (нулевой вектор)")
    logger.info(f"[textproc] Закодировано {corpus.n_docs} документов, K={len(corpus.unique_vectors)} уникальных векторов")
    return corpus
