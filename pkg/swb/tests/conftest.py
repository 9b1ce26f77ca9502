import logging

import numpy as np
import pytest

from swb.config import TokenizerConfig
from swb.isa import CategorySet, ConditionalStemMatrix
from swb.rng import PortableRandom
from swb.textproc import Document, StemLexicon, encode

UNIGRAMS = TokenizerConfig(ngram_min=1, ngram_max=1, min_df=1)


@pytest.fixture(autouse=True)
def quiet_logging():
    logging.getLogger("swb").setLevel(logging.WARNING)
    yield
    logging.getLogger("swb").setLevel(logging.NOTSET)


def docs_from(texts, labels=None, prefix="d"):
    labels = labels or [None] * len(texts)
    return [Document(id=f"{prefix}{i}", text=text, label=label) for i, (text, label) in enumerate(zip(texts, labels))]


def encoded(texts, labels=None, stems=("a", "b"), prefix="d"):
    lexicon = StemLexicon(stems=tuple(stems), config=UNIGRAMS)
    return encode(docs_from(texts, labels, prefix), lexicon)


def matrix(values, categories=("A", "B")):
    values = np.asarray(values, dtype=float)
    return ConditionalStemMatrix(
        values=values,
        row_keys=tuple((i,) for i in range(values.shape[0])),
        categories=CategorySet(tuple(categories)),
    )


@pytest.fixture
def rng():
    return PortableRandom(20240601)
