import pytest

from conftest import UNIGRAMS, docs_from, encoded
from swb.config import TokenizerConfig
from swb.errors import TextprocError
from swb.textproc import (Document, StemLexicon, build_lexicon, encode, read_corpus, tokenize,
                          write_corpus)


def pairs(corpus):
    return sorted((v.indices, v.multiplicity) for v in corpus.unique_vectors)


@pytest.mark.parametrize("texts, config, expected", [
    (["a b", "b c"], UNIGRAMS, ("a", "b", "c")),
    (["a b", "b c"], TokenizerConfig(ngram_min=1, ngram_max=1, min_df=2), ("b",)),
    (["x y", "x y"], TokenizerConfig(ngram_min=2, ngram_max=2, min_df=1), ("x y",)),
])
def test_build_lexicon_examples(texts, config, expected):
    lexicon = build_lexicon(docs_from(texts), config)
    assert lexicon.stems == expected


def test_build_lexicon_default_orders_include_bigrams():
    lexicon = build_lexicon(docs_from(["alba chiara", "alba chiara", "sole"]))
    assert lexicon.stems == ("alba", "alba chiara", "chiara")


def test_build_lexicon_rejects_empty_inputs():
    with pytest.raises(TextprocError, match="empty corpus"):
        build_lexicon([], UNIGRAMS)
    with pytest.raises(TextprocError, match="all documents are empty"):
        build_lexicon(docs_from(["", " !? "]), UNIGRAMS)


def test_build_lexicon_rejects_invalid_orders():
    with pytest.raises(TextprocError):
        build_lexicon(docs_from(["a"]), TokenizerConfig(ngram_min=2, ngram_max=1, min_df=1))


def test_tokenize_normalizes_and_casefolds():
    assert tokenize("Ciao, MONDO! é a", UNIGRAMS) == ["ciao", "mondo", "é", "a"]
    assert tokenize("Straße", UNIGRAMS) == ["strasse"]


def test_tokenize_applies_stemmer():
    config = TokenizerConfig(stemmer="english")
    assert tokenize("running runs", config) == ["run", "run"]


def test_unknown_stemmer_language():
    with pytest.raises(TextprocError, match="stemmer"):
        tokenize("text", TokenizerConfig(stemmer="klingon"))


def test_encode_collapses_duplicates():
    corpus = encoded(["a b", "a b"], stems=("a", "b", "c"))
    assert len(corpus.unique_vectors) == 1
    vector = corpus.unique_vectors[0]
    assert vector.bits.tolist() == [1, 1, 0]
    assert vector.multiplicity == 2


def test_encode_distinct_vectors():
    corpus = encoded(["a", "c"], stems=("a", "b", "c"))
    assert [v.bits.tolist() for v in corpus.unique_vectors] == [[1, 0, 0], [0, 0, 1]]


def test_encode_out_of_lexicon_document_is_zero_vector():
    corpus = encoded(["z"], stems=("a", "b", "c"))
    assert len(corpus.unique_vectors) == 1
    assert corpus.unique_vectors[0].bits.tolist() == [0, 0, 0]
    assert corpus.zero_vector_docs == 1


def test_encode_is_order_invariant_and_conserves_documents():
    texts = ["a b", "b", "a", "c a", "b", "zzz", "a b"]
    forward = encoded(texts, stems=("a", "b", "c"))
    backward = encode(list(reversed(docs_from(texts))), forward.lexicon)
    assert pairs(forward) == pairs(backward)
    assert [v.indices for v in forward.unique_vectors] == [v.indices for v in backward.unique_vectors]
    assert sum(v.multiplicity for v in forward.unique_vectors) == len(texts)
    assert all(0 <= i < len(forward.unique_vectors) for i in forward.assignment.values())


def test_encode_carries_labels():
    corpus = encoded(["a", "b"], labels=["A", None])
    assert corpus.labels == {"d0": "A", "d1": None}


def test_subset_recomputes_multiplicities():
    corpus = encoded(["a", "a", "b", "a b"])
    part = corpus.subset(["d0", "d2"])
    assert pairs(part) == [((0,), 1), ((1,), 1)]
    assert part.n_docs == 2


def test_lexicon_save_and_load(tmp_path):
    lexicon = build_lexicon(docs_from(["uno due", "due tre", "uno due"]),
                            TokenizerConfig(ngram_min=1, ngram_max=2, min_df=2))
    path = lexicon.save(tmp_path / "lexicon.txt")
    assert path.read_text(encoding="utf-8").startswith("# swb-lexicon ")
    loaded = StemLexicon.load(path)
    assert loaded.stems == lexicon.stems
    assert loaded.config == lexicon.config


def test_lexicon_load_requires_header(tmp_path):
    path = tmp_path / "plain.txt"
    path.write_text("a\nb\n", encoding="utf-8")
    with pytest.raises(TextprocError, match="header"):
        StemLexicon.load(path)


def test_lexicon_invariants():
    with pytest.raises(TextprocError):
        StemLexicon(stems=("b", "a"))
    with pytest.raises(TextprocError):
        StemLexicon(stems=())


def test_corpus_file_round_trip_and_validation(tmp_path):
    docs = [Document(id="1", text="ciao", label="A"), Document(id="2", text="mondo")]
    path = write_corpus(docs, tmp_path / "corpus.jsonl")
    assert read_corpus(path) == docs

    duplicated = tmp_path / "dup.jsonl"
    duplicated.write_text('{"id": "1", "text": "a"}\n{"id": "1", "text": "b"}\n', encoding="utf-8")
    with pytest.raises(TextprocError, match="duplicate"):
        read_corpus(duplicated)

    broken = tmp_path / "broken.jsonl"
    broken.write_text('{"id": "1"}\n', encoding="utf-8")
    with pytest.raises(TextprocError, match="record 1"):
        read_corpus(broken)


def test_read_corpus_missing_file_names_path(tmp_path):
    with pytest.raises(TextprocError, match="missing.jsonl"):
        read_corpus(tmp_path / "missing.jsonl")
