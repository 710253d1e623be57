import datetime as dt
import json

import numpy as np
import pytest

from textcast import corpus
from textcast.errors import (DuplicateError, EmptyVocabError, ParseError,
                             SpecError)


def test_preprocess_lowercases_and_drops_digits_punctuation():
    toks = corpus.preprocess("Cold WIND, 25 degrees... wind_chill -3!")
    assert toks == ["cold", "wind", "degrees", "wind", "chill"]


def test_preprocess_keeps_accented_words():
    toks = corpus.preprocess("Température élevée à Paris")
    assert "température" in toks and "élevée" in toks


def test_preprocess_removes_stopwords():
    stop = frozenset({"the", "a"})
    assert corpus.preprocess("The storm hit a coast", stop) == ["storm", "hit", "coast"]


def test_bundled_stopword_lists_load():
    en = corpus.load_stopwords("en")
    fr = corpus.load_stopwords("fr")
    assert "the" in en and "and" in en
    assert "le" in fr and "et" in fr
    assert all(w == w.lower() for w in en | fr)


def test_load_stopwords_from_path(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("# comment\nfoo\n\nbar\n", encoding="utf-8")
    assert corpus.load_stopwords(str(p)) == frozenset({"foo", "bar"})


def test_build_vocabulary_filters_and_orders(small_docs):
    # "cold" x4 in 3 docs, "storm" x4 in 3, "sun" x5 in 3, "warm" x3 in 2,
    # "wind" x3 in 3, "rain" x3 in 3
    vocab = corpus.build_vocabulary(small_docs, min_count=3, max_doc_frac=1.0)
    assert vocab.words[0] == "sun"  # highest count first
    assert vocab.words[1:3] == ("cold", "storm")  # count ties alphabetical
    assert set(vocab.words) == {"sun", "cold", "storm", "warm", "wind", "rain"}

    vocab2 = corpus.build_vocabulary(small_docs, min_count=4, max_doc_frac=1.0)
    assert set(vocab2.words) == {"sun", "cold", "storm"}

    # doc-fraction cap: words in 3/6 docs excluded at 0.4
    vocab3 = corpus.build_vocabulary(small_docs, min_count=1, max_doc_frac=0.4)
    assert set(vocab3.words) == {"warm"}


def test_build_vocabulary_empty_result_raises(small_docs):
    with pytest.raises(EmptyVocabError):
        corpus.build_vocabulary(small_docs, min_count=100, max_doc_frac=1.0)


def test_vocabulary_ids_are_one_based(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=1, max_doc_frac=1.0)
    assert vocab.id_of(vocab.words[0]) == 1
    assert vocab.word_of(1) == vocab.words[0]
    with pytest.raises(LookupError):
        vocab.id_of("absent")


def test_restrict_vocabulary_keeps_frequency_order(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=1, max_doc_frac=1.0)
    sub = corpus.restrict_vocabulary(vocab, ["wind", "sun", "rain"])
    # sun has the highest count; rain/wind tie at 3 and sort alphabetically
    assert sub.words == ("sun", "rain", "wind")
    with pytest.raises(SpecError):
        corpus.restrict_vocabulary(vocab, ["sun", "absent"])


def test_to_ids_oov_handling(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=4, max_doc_frac=1.0)
    tokens = ["cold", "zebra", "sun"]
    train_seq = corpus.to_ids(tokens, vocab, training=True)
    assert list(train_seq.ids) == [vocab.id_of("cold"), vocab.id_of("sun")]
    infer_seq = corpus.to_ids(tokens, vocab, training=False)
    assert list(infer_seq.ids) == [vocab.id_of("cold"), 0, vocab.id_of("sun")]


def test_pad_batch_pads_and_truncates():
    seqs = [corpus.TokenSequence(np.array([1, 2, 3], dtype=np.int64)),
            corpus.TokenSequence(np.array([4], dtype=np.int64))]
    batch = corpus.pad_batch(seqs, 4)
    assert batch.rows.shape == (2, 4)
    assert list(batch.rows[0]) == [1, 2, 3, 0]
    assert list(batch.rows[1]) == [4, 0, 0, 0]
    clipped = corpus.pad_batch(seqs, 2)
    assert list(clipped.rows[0]) == [1, 2]
    with pytest.raises(SpecError):
        corpus.pad_batch(seqs, 0)


def test_max_sequence_length(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=1, max_doc_frac=1.0)
    seqs = [corpus.to_ids(t, vocab, training=True) for t in small_docs]
    assert corpus.max_sequence_length(seqs) == max(len(t) for t in small_docs)


def test_load_documents_sorts_and_validates(tmp_path):
    p = tmp_path / "docs.jsonl"
    lines = [
        json.dumps({"date": "2020-01-02", "text": "second"}),
        json.dumps({"date": "2020-01-01", "text": "first"}),
    ]
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    docs = corpus.load_documents(p)
    assert [d.date for d in docs] == [dt.date(2020, 1, 1), dt.date(2020, 1, 2)]
    assert docs[0].text == "first"


def test_load_documents_duplicate_date_raises(tmp_path):
    p = tmp_path / "docs.jsonl"
    line = json.dumps({"date": "2020-01-01", "text": "x"})
    p.write_text(line + "\n" + line + "\n", encoding="utf-8")
    with pytest.raises(DuplicateError):
        corpus.load_documents(p)


def test_load_documents_parse_error_names_line(tmp_path):
    p = tmp_path / "docs.jsonl"
    p.write_text('{"date": "2020-01-01", "text": "ok"}\nnot json\n', encoding="utf-8")
    with pytest.raises(ParseError) as err:
        corpus.load_documents(p)
    assert ":2" in str(err.value)


def test_save_documents_round_trip(tmp_path):
    docs = [corpus.RawDocument(dt.date(2020, 1, 1), "hello there"),
            corpus.RawDocument(dt.date(2020, 1, 2), "encore: déjà vu")]
    p = tmp_path / "docs.jsonl"
    corpus.save_documents(p, docs)
    assert corpus.load_documents(p) == docs


def test_content_hash_tracks_word_list(small_docs):
    v1 = corpus.build_vocabulary(small_docs, min_count=1, max_doc_frac=1.0)
    v2 = corpus.build_vocabulary(small_docs, min_count=1, max_doc_frac=1.0)
    v3 = corpus.build_vocabulary(small_docs, min_count=4, max_doc_frac=1.0)
    assert v1.content_hash() == v2.content_hash()
    assert v1.content_hash() != v3.content_hash()


def test_corpus_stats(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=3, max_doc_frac=1.0)
    stats = corpus.corpus_stats(small_docs, vocab)
    assert stats["n_docs"] == 6
    assert stats["vocab_size_unfiltered"] == 6
    assert stats["vocab_size"] == 6
    assert stats["max_length"] == 5
    assert abs(stats["mean_length"] - np.mean([len(t) for t in small_docs])) < 1e-12
