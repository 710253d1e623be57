import math

import numpy as np
import pytest

from textcast import corpus, encode


def oracle_tfidf(docs, vocab_words, lengths=None):
    """Dict-based reference: tf = count/len, idf = ln(N / (df + 1)).

    ``lengths`` overrides the per-document normalizer (the encoder uses
    in-vocabulary length at fit time, full token count at transform time).
    """
    n = len(docs)
    df = {w: sum(1 for d in docs if w in d) for w in vocab_words}
    idf = {w: math.log(n / (df[w] + 1)) for w in vocab_words}
    out = np.zeros((n, len(vocab_words)))
    for i, d in enumerate(docs):
        length = lengths[i] if lengths is not None else len(d)
        if length == 0:
            continue
        for j, w in enumerate(vocab_words):
            out[i, j] = d.count(w) / length * idf[w]
    return out


def test_fit_matches_oracle_with_in_vocab_lengths(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=3, max_doc_frac=1.0)
    enc = encode.TfidfEncoder(vocab)
    X = enc.fit_transform(small_docs)
    in_vocab_len = [sum(1 for t in d if t in vocab.index) for d in small_docs]
    expected = oracle_tfidf(small_docs, vocab.words, lengths=in_vocab_len)
    assert np.max(np.abs(X - expected)) < 1e-12


def test_transform_uses_full_token_count(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=4, max_doc_frac=1.0)
    enc = encode.TfidfEncoder(vocab).fit(small_docs)
    doc = ["cold", "zebra", "zebra", "sun"]  # 2 OOV tokens dilute tf
    row = enc.transform([doc])[0]
    expected = oracle_tfidf(small_docs + [doc], vocab.words)[-1]
    # idf comes from the 6 fit docs, not 7
    df = {w: sum(1 for d in small_docs if w in d) for w in vocab.words}
    for j, w in enumerate(vocab.words):
        manual = doc.count(w) / len(doc) * math.log(len(small_docs) / (df[w] + 1))
        assert abs(row[j] - manual) < 1e-12
    assert row.shape == (vocab.size,)


def test_idf_can_go_negative_for_ubiquitous_words():
    docs = [["common", "x"], ["common", "y"], ["common", "z"]]
    vocab = corpus.build_vocabulary(docs, min_count=1, max_doc_frac=1.0)
    enc = encode.TfidfEncoder(vocab).fit(docs)
    j = vocab.id_of("common") - 1
    # df = 3, N = 3 -> idf = ln(3/4) < 0, kept as-is
    assert enc.idf_[j] == pytest.approx(math.log(3 / 4))
    X = enc.transform(docs)
    assert X[0, j] < 0.0


def test_fit_transform_differs_from_fit_then_transform_with_oov(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=4, max_doc_frac=1.0)
    docs = [d + ["notinvocab"] for d in small_docs]
    a = encode.TfidfEncoder(vocab).fit_transform(docs)
    b = encode.TfidfEncoder(vocab).fit(docs).transform(docs)
    # same idf, different length normalizer -> rows scale differently
    assert not np.allclose(a, b)
    lens_in = np.array([sum(1 for t in d if t in vocab.index) for d in docs])
    lens_all = np.array([len(d) for d in docs])
    assert np.allclose(a * (lens_in / lens_all)[:, None], b)


def test_zero_length_document_encodes_to_zeros(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=3, max_doc_frac=1.0)
    enc = encode.TfidfEncoder(vocab).fit(small_docs)
    assert np.all(enc.transform([[]])[0] == 0.0)
    assert np.all(enc.transform_one([]) == 0.0)


def test_random_corpora_match_oracle():
    rng = np.random.default_rng(0)
    words = [f"w{chr(97 + i)}" for i in range(12)]
    for _ in range(25):
        n = int(rng.integers(2, 15))
        docs = [list(rng.choice(words, size=rng.integers(1, 20)))
                for _ in range(n)]
        try:
            vocab = corpus.build_vocabulary(docs, min_count=1, max_doc_frac=1.0)
        except Exception:
            continue
        X = encode.TfidfEncoder(vocab).fit_transform(docs)
        expected = oracle_tfidf(docs, vocab.words)
        assert np.max(np.abs(X - expected)) < 1e-12


def test_module_level_helpers_agree_with_encoder(small_docs):
    vocab = corpus.build_vocabulary(small_docs, min_count=3, max_doc_frac=1.0)
    fitted = encode.fit_tfidf(small_docs, vocab)
    enc = encode.TfidfEncoder(vocab).fit(small_docs)
    assert np.allclose(fitted.rows, enc.fit_transform(small_docs))
    vec = encode.transform_tfidf(["cold", "sun", "qqq"], fitted)
    assert np.allclose(vec, enc.transform_one(["cold", "sun", "qqq"]))


def test_export_matrix_is_deterministic(tmp_path, small_docs):
    import datetime as dt
    vocab = corpus.build_vocabulary(small_docs, min_count=3, max_doc_frac=1.0)
    fitted = encode.fit_tfidf(small_docs, vocab)
    dates = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(len(small_docs))]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    encode.export_matrix(p1, fitted.rows, vocab, dates)
    encode.export_matrix(p2, fitted.rows, vocab, dates)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == "date," + ",".join(vocab.words)
