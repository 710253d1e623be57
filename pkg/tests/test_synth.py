import datetime as dt

import numpy as np
import pytest

from textcast import synth
from textcast.corpus import load_documents, preprocess
from textcast.errors import SpecError
from textcast.pipeline import compute_metrics
from textcast.series import load_series


def test_generate_is_deterministic_per_seed():
    spec = synth.default_spec(n_days=120)
    d1, s1, t1 = synth.generate(spec, seed=7)
    d2, s2, t2 = synth.generate(spec, seed=7)
    assert [(d.date, d.text) for d in d1] == [(d.date, d.text) for d in d2]
    assert np.array_equal(s1.values, s2.values)
    assert t1 == t2
    d3, s3, _ = synth.generate(spec, seed=8)
    assert not np.array_equal(s1.values, s3.values)


def test_weekday_words_track_calendar():
    spec = synth.default_spec(n_days=60)
    docs, _, _ = synth.generate(spec, seed=0)
    names = ("monday", "tuesday", "wednesday", "thursday", "friday")
    for doc in docs:
        tokens = set(doc.text.split())
        dow = doc.date.weekday()
        if dow < 5:
            assert names[dow] in tokens
            assert not tokens & {"saturday", "sunday"}
        else:
            assert ("saturday", "sunday")[dow - 5] in tokens
            assert not tokens & set(names)


def test_seasonal_presence_frequencies():
    spec = synth.default_spec(n_days=2000)
    docs, _, _ = synth.generate(spec, seed=3)
    jan = [d for d in docs if d.date.month == 1]
    jul = [d for d in docs if d.date.month == 7]
    frost_jan = np.mean(["frost" in d.text.split() for d in jan])
    frost_jul = np.mean(["frost" in d.text.split() for d in jul])
    # January sits near the annual peak: p ~ 0.05 + 0.60*~0.99
    assert frost_jan > 0.5 and frost_jul < 0.15
    heat_jan = np.mean(["heatwave" in d.text.split() for d in jan])
    heat_jul = np.mean(["heatwave" in d.text.split() for d in jul])
    assert heat_jul > 0.5 and heat_jan < 0.15


def test_max_doc_frac_headroom():
    # no single word should blast past the default 0.40 document-frequency cap
    spec = synth.default_spec(n_days=2000)
    docs, _, _ = synth.generate(spec, seed=1)
    frac = {}
    for d in docs:
        for w in set(d.text.split()):
            frac[w] = frac.get(w, 0) + 1
    worst = max(frac.values()) / len(docs)
    assert worst <= 0.40


def test_zero_noise_matches_oracle_exactly():
    spec = synth.default_spec(n_days=90, noise_std=0.0)
    docs, series, truth = synth.generate(spec, seed=4)
    for doc, y in zip(docs, series.values):
        want = synth.oracle_predict(doc.text.split(), truth, spec.base_level)
        assert y == want


def test_oracle_r2_near_target():
    spec = synth.default_spec()
    docs, series, truth = synth.generate(spec, seed=0)
    pred = np.array([
        synth.oracle_predict(d.text.split(), truth, spec.base_level) for d in docs
    ])
    m = compute_metrics(series.values, pred)
    assert 0.85 <= m.r2 <= 0.95


def test_tokens_survive_tokenizer():
    # every generated word must round-trip the text preprocessing unchanged
    spec = synth.default_spec(n_days=30)
    docs, _, truth = synth.generate(spec, seed=2)
    for doc in docs:
        assert preprocess(doc.text) == doc.text.split()
    for w in truth:
        assert preprocess(w) == [w]


def test_noise_words_distinct_and_digit_free():
    words = synth.noise_words(140)
    assert len(set(words)) == 140
    assert all(w.isalpha() for w in words)
    with pytest.raises(SpecError):
        synth.noise_words(10**6)


def test_cluster_validation():
    with pytest.raises(SpecError):
        synth.SynthCluster("bad", "lunar", 1.0, ("a",))
    with pytest.raises(SpecError):
        synth.SynthCluster("bad", "noise", 1.0, ("a",))
    with pytest.raises(SpecError):
        synth.SynthCluster("bad", "workday", 1.0, ("a", "b"))
    with pytest.raises(SpecError):  # duplicated word across clusters
        synth.SynthSpec(clusters=(
            synth.SynthCluster("a", "noise", 0.0, ("dup",)),
            synth.SynthCluster("b", "noise", 0.0, ("dup",)),
        ))


def test_spec_dict_round_trip():
    spec = synth.default_spec(n_days=55, target_r2=0.8, peak_doy=20)
    again = synth.spec_from_dict(synth.spec_to_dict(spec))
    assert again == spec
    with pytest.raises(SpecError):
        synth.spec_from_dict({"n_days": 10, "n_dayz": 3})


def test_save_bundle_round_trip(tmp_path):
    spec = synth.default_spec(n_days=40)
    docs, series, truth = synth.generate(spec, seed=5)
    paths = synth.save_bundle(tmp_path, docs, series, truth)
    docs2 = load_documents(paths["documents"])
    series2 = load_series(paths["series"])
    truth2 = synth.load_ground_truth(paths["ground_truth"])
    assert [(d.date, d.text) for d in docs2] == [(d.date, d.text) for d in docs]
    assert np.array_equal(series2.values, series.values)
    assert truth2 == truth


def test_ground_truth_covers_all_clusters():
    spec = synth.default_spec()
    truth = spec.ground_truth()
    assert len(truth) == 100
    assert truth["frost"] == 5.0
    assert truth["heatwave"] == -5.0
    assert truth["monday"] == 2.0
    assert truth["saturday"] == -2.0
    assert all(truth[w] == 0.0 for w in synth.noise_words(83))
