import datetime as dt

import numpy as np
import pytest

from textcast import corpus, series


@pytest.fixture
def small_docs():
    """Six tokenized documents with a known vocabulary."""
    texts = [
        "cold cold wind storm",
        "warm sun sun sun",
        "cold storm rain",
        "sun rain wind",
        "storm storm cold wind rain",
        "sun warm warm",
    ]
    return [t.split() for t in texts]


@pytest.fixture
def daily_series():
    start = dt.date(2020, 1, 1)
    dates = tuple(start + dt.timedelta(days=i) for i in range(30))
    values = 10.0 + np.arange(30, dtype=np.float64) * 0.5
    return series.TimeSeries(dates, values, "MW")


def make_vocab(tokens_docs, min_count=1, max_doc_frac=1.0):
    return corpus.build_vocabulary(tokens_docs, min_count=min_count,
                                   max_doc_frac=max_doc_frac)
