"""textcast: forecast daily scalar time series from dated text documents.

The pipeline: preprocess dated documents, build a frequency-filtered
vocabulary, encode with TF-IDF or trained embeddings, fit lasso / random
forest / MLP / GRU forecasters with grid search and seeded multi-run
summaries, select features by out-of-bag importance, and emit
interpretability reports (signed coefficients, importance rankings, embedding
neighborhoods, norm rankings, selection overlaps).
"""

__version__ = "0.1.0"
