"""Exception and warning types shared across the package.

Everything raised on purpose derives from :class:`TextcastError` so callers
can catch library failures with a single except clause; warnings derive from
the stdlib warning categories as usual.
"""


class TextcastError(Exception):
    """Base class for all errors raised deliberately by this package."""


class ConfigError(TextcastError):
    """Malformed or inconsistent user configuration (CLI exit code 2)."""


class ParseError(TextcastError):
    """An input file could not be parsed; message carries the offending line."""


class GapError(TextcastError):
    """A daily series has missing calendar days between its endpoints."""

    def __init__(self, missing_dates):
        self.missing_dates = list(missing_dates)
        preview = ", ".join(str(d) for d in self.missing_dates[:5])
        if len(self.missing_dates) > 5:
            preview += ", ..."
        super().__init__(
            f"series has {len(self.missing_dates)} missing day(s): {preview}"
        )


class DuplicateError(TextcastError):
    """Two input rows claim the same date where one was expected."""


class DegenerateError(TextcastError):
    """An operation received data it cannot meaningfully process (e.g. a
    constant series where a range is required)."""


class SpecError(TextcastError):
    """An argument violates a documented precondition of the call."""


class ShapeError(TextcastError):
    """Array dimensions do not line up with what the model was fitted on."""


class EmptyVocabError(TextcastError):
    """Vocabulary filters removed every candidate word."""


class CoverageError(TextcastError):
    """No sample was ever out-of-bag, so OOB statistics are undefined."""


class StatsError(TextcastError):
    """Inference-time normalization asked for running statistics before any
    training step populated them."""


class DivergenceError(TextcastError):
    """Training produced a non-finite loss; message names the epoch."""


class EmptySelectionError(TextcastError):
    """A guarded filter removed every sample."""


class ZeroNormError(TextcastError):
    """Cosine distance is undefined for a zero vector."""


class ConvergenceWarning(UserWarning):
    """Iterative optimization stopped at its iteration cap before reaching
    the requested tolerance."""


class DegenerateWarning(UserWarning):
    """A diagnostic was computed on degenerate data and should not be
    over-interpreted."""


class EmptyReportWarning(UserWarning):
    """An interpretability report turned out empty (e.g. an all-zero model)."""
