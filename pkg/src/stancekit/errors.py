"""Exception hierarchy shared across the package.

Every error carries a short machine-parsable ``code`` so the CLI can emit
one-line diagnostics like ``stancekit: error [stage=corpus code=duplicate-body-id] ...``.
"""

from __future__ import annotations


class StanceKitError(Exception):
    """Base class for all errors raised by this package."""

    stage = "pipeline"

    def __init__(self, message: str, code: str = "error"):
        super().__init__(message)
        self.code = code


class CorpusError(StanceKitError):
    stage = "corpus"


class TextPrepError(StanceKitError):
    stage = "textprep"


class VectorizerError(StanceKitError):
    stage = "vectorizer"


class ReducerError(StanceKitError):
    stage = "reducer"


class SimilarityError(StanceKitError):
    stage = "similarity"


class NetworkError(StanceKitError):
    stage = "neuralnet"


class TrainingDivergedError(NetworkError):
    pass


class MetricsError(StanceKitError):
    stage = "metrics"


class BundleError(StanceKitError):
    stage = "bundle"


class ConfigError(StanceKitError):
    stage = "config"
