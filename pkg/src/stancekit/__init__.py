"""Headline/body stance detection pipeline.

TF-IDF vectorization, elbow-truncated SVD, soft cosine similarity, and a
two-stage dense neural classifier over FNC-1-format corpora, with a CLI
(``stancekit``) that archives every fitted artifact in verifiable bundles.

This module stays import-light on purpose: the CLI must be able to pin
BLAS thread pools before numpy loads, so the numeric submodules are only
imported on attribute access.
"""

from __future__ import annotations

__version__ = "1.0.0"

_SUBMODULES = (
    "bundle",
    "cli",
    "corpus",
    "errors",
    "metrics",
    "neuralnet",
    "pipeline",
    "reducer",
    "report",
    "similarity",
    "textprep",
    "vectorizer",
)

__all__ = list(_SUBMODULES)


def __getattr__(name: str):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
