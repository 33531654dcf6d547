"""Text normalization: raw strings to cleaned lowercase token lists.

The pipeline is fixed and total: lowercase, split on any character that is
not a letter, digit, apostrophe, or hyphen, strip leading/trailing
apostrophes and hyphens, drop stopwords, drop empty leftovers. No stemming
or lemmatization; digits and unit-like tokens ("8ft") survive.

The stopword list ships with the package as ``data/stopwords_en.txt`` and
is part of the contract: tests pin its content hash.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

# Maximal runs of unicode letters/digits (no underscore), apostrophes, hyphens.
_TOKEN_RE = re.compile(r"(?:[^\W_]|['-])+", re.UNICODE)

STOPWORDS_RESOURCE = "stopwords_en.txt"


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """The bundled English stopword list (lowercase, one word per line)."""
    text = (
        resources.files("stancekit.data")
        .joinpath(STOPWORDS_RESOURCE)
        .read_text(encoding="utf-8")
    )
    return frozenset(line for line in text.splitlines() if line)


def preprocess(text: str) -> list[str]:
    """Normalize one raw string into a cleaned token list."""
    stops = stopwords()
    tokens = []
    for raw in _TOKEN_RE.findall(text.lower()):
        tok = raw.strip("'-")
        if not tok or tok in stops:
            continue
        tokens.append(tok)
    return tokens
