"""Loading and joining of headline/body CSV files.

The input format is two CSV files: a bodies file with header
``Body ID,articleBody`` and a stances file with header
``Headline,Body ID,Stance`` (or ``Headline,Body ID`` for unlabeled input).
Both are UTF-8, RFC-4180 quoted, and may contain embedded newlines inside
quoted fields. Text is kept raw here; all cleaning happens downstream.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

from .errors import CorpusError

BODIES_HEADER = ["Body ID", "articleBody"]
STANCES_HEADER_LABELED = ["Headline", "Body ID", "Stance"]
STANCES_HEADER_UNLABELED = ["Headline", "Body ID"]


class Stance(enum.Enum):
    """The four stance labels, in fixed class-index order."""

    AGREE = "agree"
    DISAGREE = "disagree"
    DISCUSS = "discuss"
    UNRELATED = "unrelated"

    @property
    def index(self) -> int:
        return STANCE_ORDER.index(self)

    @classmethod
    def parse(cls, text: str) -> "Stance":
        """Case-insensitive parse of one of the four exact label strings."""
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise CorpusError(
                f"unknown stance label {text!r}", code="unknown-stance"
            ) from None

    @classmethod
    def from_index(cls, index: int) -> "Stance":
        return STANCE_ORDER[index]


STANCE_ORDER = (Stance.AGREE, Stance.DISAGREE, Stance.DISCUSS, Stance.UNRELATED)
N_CLASSES = len(STANCE_ORDER)


@dataclass(frozen=True)
class StanceRow:
    """One row of a stances file; ``stance`` is None for unlabeled input."""

    headline: str
    body_id: int
    stance: Stance | None


@dataclass(frozen=True)
class StancePair:
    """A stance row joined with its resolved article body text."""

    headline: str
    body_id: int
    body_text: str
    stance: Stance | None


def _open_rows(path: str | Path, expected_header: list[str], kind: str):
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"{kind} file not found: {path}", code="missing-file")
    with path.open("r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(
                f"{kind} file {path} is empty (missing header)", code="bad-header"
            ) from None
        if header != expected_header:
            raise CorpusError(
                f"{kind} file {path} has header {header!r}, "
                f"expected {expected_header!r}",
                code="bad-header",
            )
        yield from reader


def _parse_body_id(field: str, where: str) -> int:
    try:
        body_id = int(field)
    except ValueError:
        raise CorpusError(
            f"non-integer body id {field!r} in {where}", code="bad-body-id"
        ) from None
    if body_id < 0:
        raise CorpusError(f"negative body id {body_id} in {where}", code="bad-body-id")
    return body_id


def load_bodies(path: str | Path) -> dict[int, str]:
    """Load a bodies CSV into a body-id -> raw article text mapping."""
    bodies: dict[int, str] = {}
    for row in _open_rows(path, BODIES_HEADER, "bodies"):
        if len(row) != 2:
            raise CorpusError(
                f"bodies row has {len(row)} fields, expected 2: {row!r}",
                code="bad-row",
            )
        body_id = _parse_body_id(row[0], str(path))
        if body_id in bodies:
            raise CorpusError(
                f"duplicate body id {body_id} in {path}", code="duplicate-body-id"
            )
        bodies[body_id] = row[1]
    return bodies


def save_bodies(bodies: dict[int, str], path: str | Path) -> None:
    """Write a body table back to CSV (ids in ascending order)."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BODIES_HEADER)
        for body_id in sorted(bodies):
            writer.writerow([body_id, bodies[body_id]])


def load_stances(path: str | Path, labeled: bool = True) -> list[StanceRow]:
    """Load a stances CSV, in file order.

    With ``labeled=True`` the file must carry the three-column header and
    every stance string must parse; otherwise the two-column header is
    required and ``stance`` is None on every row.
    """
    header = STANCES_HEADER_LABELED if labeled else STANCES_HEADER_UNLABELED
    rows: list[StanceRow] = []
    for row in _open_rows(path, header, "stances"):
        if len(row) != len(header):
            raise CorpusError(
                f"stances row has {len(row)} fields, expected {len(header)}: {row!r}",
                code="bad-row",
            )
        body_id = _parse_body_id(row[1], str(path))
        stance = Stance.parse(row[2]) if labeled else None
        rows.append(StanceRow(headline=row[0], body_id=body_id, stance=stance))
    return rows


def save_stances(rows: list[StanceRow], path: str | Path, labeled: bool = True) -> None:
    """Write stance rows back to CSV in the given order."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if labeled:
            writer.writerow(STANCES_HEADER_LABELED)
            for r in rows:
                if r.stance is None:
                    raise CorpusError(
                        "cannot write unlabeled row to a labeled file",
                        code="missing-stance",
                    )
                writer.writerow([r.headline, r.body_id, r.stance.value])
        else:
            writer.writerow(STANCES_HEADER_UNLABELED)
            for r in rows:
                writer.writerow([r.headline, r.body_id])


def join_pairs(stances: list[StanceRow], bodies: dict[int, str]) -> list[StancePair]:
    """Join each stance row with its article body, preserving row order.

    Multiple headlines may reference one body; each resulting pair carries
    its own copy of the resolved body text.
    """
    dangling = sorted({r.body_id for r in stances if r.body_id not in bodies})
    if dangling:
        raise CorpusError(
            f"stance rows reference body ids absent from the body table: {dangling}",
            code="dangling-body-id",
        )
    return [
        StancePair(
            headline=r.headline,
            body_id=r.body_id,
            body_text=bodies[r.body_id],
            stance=r.stance,
        )
        for r in stances
    ]
