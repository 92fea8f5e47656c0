"""GAP-format corpus handling: TSV parsing, offset validation, label corrections, CV folds.

The GAP file layout is the public 11-column TSV (ID, Text, Pronoun,
Pronoun-offset, A, A-offset, A-coref, B, B-offset, B-coref, URL) with a header
row. Offsets in the files count Unicode code points, which is exactly what
Python string indexing uses, so no unit conversion happens here.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

GAP_COLUMNS = (
    "ID", "Text", "Pronoun", "Pronoun-offset",
    "A", "A-offset", "A-coref",
    "B", "B-offset", "B-coref", "URL",
)

LABELS = ("A", "B", "NEITHER")


class GapParseError(ValueError):
    """Structurally malformed TSV input (bad column count, bad literal)."""


class GapValidationError(ValueError):
    """A row parsed but violates the corpus invariants (offsets, labels)."""


@dataclass(frozen=True)
class GapExample:
    """One corpus row: a pronoun and two candidate names inside a document."""

    id: str
    text: str
    pronoun: str
    pronoun_offset: int
    name_a: str
    a_offset: int
    a_coref: bool
    name_b: str
    b_offset: int
    b_coref: bool
    url: str

    @property
    def label(self) -> str:
        if self.a_coref:
            return "A"
        if self.b_coref:
            return "B"
        return "NEITHER"


@dataclass(frozen=True)
class LabelCorrection:
    id: str
    corrected_label: str  # one of LABELS


def validate_example(ex: GapExample) -> None:
    """Raise GapValidationError if any corpus invariant is violated."""
    fields = (
        ("Pronoun", ex.pronoun, ex.pronoun_offset),
        ("A", ex.name_a, ex.a_offset),
        ("B", ex.name_b, ex.b_offset),
    )
    n = len(ex.text)
    for field, value, offset in fields:
        if not value:
            raise GapValidationError(f"{ex.id}: empty {field} field")
        if offset < 0 or offset + len(value) > n:
            raise GapValidationError(
                f"{ex.id}: {field}-offset {offset} out of range for text of length {n}"
            )
        found = ex.text[offset : offset + len(value)]
        if found != value:
            raise GapValidationError(
                f"{ex.id}: {field} offset mismatch: expected {value!r} at "
                f"{offset}, found {found!r}"
            )
    if ex.a_coref and ex.b_coref:
        raise GapValidationError(f"{ex.id}: A-coref and B-coref are both true")


def _parse_bool(raw: str, line_num: int) -> bool:
    lowered = raw.strip().lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    raise GapParseError(f"line {line_num}: expected TRUE/FALSE, got {raw!r}")


def _parse_int(raw: str, line_num: int, column: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise GapParseError(
            f"line {line_num}: column {column} is not an integer: {raw!r}"
        ) from None


def parse_gap_tsv(raw) -> list[GapExample]:
    """Parse GAP TSV content into validated examples.

    Accepts bytes, a str, or a file object (text or binary). Byte input is
    decoded as UTF-8. The header row is required; a file with only the header
    yields an empty list.
    """
    if hasattr(raw, "read"):
        raw = raw.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    reader = csv.reader(io.StringIO(raw), delimiter="\t", quoting=csv.QUOTE_NONE)
    try:
        header = next(reader)
    except StopIteration:
        raise GapParseError("line 1: missing header row") from None
    if len(header) != len(GAP_COLUMNS) or header[0].strip().lower() != "id":
        raise GapParseError(
            f"line 1: expected {len(GAP_COLUMNS)}-column GAP header, got {header!r}"
        )

    examples = []
    for row in reader:
        n = reader.line_num
        if len(row) != len(GAP_COLUMNS):
            raise GapParseError(
                f"line {n}: expected {len(GAP_COLUMNS)} columns, got {len(row)}"
            )
        ex = GapExample(
            id=row[0],
            text=row[1],
            pronoun=row[2],
            pronoun_offset=_parse_int(row[3], n, "Pronoun-offset"),
            name_a=row[4],
            a_offset=_parse_int(row[5], n, "A-offset"),
            a_coref=_parse_bool(row[6], n),
            name_b=row[7],
            b_offset=_parse_int(row[8], n, "B-offset"),
            b_coref=_parse_bool(row[9], n),
            url=row[10],
        )
        validate_example(ex)
        examples.append(ex)
    return examples


def load_gap_tsv(path) -> list[GapExample]:
    return parse_gap_tsv(Path(path).read_bytes())


def label_to_corefs(label: str) -> tuple[bool, bool]:
    label = label.upper()
    if label not in LABELS:
        raise ValueError(f"unknown label {label!r}, expected one of {LABELS}")
    return label == "A", label == "B"


def apply_corrections(
    examples: list[GapExample], corrections: list[LabelCorrection]
) -> list[GapExample]:
    """Return a copy of the corpus with the listed labels rewritten.

    Every correction id must resolve to an example; unknown ids raise a
    GapValidationError listing all of them. Applying the same corrections
    twice is a no-op.
    """
    by_id = {c.id: c for c in corrections}
    unmatched = set(by_id) - {ex.id for ex in examples}
    if unmatched:
        raise GapValidationError(
            "corrections reference unknown example ids: " + ", ".join(sorted(unmatched))
        )
    out = []
    for ex in examples:
        corr = by_id.get(ex.id)
        if corr is None:
            out.append(ex)
        else:
            a_coref, b_coref = label_to_corefs(corr.corrected_label)
            out.append(replace(ex, a_coref=a_coref, b_coref=b_coref))
    return out


def parse_corrections_tsv(raw) -> list[LabelCorrection]:
    """Parse a two-column (id, label) TSV; label is one of A/B/NEITHER.

    A header row is tolerated: the first row is skipped when its second
    column is not a valid label.
    """
    if hasattr(raw, "read"):
        raw = raw.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    reader = csv.reader(io.StringIO(raw), delimiter="\t", quoting=csv.QUOTE_NONE)
    corrections = []
    for i, row in enumerate(reader):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise GapParseError(
                f"line {reader.line_num}: corrections need 2 columns, got {len(row)}"
            )
        ex_id, label = row[0].strip(), row[1].strip().upper()
        if label not in LABELS:
            if i == 0:  # header row
                continue
            raise GapParseError(
                f"line {reader.line_num}: unknown label {row[1]!r}"
            )
        corrections.append(LabelCorrection(id=ex_id, corrected_label=label))
    return corrections


def load_corrections_tsv(path) -> list[LabelCorrection]:
    return parse_corrections_tsv(Path(path).read_bytes())


def split_folds(examples, k: int, seed: int) -> list[list[int]]:
    """Partition example indices into k folds of near-equal size.

    Indices are shuffled with a seeded generator and dealt round-robin, so
    the result is deterministic for a fixed seed and fold sizes differ by at
    most one.
    """
    n = len(examples)
    if k < 2 or k > n:
        raise ValueError(f"fold count k={k} must satisfy 2 <= k <= {n}")
    order = np.random.default_rng(seed).permutation(n)
    folds: list[list[int]] = [[] for _ in range(k)]
    for j, idx in enumerate(order):
        folds[j % k].append(int(idx))
    return [sorted(fold) for fold in folds]


def folds_to_json(examples: list[GapExample], folds: list[list[int]], *,
                  k: int | None = None, seed: int | None = None) -> str:
    """Serialize folds as example-id lists for reproducibility."""
    payload = {
        "k": len(folds) if k is None else k,
        "seed": seed,
        "folds": [[examples[i].id for i in fold] for fold in folds],
    }
    return json.dumps(payload, indent=2)
