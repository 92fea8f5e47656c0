"""Name-anonymization augmentation with exact character-offset remapping.

Each example expands into up to five variants: the original document plus one
rewrite per placeholder-name set, where every occurrence of candidate names A
and B is replaced by a common first name of the matching gender. A rewrite is
skipped when it would be unsafe:

  * ``placeholder_in_text``     -- a placeholder of the selected pair already
                                   occurs in the document, so replacement would
                                   conflate two people
  * ``partial_name_elsewhere``  -- a two-word candidate's first or last name
                                   also occurs alone, so replacing only the
                                   full mentions would break the chain
  * ``long_name``               -- a candidate has more than two words
  * ``nested_candidates``       -- one candidate is a substring of the other
                                   (or their occurrence spans collide), which
                                   is almost always tagging noise

All functions are pure; name matching is case-sensitive and whole-word, where
a word is a maximal run of letters, apostrophes, and hyphens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .corpus import GapExample

MASCULINE_PRONOUNS = frozenset({"he", "him", "his"})


class SkipReason(str, Enum):
    PLACEHOLDER_IN_TEXT = "placeholder_in_text"
    PARTIAL_NAME_ELSEWHERE = "partial_name_elsewhere"
    LONG_NAME = "long_name"
    NESTED_CANDIDATES = "nested_candidates"


@dataclass(frozen=True)
class PlaceholderSet:
    """One (feminine pair, masculine pair) of replacement first names."""

    set_id: int
    feminine: tuple[str, str]  # (name for A, name for B)
    masculine: tuple[str, str]

    def pair_for(self, pronoun: str) -> tuple[str, str]:
        if pronoun_gender(pronoun) == "masculine":
            return self.masculine
        return self.feminine

    @property
    def all_names(self) -> tuple[str, str, str, str]:
        return self.feminine + self.masculine


PLACEHOLDER_SETS: tuple[PlaceholderSet, ...] = (
    PlaceholderSet(0, ("Alice", "Kate"), ("John", "Michael")),
    PlaceholderSet(1, ("Elizabeth", "Mary"), ("James", "Henry")),
    PlaceholderSet(2, ("Kate", "Elizabeth"), ("Michael", "James")),
    PlaceholderSet(3, ("Mary", "Alice"), ("Henry", "John")),
)


@dataclass(frozen=True)
class AugmentedVariant:
    """One rewrite of an example (variant 0 is always the untouched original)."""

    variant_id: int  # 0 = original, 1..4 = placeholder set 0..3
    text: str
    pronoun: str
    pronoun_offset: int
    name_a: str
    a_offset: int
    name_b: str
    b_offset: int
    applied: bool
    skip_reasons: frozenset[SkipReason]


def pronoun_gender(pronoun: str) -> str:
    """'masculine' for he/him/his (any casing), 'feminine' otherwise."""
    return "masculine" if pronoun.lower() in MASCULINE_PRONOUNS else "feminine"


def _is_word_char(ch: str) -> bool:
    return ch.isalpha() or ch in "'’-"


def find_whole_word(text: str, needle: str) -> list[tuple[int, int]]:
    """Case-sensitive whole-word occurrences of needle, non-overlapping."""
    spans = []
    i = 0
    n = len(needle)
    while True:
        i = text.find(needle, i)
        if i < 0:
            break
        before_ok = i == 0 or not _is_word_char(text[i - 1])
        after_ok = i + n == len(text) or not _is_word_char(text[i + n])
        if before_ok and after_ok:
            spans.append((i, i + n))
            i += n
        else:
            i += 1
    return spans


def _name_spans(text: str, name: str) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Spans of full occurrences of name, plus lone first/last-word spans.

    Lone spans only exist for two-word names and never overlap a full span.
    """
    full = find_whole_word(text, name)
    words = name.split()
    lone: list[tuple[int, int]] = []
    if len(words) == 2:
        parts = [words[0]]
        if words[1] != words[0]:
            parts.append(words[1])
        for part in parts:
            for span in find_whole_word(text, part):
                if not any(_overlaps(span, f) for f in full):
                    lone.append(span)
    return full, sorted(set(lone))


def find_name_occurrences(
    text: str, name_a: str, name_b: str
) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Whole-word occurrence spans per candidate name, sorted by start.

    For a two-word name the result also contains spans where its first or
    last word occurs alone (those spans are shorter than the full name).
    """
    out = []
    for name in (name_a, name_b):
        full, lone = _name_spans(text, name)
        out.append(sorted(set(full) | set(lone)))
    return out[0], out[1]


def _overlaps(s1: tuple[int, int], s2: tuple[int, int]) -> bool:
    return s1[0] < s2[1] and s2[0] < s1[1]


def _replacement_spans(example: GapExample) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Full-name spans to rewrite per candidate, labeled span included.

    The labeled offset is unioned in even if it fails the whole-word scan,
    so an applied rewrite always covers the mention the labels point at.
    """
    spans = []
    for name, offset in ((example.name_a, example.a_offset), (example.name_b, example.b_offset)):
        full, _ = _name_spans(example.text, name)
        labeled = (offset, offset + len(name))
        if labeled not in full:
            full.append(labeled)
        spans.append(sorted(set(full)))
    return spans[0], spans[1]


def check_skip_conditions(
    example: GapExample,
    pset: PlaceholderSet,
    *,
    check_all_set_names: bool = False,
) -> frozenset[SkipReason]:
    """Reasons why this placeholder set must not be applied (empty = safe).

    By default only the gender-selected pair is searched for collisions;
    ``check_all_set_names`` widens the search to all four names of the set.
    """
    reasons = set()

    watched = pset.all_names if check_all_set_names else pset.pair_for(example.pronoun)
    if any(find_whole_word(example.text, name) for name in watched):
        reasons.add(SkipReason.PLACEHOLDER_IN_TEXT)

    for name in (example.name_a, example.name_b):
        words = name.split()
        if len(words) > 2:
            reasons.add(SkipReason.LONG_NAME)
        elif len(words) == 2:
            _, lone = _name_spans(example.text, name)
            if lone:
                reasons.add(SkipReason.PARTIAL_NAME_ELSEWHERE)

    if example.name_a in example.name_b or example.name_b in example.name_a:
        reasons.add(SkipReason.NESTED_CANDIDATES)
    else:
        # Fail safe for tagging noise: colliding rewrite spans, or a name
        # span that would swallow the pronoun, behave like nested candidates.
        spans_a, spans_b = _replacement_spans(example)
        pronoun_span = (example.pronoun_offset, example.pronoun_offset + len(example.pronoun))
        merged = sorted(spans_a + spans_b)
        collision = any(_overlaps(merged[i], merged[i + 1]) for i in range(len(merged) - 1))
        if collision or any(_overlaps(s, pronoun_span) for s in merged):
            reasons.add(SkipReason.NESTED_CANDIDATES)

    return frozenset(reasons)


def apply_placeholders(example: GapExample, pset: PlaceholderSet) -> AugmentedVariant:
    """Rewrite every occurrence of both candidate names with the set's pair.

    Caller must have verified check_skip_conditions() is empty. All three
    offsets are shifted by the cumulative length change of rewrites occurring
    strictly before them; the output is re-checked against the substring
    invariants before being returned.
    """
    repl_a, repl_b = pset.pair_for(example.pronoun)
    spans_a, spans_b = _replacement_spans(example)
    edits = sorted(
        [(s, e, repl_a) for s, e in spans_a] + [(s, e, repl_b) for s, e in spans_b]
    )
    for (s1, e1, _), (s2, e2, _) in zip(edits, edits[1:]):
        if s2 < e1:
            raise ValueError(
                f"{example.id}: overlapping candidate spans ({s1},{e1}) and ({s2},{e2})"
            )

    pieces = []
    cursor = 0
    new_starts = {}
    delta = 0
    for s, e, repl in edits:
        pieces.append(example.text[cursor:s])
        pieces.append(repl)
        new_starts[(s, e)] = s + delta
        delta += len(repl) - (e - s)
        cursor = e
    pieces.append(example.text[cursor:])
    new_text = "".join(pieces)

    def remap(pos: int) -> int:
        shift = 0
        for s, e, repl in edits:
            if e <= pos:
                shift += len(repl) - (e - s)
            else:
                break
        return pos + shift

    variant = AugmentedVariant(
        variant_id=pset.set_id + 1,
        text=new_text,
        pronoun=example.pronoun,
        pronoun_offset=remap(example.pronoun_offset),
        name_a=repl_a,
        a_offset=new_starts[(example.a_offset, example.a_offset + len(example.name_a))],
        name_b=repl_b,
        b_offset=new_starts[(example.b_offset, example.b_offset + len(example.name_b))],
        applied=True,
        skip_reasons=frozenset(),
    )
    _check_variant(example, variant)
    return variant


def _check_variant(example: GapExample, v: AugmentedVariant) -> None:
    for field, value, offset in (
        ("pronoun", v.pronoun, v.pronoun_offset),
        ("name_a", v.name_a, v.a_offset),
        ("name_b", v.name_b, v.b_offset),
    ):
        if v.text[offset : offset + len(value)] != value:
            raise RuntimeError(
                f"{example.id} variant {v.variant_id}: {field} lost during rewrite"
            )


def original_variant(example: GapExample) -> AugmentedVariant:
    return AugmentedVariant(
        variant_id=0,
        text=example.text,
        pronoun=example.pronoun,
        pronoun_offset=example.pronoun_offset,
        name_a=example.name_a,
        a_offset=example.a_offset,
        name_b=example.name_b,
        b_offset=example.b_offset,
        applied=False,
        skip_reasons=frozenset(),
    )


def _skipped_variant(example: GapExample, pset: PlaceholderSet,
                     reasons: frozenset[SkipReason]) -> AugmentedVariant:
    base = original_variant(example)
    return AugmentedVariant(
        variant_id=pset.set_id + 1,
        text=base.text,
        pronoun=base.pronoun,
        pronoun_offset=base.pronoun_offset,
        name_a=base.name_a,
        a_offset=base.a_offset,
        name_b=base.name_b,
        b_offset=base.b_offset,
        applied=False,
        skip_reasons=reasons,
    )


def expand_variants(
    example: GapExample, *, check_all_set_names: bool = False
) -> list[AugmentedVariant]:
    """All five variant slots: the original plus one record per placeholder set.

    Skipped sets come back with ``applied=False`` and their reasons, original
    text and offsets untouched.
    """
    out = [original_variant(example)]
    for pset in PLACEHOLDER_SETS:
        reasons = check_skip_conditions(example, pset, check_all_set_names=check_all_set_names)
        if reasons:
            out.append(_skipped_variant(example, pset, reasons))
        else:
            out.append(apply_placeholders(example, pset))
    return out


def expand_with_tta(
    example: GapExample, *, check_all_set_names: bool = False
) -> list[AugmentedVariant]:
    """The usable variants for training or TTA: original + applied rewrites (1-5)."""
    return [
        v
        for v in expand_variants(example, check_all_set_names=check_all_set_names)
        if v.variant_id == 0 or v.applied
    ]


# --- variants file (JSON Lines), the contract consumed by embedding extractors

def variant_to_record(example_id: str, v: AugmentedVariant) -> dict:
    return {
        "id": example_id,
        "variant": v.variant_id,
        "applied": v.applied,
        "skip_reasons": sorted(r.value for r in v.skip_reasons),
        "text": v.text,
        "pronoun_offset": v.pronoun_offset,
        "a_offset": v.a_offset,
        "b_offset": v.b_offset,
        "pronoun": v.pronoun,
        "name_a": v.name_a,
        "name_b": v.name_b,
    }


def record_to_variant(rec: dict) -> tuple[str, AugmentedVariant]:
    v = AugmentedVariant(
        variant_id=int(rec["variant"]),
        text=rec["text"],
        pronoun=rec["pronoun"],
        pronoun_offset=int(rec["pronoun_offset"]),
        name_a=rec["name_a"],
        a_offset=int(rec["a_offset"]),
        name_b=rec["name_b"],
        b_offset=int(rec["b_offset"]),
        applied=bool(rec["applied"]),
        skip_reasons=frozenset(SkipReason(r) for r in rec.get("skip_reasons", [])),
    )
    return str(rec["id"]), v


def write_variants_jsonl(path, expanded: dict[str, list[AugmentedVariant]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for example_id, variants in expanded.items():
            for v in variants:
                f.write(json.dumps(variant_to_record(example_id, v), ensure_ascii=False))
                f.write("\n")


def read_variants_jsonl(path) -> dict[str, list[AugmentedVariant]]:
    expanded: dict[str, list[AugmentedVariant]] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            example_id, v = record_to_variant(json.loads(line))
            expanded.setdefault(example_id, []).append(v)
    return expanded


def coverage_summary(
    examples: list[GapExample], *, check_all_set_names: bool = False
) -> dict:
    """Corpus-level augmentation coverage: per-set applied rate and skip rates."""
    n = len(examples)
    per_set_applied = [0] * len(PLACEHOLDER_SETS)
    per_set_collision = [0] * len(PLACEHOLDER_SETS)
    reason_counts = {reason: 0 for reason in SkipReason}
    fully = 0
    partially = 0
    for ex in examples:
        applied_sets = 0
        example_reasons = set()
        for pset in PLACEHOLDER_SETS:
            reasons = check_skip_conditions(ex, pset, check_all_set_names=check_all_set_names)
            example_reasons |= reasons
            if not reasons:
                per_set_applied[pset.set_id] += 1
                applied_sets += 1
            if SkipReason.PLACEHOLDER_IN_TEXT in reasons:
                per_set_collision[pset.set_id] += 1
        for reason in example_reasons:
            reason_counts[reason] += 1
        if applied_sets == len(PLACEHOLDER_SETS):
            fully += 1
        if applied_sets > 0:
            partially += 1

    def frac(count: int) -> float:
        return count / n if n else 0.0

    return {
        "examples": n,
        "applied_fraction": frac(sum(per_set_applied) / len(PLACEHOLDER_SETS)),
        "per_set_applied": [frac(c) for c in per_set_applied],
        "per_set_placeholder_in_text": [frac(c) for c in per_set_collision],
        "skip_rates": {reason.value: frac(reason_counts[reason]) for reason in SkipReason},
        "all_sets_applied_fraction": frac(fully),
        "any_set_applied_fraction": frac(partially),
    }
