"""Synthetic GAP-format corpora for pipeline validation and demos.

Documents are built token by token so every offset is correct by
construction. The label of each example is encoded in the pronoun surface
form alone, while the candidate names are drawn from a large pool and carry
no signal: with a surface-hashing stub embedder this yields a task where
anonymization provably removes noise rather than information.
"""

from __future__ import annotations

import io

import numpy as np

from .corpus import GapExample, parse_gap_tsv

# pronoun -> class, one masculine and one feminine per class so that gender
# is independent of the label
PRONOUN_CLASSES = {
    "he": 0, "her": 0,
    "she": 1, "him": 1,
    "his": 2, "hers": 2,
}

_CONSONANTS = "bcdfgklmnprstvz"
_VOWELS = "aeiou"

_FILLERS = (
    "met", "saw", "greeted", "thanked", "visited", "called", "joined",
    "at", "the", "near", "old", "market", "station", "library", "harbor",
    "on", "a", "quiet", "busy", "rainy", "bright", "morning", "evening",
    "before", "after", "during", "long", "short", "walk", "meeting",
)


def _random_name(rng: np.random.Generator) -> str:
    n_syllables = int(rng.integers(2, 4))
    parts = []
    for _ in range(n_syllables):
        parts.append(rng.choice(list(_CONSONANTS)))
        parts.append(rng.choice(list(_VOWELS)))
    return "".join(parts).capitalize()


def make_name_pool(size: int, seed: int) -> list[str]:
    """Distinct single-word names, none colliding with the placeholder sets."""
    from .anonymize import PLACEHOLDER_SETS

    reserved = {name for pset in PLACEHOLDER_SETS for name in pset.all_names}
    rng = np.random.default_rng(seed)
    pool: list[str] = []
    seen = set(reserved)
    while len(pool) < size:
        name = _random_name(rng)
        if name in seen:
            continue
        seen.add(name)
        pool.append(name)
    return pool


def make_synthetic_corpus(
    n_examples: int,
    seed: int = 0,
    name_pool_size: int = 200,
) -> list[GapExample]:
    """Examples whose label is determined by the pronoun surface form."""
    rng = np.random.default_rng(seed)
    pool = make_name_pool(name_pool_size, seed=seed + 1)
    pronouns = sorted(PRONOUN_CLASSES)
    examples = []
    for i in range(n_examples):
        name_a, name_b = rng.choice(len(pool), size=2, replace=False)
        name_a, name_b = pool[name_a], pool[name_b]
        pronoun = pronouns[int(rng.integers(len(pronouns)))]
        label = PRONOUN_CLASSES[pronoun]

        tokens = []
        offsets = {}
        filler = lambda: str(rng.choice(_FILLERS))  # noqa: E731
        plan = (
            [filler, ("A", name_a), filler, filler, ("B", name_b), filler, filler]
            + [("P", pronoun), filler, filler, "."]
        )
        pos = 0
        for item in plan:
            if callable(item):
                token = item()
            elif isinstance(item, tuple):
                role, token = item
                offsets[role] = pos
            else:
                token = item
            tokens.append(token)
            pos += len(token) + 1
        text = " ".join(tokens)

        examples.append(
            GapExample(
                id=f"synth-{i:04d}",
                text=text,
                pronoun=pronoun,
                pronoun_offset=offsets["P"],
                name_a=name_a,
                a_offset=offsets["A"],
                a_coref=label == 0,
                name_b=name_b,
                b_offset=offsets["B"],
                b_coref=label == 1,
                url=f"http://example.org/wiki/{name_a}" if rng.random() < 0.5 else "",
            )
        )
    return examples


def corpus_to_tsv(examples: list[GapExample]) -> str:
    """Render examples in the standard 11-column GAP TSV layout."""
    buf = io.StringIO()
    buf.write(
        "ID\tText\tPronoun\tPronoun-offset\tA\tA-offset\tA-coref\tB\tB-offset\tB-coref\tURL\n"
    )
    for ex in examples:
        row = (
            ex.id, ex.text, ex.pronoun, str(ex.pronoun_offset),
            ex.name_a, str(ex.a_offset), "TRUE" if ex.a_coref else "FALSE",
            ex.name_b, str(ex.b_offset), "TRUE" if ex.b_coref else "FALSE",
            ex.url,
        )
        buf.write("\t".join(row))
        buf.write("\n")
    return buf.getvalue()


def write_corpus_tsv(path, examples: list[GapExample]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(corpus_to_tsv(examples))


def self_check(examples: list[GapExample]) -> None:
    """Round-trip the TSV rendering and re-validate every offset."""
    parsed = parse_gap_tsv(corpus_to_tsv(examples))
    assert parsed == examples, "synthetic corpus does not survive a TSV round-trip"
