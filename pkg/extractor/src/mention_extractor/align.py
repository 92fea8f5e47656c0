"""Character-span to word-piece alignment and length-budget windowing.

Alignment is strict: the selected pieces must tile the mention exactly. A
piece that crosses the span boundary, or a mention character no piece
covers, means the tokenization disagrees with the labeled span, and the
caller is expected to skip that record rather than average unrelated
vectors.
"""

from __future__ import annotations


class AlignmentError(ValueError):
    pass


def align_span(offsets, span, text) -> list[int]:
    """Indices of the tokens that exactly cover ``span``.

    ``offsets`` is the tokenizer's per-token (start, end) character mapping.
    Every non-whitespace character of the span must fall inside a selected
    token, and no selected token may extend past the span.
    """
    span_start, span_end = span
    selected = []
    for idx, (tok_start, tok_end) in enumerate(offsets):
        if tok_start == tok_end:  # padding/special slots
            continue
        if tok_start < span_end and tok_end > span_start:
            if tok_start < span_start or tok_end > span_end:
                raise AlignmentError(
                    f"token ({tok_start},{tok_end}) crosses span ({span_start},{span_end})"
                )
            selected.append(idx)
    if not selected:
        raise AlignmentError(f"no tokens inside span ({span_start},{span_end})")

    covered = [False] * (span_end - span_start)
    for idx in selected:
        tok_start, tok_end = offsets[idx]
        for c in range(tok_start, tok_end):
            covered[c - span_start] = True
    for c in range(span_start, span_end):
        if not text[c].isspace() and not covered[c - span_start]:
            raise AlignmentError(
                f"character {c} ({text[c]!r}) of span ({span_start},{span_end}) "
                "is not covered by any token"
            )
    return selected


def choose_window(n_tokens: int, required, center: float, budget: int) -> tuple[int, int]:
    """A [start, end) slice of at most ``budget`` tokens around ``center``
    that contains every index in ``required``.

    Raises AlignmentError when the required indices alone exceed the budget.
    """
    if budget <= 0:
        raise AlignmentError(f"token budget {budget} is not positive")
    if n_tokens <= budget:
        return 0, n_tokens
    lo = min(required)
    hi = max(required) + 1
    if hi - lo > budget:
        raise AlignmentError(
            f"mentions span {hi - lo} tokens, over the {budget}-token budget"
        )
    start = int(round(center - budget / 2))
    start = min(start, lo)  # never cut a mention on the left
    start = max(start, hi - budget)  # nor on the right
    start = max(0, min(start, n_tokens - budget))
    return start, start + budget
