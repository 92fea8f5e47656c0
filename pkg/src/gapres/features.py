"""Non-embedding features for the pair-scoring model.

Distances count whitespace tokens so they can be computed without any
tokenizer; URL membership is evaluated against the original candidate names
(not placeholder rewrites), which keeps the features stable across augmented
variants of the same example.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field

import numpy as np

from .anonymize import AugmentedVariant
from .corpus import GapExample

# |distance| buckets 0,1,2,3,4,5-7,8-15,16-31,32-63,64+
_BUCKET_UPPER_BOUNDS = (0, 1, 2, 3, 4, 7, 15, 31, 63)
N_DISTANCE_BUCKETS = len(_BUCKET_UPPER_BOUNDS) + 1


@dataclass(frozen=True)
class HandFeatures:
    dist_a: int
    dist_b: int
    a_in_url: bool
    b_in_url: bool
    bucketed_dist_a: int
    bucketed_dist_b: int
    linguistic: np.ndarray = field(default_factory=lambda: np.zeros(0))


def token_distance(text: str, span1: tuple[int, int], span2: tuple[int, int]) -> int:
    """Signed count of whitespace tokens strictly between two spans.

    Positive when span1 precedes span2, negative when it follows, zero when
    they overlap.
    """
    (s1, e1), (s2, e2) = span1, span2
    if s1 < e2 and s2 < e1:
        return 0
    if s1 <= s2:
        return len(text[e1:s2].split())
    return -len(text[e2:s1].split())


def _word_tokens(s: str) -> list[str]:
    return re.findall(r"[^\W_]+", s.lower())


def name_in_url(name: str, url: str) -> bool:
    """True iff every word of the name occurs as a whole word in the URL.

    Underscores in the URL are treated as spaces (the usual wiki-style
    separator); matching is case-insensitive.
    """
    if not url:
        return False
    name_words = _word_tokens(name)
    if not name_words:
        return False
    url_words = set(_word_tokens(url.replace("_", " ")))
    return all(w in url_words for w in name_words)


def bucket_distance(dist: int) -> int:
    """Bucket id of |dist|; the sign is carried separately as a feature bit."""
    magnitude = abs(dist)
    for bucket, upper in enumerate(_BUCKET_UPPER_BOUNDS):
        if magnitude <= upper:
            return bucket
    return N_DISTANCE_BUCKETS - 1


class ZeroLinguisticFeatures:
    """Default provider: a fixed-size zero vector (dimension 0 disables it)."""

    def __init__(self, dim: int = 0):
        self.dim = dim

    def __call__(self, example: GapExample, variant: AugmentedVariant) -> np.ndarray:
        return np.zeros(self.dim)


def compute_hand_features(
    example: GapExample,
    variant: AugmentedVariant,
    linguistic_provider=None,
) -> HandFeatures:
    """Features of one (example, variant): distances from the variant's spans,
    URL membership from the example's original names."""
    a_span = (variant.a_offset, variant.a_offset + len(variant.name_a))
    b_span = (variant.b_offset, variant.b_offset + len(variant.name_b))
    p_span = (variant.pronoun_offset, variant.pronoun_offset + len(variant.pronoun))
    dist_a = token_distance(variant.text, a_span, p_span)
    dist_b = token_distance(variant.text, b_span, p_span)
    provider = linguistic_provider or ZeroLinguisticFeatures()
    return HandFeatures(
        dist_a=dist_a,
        dist_b=dist_b,
        a_in_url=name_in_url(example.name_a, example.url),
        b_in_url=name_in_url(example.name_b, example.url),
        bucketed_dist_a=bucket_distance(dist_a),
        bucketed_dist_b=bucket_distance(dist_b),
        linguistic=np.asarray(provider(example, variant), dtype=np.float64),
    )


def candidate_feature_vector(features: HandFeatures, candidate: str) -> np.ndarray:
    """Numeric feature block for one candidate: bucket one-hot, sign bit, URL bit."""
    if candidate == "a":
        bucket, dist, in_url = features.bucketed_dist_a, features.dist_a, features.a_in_url
    elif candidate == "b":
        bucket, dist, in_url = features.bucketed_dist_b, features.dist_b, features.b_in_url
    else:
        raise ValueError(f"candidate must be 'a' or 'b', got {candidate!r}")
    vec = np.zeros(N_DISTANCE_BUCKETS + 2 + len(features.linguistic))
    vec[bucket] = 1.0
    vec[N_DISTANCE_BUCKETS] = 1.0 if dist >= 0 else 0.0
    vec[N_DISTANCE_BUCKETS + 1] = 1.0 if in_url else 0.0
    if len(features.linguistic):
        vec[N_DISTANCE_BUCKETS + 2 :] = features.linguistic
    return vec


def feature_vector_dim(linguistic_dim: int = 0) -> int:
    return N_DISTANCE_BUCKETS + 2 + linguistic_dim


def write_features_csv(path, rows) -> None:
    """Inspection dump: one row per (example, variant) with the scalar features."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["id", "variant", "dist_a", "dist_b", "bucket_a", "bucket_b", "a_in_url", "b_in_url"]
        )
        for example_id, variant_id, feats in rows:
            writer.writerow(
                [
                    example_id,
                    variant_id,
                    feats.dist_a,
                    feats.dist_b,
                    feats.bucketed_dist_a,
                    feats.bucketed_dist_b,
                    int(feats.a_in_url),
                    int(feats.b_in_url),
                ]
            )
