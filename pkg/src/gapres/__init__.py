"""Pronoun-resolution toolkit for GAP-style corpora.

Capabilities, each in its own module:

  * :mod:`gapres.corpus`     -- TSV parsing, offset validation, label
    corrections, deterministic cross-validation folds
  * :mod:`gapres.anonymize`  -- name-anonymization augmentation with exact
    offset remapping and test-time-augmentation expansion
  * :mod:`gapres.embeddings` -- mention-embedding file contract, layer
    selection, deterministic stub embedder
  * :mod:`gapres.features`   -- token distances, URL membership, distance
    buckets
  * :mod:`gapres.models`     -- two numpy classifier heads with exact
    gradients, training loop, gradient checking
  * :mod:`gapres.evaluate`   -- TTA/ensemble aggregation, clipping, log loss,
    gender-bias report, bootstrap resampling
  * :mod:`gapres.cli`        -- file-based pipeline commands
"""

from .anonymize import (
    PLACEHOLDER_SETS,
    AugmentedVariant,
    PlaceholderSet,
    SkipReason,
    apply_placeholders,
    check_skip_conditions,
    expand_variants,
    expand_with_tta,
    find_name_occurrences,
    pronoun_gender,
)
from .corpus import (
    GapExample,
    GapParseError,
    GapValidationError,
    LabelCorrection,
    apply_corrections,
    load_gap_tsv,
    parse_gap_tsv,
    split_folds,
)
from .embeddings import (
    EmbeddingRequest,
    EmbeddingStore,
    MentionEmbedding,
    average_subtokens,
    concat_layers,
    load_store,
    stub_embed,
)
from .evaluate import (
    EvalReport,
    bootstrap_score,
    clip_probs,
    gender_report,
    length_histogram,
    log_loss,
    tta_aggregate,
    weighted_ensemble,
)
from .features import bucket_distance, compute_hand_features, name_in_url, token_distance
from .models import ConcatMlpNet, PairScorerNet, TrainConfig, gradient_check, seed_average, train

__version__ = "0.1.0"
