"""Prediction aggregation and scoring: TTA averaging, weighted ensembling,
probability clipping, multi-class log loss, gender-split reporting, bootstrap
resampling, and document-length histograms.

Predictions are length-3 probability rows (A, B, Neither), single rows as
shape-(3,) arrays and sets of rows as shape-(n, 3) matrices. Clipping only
raises tiny components; rows are renormalized once, inside the scorer, which
matches how submission files are consumed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .anonymize import pronoun_gender

CLASS_NAMES = ("A", "B", "NEITHER")


def label_index(label: str) -> int:
    try:
        return CLASS_NAMES.index(label.upper())
    except ValueError:
        raise ValueError(f"unknown class label {label!r}") from None


def tta_aggregate(variant_preds) -> np.ndarray:
    """Mean of the per-variant probability rows, renormalized to sum 1."""
    P = np.atleast_2d(np.asarray(variant_preds, dtype=np.float64))
    if P.size == 0:
        raise ValueError("cannot aggregate an empty prediction list")
    mean = P.mean(axis=0)
    return mean / mean.sum()


def weighted_ensemble(model_preds, weights) -> np.ndarray:
    """Convex combination of per-model predictions (rows or matrices)."""
    weights = np.asarray(weights, dtype=np.float64)
    preds = [np.asarray(p, dtype=np.float64) for p in model_preds]
    if len(preds) != len(weights):
        raise ValueError(f"{len(preds)} models but {len(weights)} weights")
    if np.any(weights < 0):
        raise ValueError("ensemble weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-6:
        raise ValueError(f"ensemble weights sum to {weights.sum()}, expected 1")
    out = np.zeros_like(preds[0])
    for w, p in zip(weights, preds):
        out = out + w * p
    return out


def clip_probs(preds, threshold: float = 0.005) -> np.ndarray:
    """Raise every component below the threshold up to it (idempotent)."""
    if not (0.0 <= threshold < 1.0 / 3.0):
        raise ValueError(f"clip threshold must be in [0, 1/3), got {threshold}")
    return np.maximum(np.asarray(preds, dtype=np.float64), threshold)


def per_row_log_loss(preds, labels) -> np.ndarray:
    """-ln of the (row-renormalized) probability on the true class, per row."""
    P = np.atleast_2d(np.asarray(preds, dtype=np.float64))
    labels = np.asarray(labels)
    if len(P) != len(labels):
        raise ValueError(f"{len(P)} prediction rows vs {len(labels)} labels")
    row_sums = P.sum(axis=1)
    p_true = P[np.arange(len(labels)), labels]
    with np.errstate(divide="ignore", invalid="ignore"):
        normalized = np.where(row_sums > 0, p_true / row_sums, 0.0)
        losses = np.where(normalized > 0, -np.log(normalized), np.inf)
    return losses


def log_loss(preds, labels) -> float:
    """Mean log loss; infinite when any true-class probability is zero."""
    return float(per_row_log_loss(preds, labels).mean())


@dataclass(frozen=True)
class EvalReport:
    overall: float
    feminine: float | None
    masculine: float | None
    bias: float | None  # masculine / feminine
    n_feminine: int
    n_masculine: int
    mean_probs: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "feminine": self.feminine,
            "masculine": self.masculine,
            "bias_m_over_f": self.bias,
            "n_feminine": self.n_feminine,
            "n_masculine": self.n_masculine,
            "mean_probs": {name: p for name, p in zip(CLASS_NAMES, self.mean_probs)},
        }


def gender_report(preds, labels, pronouns) -> EvalReport:
    """Log loss overall and split by pronoun gender, with the M/F bias ratio.

    A gender with no rows gets None for its score, and the bias ratio is None
    unless both subsets are non-empty.
    """
    P = np.atleast_2d(np.asarray(preds, dtype=np.float64))
    labels = np.asarray(labels)
    if not (len(P) == len(labels) == len(pronouns)):
        raise ValueError("predictions, labels and pronouns must align")
    losses = per_row_log_loss(P, labels)
    masc = np.array([pronoun_gender(p) == "masculine" for p in pronouns])

    def subset_mean(mask) -> float | None:
        return float(losses[mask].mean()) if mask.any() else None

    feminine = subset_mean(~masc)
    masculine = subset_mean(masc)
    bias = None
    if feminine is not None and masculine is not None and feminine > 0:
        bias = masculine / feminine
    row_sums = P.sum(axis=1, keepdims=True)
    normalized = np.divide(P, row_sums, out=np.zeros_like(P), where=row_sums > 0)
    return EvalReport(
        overall=float(losses.mean()),
        feminine=feminine,
        masculine=masculine,
        bias=bias,
        n_feminine=int((~masc).sum()),
        n_masculine=int(masc.sum()),
        mean_probs=tuple(normalized.mean(axis=0)),
    )


@dataclass(frozen=True)
class BootstrapSummary:
    mean: float
    std: float
    quantiles: dict[float, float]
    fraction_below_reference: float | None
    reference: float | None
    iterations: int
    sample_size: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "quantiles": {str(q): v for q, v in self.quantiles.items()},
            "fraction_below_reference": self.fraction_below_reference,
            "reference": self.reference,
            "iterations": self.iterations,
            "sample_size": self.sample_size,
            "seed": self.seed,
        }


_QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


def bootstrap_score(
    preds,
    labels,
    sample_size: int = 760,
    iterations: int = 10_000,
    seed: int = 0,
    reference: float | None = None,
) -> BootstrapSummary:
    """Distribution of the log loss over resamples drawn with replacement.

    Iteration i uses its own generator seeded with seed + i, so results do
    not depend on scheduling and any single iteration can be reproduced.
    """
    losses = per_row_log_loss(preds, labels)
    n = len(losses)
    scores = np.empty(iterations)
    for i in range(iterations):
        rng = np.random.default_rng(seed + i)
        rows = rng.integers(0, n, size=sample_size)
        scores[i] = losses[rows].mean()
    fraction = float((scores < reference).mean()) if reference is not None else None
    return BootstrapSummary(
        mean=float(scores.mean()),
        std=float(scores.std()),
        quantiles={q: float(np.quantile(scores, q)) for q in _QUANTILES},
        fraction_below_reference=fraction,
        reference=reference,
        iterations=iterations,
        sample_size=sample_size,
        seed=seed,
    )


def length_histogram(texts, bin_width: int = 100) -> list[tuple[int, int, int]]:
    """Document-length counts as (bin_start, bin_end, count) rows.

    Bins cover [k*w, (k+1)*w) densely from 0 through the longest document;
    an empty corpus yields an empty table.
    """
    if bin_width <= 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    lengths = [len(t) for t in texts]
    if not lengths:
        return []
    n_bins = max(lengths) // bin_width + 1
    counts = [0] * n_bins
    for length in lengths:
        counts[length // bin_width] += 1
    return [(i * bin_width, (i + 1) * bin_width, c) for i, c in enumerate(counts)]


def write_histogram_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["bin_start", "bin_end", "count"])
        for row in rows:
            writer.writerow(row)


# --- submission file: the prediction interchange format

def write_submission(path, ids, preds) -> None:
    P = np.atleast_2d(np.asarray(preds, dtype=np.float64))
    if len(ids) != len(P):
        raise ValueError(f"{len(ids)} ids vs {len(P)} prediction rows")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["ID", "A", "B", "NEITHER"])
        for ex_id, row in zip(ids, P):
            writer.writerow([ex_id, repr(float(row[0])), repr(float(row[1])), repr(float(row[2]))])


def read_submission(path) -> tuple[list[str], np.ndarray]:
    ids = []
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["ID", "A", "B", "NEITHER"]:
            raise ValueError(f"{path}: unexpected submission header {header!r}")
        for row in reader:
            if len(row) != 4:
                raise ValueError(f"{path}: bad submission row {row!r}")
            ids.append(row[0])
            rows.append([float(x) for x in row[1:]])
    return ids, np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, 3))


def write_report_json(path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")
