"""Scoring utilities: clipping, gender-split report, bootstrap, length table.

Run: python3 demos/05_evaluation_tools.py
"""

import numpy as np

from gapres.evaluate import (
    bootstrap_score,
    clip_probs,
    gender_report,
    length_histogram,
    log_loss,
    tta_aggregate,
    weighted_ensemble,
)

rng = np.random.default_rng(0)

# five per-variant predictions for one example, averaged into one row
variant_rows = rng.dirichlet([6, 3, 1], size=5)
print("TTA average of 5 variant predictions:", np.round(tta_aggregate(variant_rows), 3))

# two models blended 0.9 / 0.1
model_a = rng.dirichlet([6, 3, 1], size=4)
model_b = rng.dirichlet([4, 4, 2], size=4)
blend = weighted_ensemble([model_a, model_b], [0.9, 0.1])
print("ensemble rows still sum to 1:", np.round(blend.sum(axis=1), 6))

# clipping rescues confidently-wrong rows without disturbing the rest
preds = np.array([[0.999, 0.0005, 0.0005]] * 9 + [[0.0005, 0.999, 0.0005]])
labels = np.zeros(10, dtype=int)  # the last row is confidently wrong
print(f"\nlog loss raw:     {log_loss(preds, labels):.4f}")
print(f"log loss clipped: {log_loss(clip_probs(preds, 0.005), labels):.4f}")

# gender-split scoring: one masculine subset, one feminine subset
n = 400
pronouns = ["he"] * (n // 2) + ["she"] * (n // 2)
labels = rng.integers(0, 3, size=n)
noise = rng.dirichlet([2, 2, 2], size=n)
sharp = np.eye(3)[labels] * 0.7 + noise * 0.3
sharp[: n // 2] = 0.9 * sharp[: n // 2] + 0.1 * noise[: n // 2]  # masculine rows noisier
report = gender_report(sharp, labels, pronouns)
print(f"\noverall {report.overall:.4f} | F {report.feminine:.4f} | "
      f"M {report.masculine:.4f} | bias M/F {report.bias:.2f}")
print("mean predicted probabilities:", np.round(report.mean_probs, 3))

# how stable is a score on a 760-row test set? resample and see
summary = bootstrap_score(sharp, labels, sample_size=760, iterations=2000, seed=1,
                          reference=report.overall - 0.05)
print(f"\nbootstrap: mean {summary.mean:.4f} +/- {summary.std:.4f}, "
      f"5%..95% = {summary.quantiles[0.05]:.4f}..{summary.quantiles[0.95]:.4f}")
print(f"fraction of resamples beating a score 0.05 lower: "
      f"{summary.fraction_below_reference:.4f}")

# document-length table, the input for distribution plots
texts = ["x" * int(200 + 500 * rng.random() ** 2) for _ in range(300)]
rows = length_histogram(texts, bin_width=100)
print("\nlength histogram (start, end, count):")
for lo, hi, count in rows:
    print(f"  [{lo:4d},{hi:4d}) {'#' * (count // 4)} {count}")
