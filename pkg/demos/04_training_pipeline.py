"""Full pipeline over stub embeddings, plus the augmentation ablation.

Builds a synthetic corpus whose label is decided by the pronoun surface while
candidate names are drawn from a large pool (pure noise), then compares the
cross-validated log loss of three regimes: no augmentation, augmentation only
in training, and augmentation in training plus test-time averaging.

Run: python3 demos/04_training_pipeline.py   (about 15 seconds)
"""

import tempfile
from pathlib import Path

from gapres import cli, synth

tmp = Path(tempfile.mkdtemp(prefix="pipeline-demo-"))
corpus_path = tmp / "corpus.tsv"
synth.write_corpus_tsv(corpus_path, synth.make_synthetic_corpus(100, seed=7, name_pool_size=300))
print(f"synthetic corpus: 100 examples -> {corpus_path}")


def run(tag, augment_train, tta):
    cfg = cli.config_from_dict(
        {
            "seed": 11,
            "corpus": {"train": str(corpus_path)},
            "augment": {"train": augment_train, "tta": tta},
            "embeddings": {"source": "stub", "dim": 16, "layers": [-1]},
            "cv": {"folds": 5},
            "models": {
                "pair_scorer": {"enabled": False},
                "concat_mlp": {
                    "enabled": True, "layers": [-1], "hidden": [24, 12],
                    "epochs": 80, "batch_size": 32, "learning_rate": 0.5, "seeds": 1,
                },
            },
            "ensemble": {"weights": [1.0], "clip": 0.005},
            "output": {"dir": str(tmp / tag)},
        }
    )
    coverage = cli.cmd_augment(cfg)
    cli.cmd_extract_stub(cfg)
    report = cli.cmd_train(cfg)
    return coverage, report["models"]["concat_mlp"]["log_loss"]


coverage, with_both = run("aug_both", augment_train=True, tta=True)
print(f"augmentation coverage on this corpus: {coverage['applied_fraction']:.0%} applied")

_, train_only = run("aug_train", augment_train=True, tta=False)
_, without = run("plain", augment_train=False, tta=False)

print("\n5-fold CV log loss (same data, same seeds):")
print(f"  no augmentation:             {without:.4f}")
print(f"  augmented training only:     {train_only:.4f}")
print(f"  augmented training + TTA:    {with_both:.4f}")
print("\nanonymizing the names removes exactly the part of the input that")
print("carried no signal here, so both augmented regimes come out ahead.")
print(f"\nartifacts (variants, embeddings, checkpoints, reports): {tmp}")
