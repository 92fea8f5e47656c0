"""Pipeline orchestration and command-line entry point.

Subcommands run the full flow over files in a declared output directory:

    augment         corpus TSV -> variants JSONL + coverage report
    extract-stub    variants JSONL -> stub embeddings JSONL
    train           k-fold training -> checkpoints, OOF predictions, CV report
    predict         checkpoints -> TTA + seed/fold-averaged, ensembled,
                    clipped submission CSV
    evaluate        submission CSV + corpus labels -> score report JSON
    bootstrap       submission CSV + corpus labels -> resampling summary JSON
    report-lengths  corpus TSV -> document-length histogram CSV

Configuration lives in a TOML file (see README for the schema); --seed,
--layers, --weights, --clip and --out override it from the command line.
Exit codes: 0 success, 2 validation/config error, 3 missing input artifact.
"""

from __future__ import annotations

import argparse
import json
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import anonymize, corpus, embeddings, evaluate, features, models

# weight vectors align with the enabled subset of this order
MODEL_ORDER = ("pair_scorer", "concat_mlp")


class ConfigError(ValueError):
    pass


class MissingArtifactError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    enabled: bool = True
    layers: tuple[int, ...] = (-4,)
    hidden: tuple[int, ...] = (512, 32)  # pair_scorer uses hidden[0]
    seeds: int = 1
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3


@dataclass(frozen=True)
class PipelineConfig:
    train_corpus: str
    predict_corpus: str | None = None
    corrections: str | None = None
    augment_train: bool = True
    tta: bool = True
    check_all_set_names: bool = False
    embedding_source: str = "stub"  # "stub" or a store path
    stub_dim: int = 16
    stub_layers: tuple[int, ...] = (-3, -4)
    folds: int = 5
    model_specs: dict[str, ModelSpec] = field(default_factory=dict)
    ensemble_weights: tuple[float, ...] = ()
    clip_threshold: float = 0.005
    out_dir: str = "out"
    seed: int = 0
    bootstrap_sample_size: int = 760
    bootstrap_iterations: int = 10_000
    bootstrap_reference: float | None = None
    histogram_bin_width: int = 100


_MODEL_DEFAULTS = {
    "pair_scorer": ModelSpec(layers=(-4,), hidden=(150,), seeds=5),
    "concat_mlp": ModelSpec(layers=(-3, -4), hidden=(512, 32), seeds=1),
}


def _model_spec(name: str, raw: dict) -> ModelSpec:
    spec = _MODEL_DEFAULTS[name]
    hidden = raw.get("hidden", spec.hidden)
    if isinstance(hidden, int):
        hidden = (hidden,)
    return ModelSpec(
        enabled=bool(raw.get("enabled", spec.enabled)),
        layers=tuple(int(l) for l in raw.get("layers", spec.layers)),
        hidden=tuple(int(h) for h in hidden),
        seeds=int(raw.get("seeds", spec.seeds)),
        epochs=int(raw.get("epochs", spec.epochs)),
        batch_size=int(raw.get("batch_size", spec.batch_size)),
        learning_rate=float(raw.get("learning_rate", spec.learning_rate)),
    )


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError:
        raise MissingArtifactError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> PipelineConfig:
    corpus_cfg = raw.get("corpus", {})
    if "train" not in corpus_cfg:
        raise ConfigError("config is missing corpus.train")
    augment_cfg = raw.get("augment", {})
    emb_cfg = raw.get("embeddings", {})
    ensemble_cfg = raw.get("ensemble", {})
    model_specs = {
        name: _model_spec(name, raw.get("models", {}).get(name, {})) for name in MODEL_ORDER
    }
    enabled = [name for name in MODEL_ORDER if model_specs[name].enabled]
    if not enabled:
        raise ConfigError("no models enabled")
    default_weights = {1: (1.0,), 2: (0.9, 0.1)}[len(enabled)]
    weights = tuple(float(w) for w in ensemble_cfg.get("weights", default_weights))
    if len(weights) != len(enabled):
        raise ConfigError(
            f"{len(weights)} ensemble weights for {len(enabled)} enabled models"
        )
    if abs(sum(weights) - 1.0) > 1e-6:
        raise ConfigError(f"ensemble weights sum to {sum(weights)}, expected 1")
    boot_cfg = raw.get("bootstrap", {})
    cfg = PipelineConfig(
        train_corpus=str(corpus_cfg["train"]),
        predict_corpus=corpus_cfg.get("predict"),
        corrections=corpus_cfg.get("corrections"),
        augment_train=bool(augment_cfg.get("train", True)),
        tta=bool(augment_cfg.get("tta", True)),
        check_all_set_names=bool(augment_cfg.get("check_all_set_names", False)),
        embedding_source=str(emb_cfg.get("source", "stub")),
        stub_dim=int(emb_cfg.get("dim", 16)),
        stub_layers=tuple(int(l) for l in emb_cfg.get("layers", (-3, -4))),
        folds=int(raw.get("cv", {}).get("folds", 5)),
        model_specs=model_specs,
        ensemble_weights=weights,
        clip_threshold=float(ensemble_cfg.get("clip", 0.005)),
        out_dir=str(raw.get("output", {}).get("dir", "out")),
        seed=int(raw.get("seed", 0)),
        bootstrap_sample_size=int(boot_cfg.get("sample_size", 760)),
        bootstrap_iterations=int(boot_cfg.get("iterations", 10_000)),
        bootstrap_reference=boot_cfg.get("reference"),
        histogram_bin_width=int(raw.get("report", {}).get("bin_width", 100)),
    )
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: PipelineConfig) -> None:
    if not (0.0 <= cfg.clip_threshold < 1.0 / 3.0):
        raise ConfigError(f"clip threshold {cfg.clip_threshold} outside [0, 1/3)")
    if cfg.folds < 2:
        raise ConfigError(f"need at least 2 folds, got {cfg.folds}")
    if cfg.embedding_source == "stub":
        available = set(cfg.stub_layers)
        for name, spec in cfg.model_specs.items():
            if spec.enabled and not set(spec.layers) <= available:
                raise ConfigError(
                    f"model {name} wants layers {spec.layers} but the stub "
                    f"synthesizes only {cfg.stub_layers}"
                )


def apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "out", None) is not None:
        cfg = replace(cfg, out_dir=args.out)
    if getattr(args, "clip", None) is not None:
        cfg = replace(cfg, clip_threshold=args.clip)
    if getattr(args, "layers", None) is not None:
        layer_list = tuple(int(l) for l in args.layers.split(","))
        specs = {
            name: replace(spec, layers=layer_list) for name, spec in cfg.model_specs.items()
        }
        stub_layers = tuple(sorted(set(cfg.stub_layers) | set(layer_list), reverse=True))
        cfg = replace(cfg, model_specs=specs, stub_layers=stub_layers)
    if getattr(args, "weights", None) is not None:
        weights = tuple(float(w) for w in args.weights.split(","))
        cfg = replace(cfg, ensemble_weights=weights)
    _validate_config(cfg)
    enabled = enabled_models(cfg)
    if len(cfg.ensemble_weights) != len(enabled):
        raise ConfigError(
            f"{len(cfg.ensemble_weights)} ensemble weights for {len(enabled)} enabled models"
        )
    if abs(sum(cfg.ensemble_weights) - 1.0) > 1e-6:
        raise ConfigError(f"ensemble weights sum to {sum(cfg.ensemble_weights)}, expected 1")
    return cfg


def enabled_models(cfg: PipelineConfig) -> list[str]:
    return [name for name in MODEL_ORDER if cfg.model_specs[name].enabled]


# --- path helpers

def _out(cfg: PipelineConfig) -> Path:
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"{path} not found; run `{hint}` first")
    return path


def _load_corpus_file(path_str: str) -> list[corpus.GapExample]:
    path = Path(path_str)
    if not path.exists():
        raise MissingArtifactError(f"corpus file not found: {path}")
    return corpus.load_gap_tsv(path)


def _train_examples(cfg: PipelineConfig) -> list[corpus.GapExample]:
    return _load_corpus_file(cfg.train_corpus)


def _predict_examples(cfg: PipelineConfig) -> list[corpus.GapExample]:
    return _load_corpus_file(cfg.predict_corpus or cfg.train_corpus)


def _corrected(cfg: PipelineConfig, examples):
    """Training labels use corrections when configured; evaluation never does."""
    if not cfg.corrections:
        return examples
    path = Path(cfg.corrections)
    if not path.exists():
        raise MissingArtifactError(f"corrections file not found: {path}")
    return corpus.apply_corrections(examples, corpus.load_corrections_tsv(path))


# --- pipeline commands (also the Python API used by the demos and tests)

def cmd_augment(cfg: PipelineConfig) -> dict:
    examples = _train_examples(cfg)
    expanded = {
        ex.id: anonymize.expand_variants(ex, check_all_set_names=cfg.check_all_set_names)
        for ex in examples
    }
    out = _out(cfg)
    anonymize.write_variants_jsonl(out / "variants.jsonl", expanded)
    coverage = anonymize.coverage_summary(examples, check_all_set_names=cfg.check_all_set_names)
    with open(out / "coverage.json", "w", encoding="utf-8") as f:
        json.dump(coverage, f, indent=2)
        f.write("\n")
    return coverage


def _usable(variants):
    return [v for v in variants if v.variant_id == 0 or v.applied]


def _spans(v: anonymize.AugmentedVariant):
    return (
        (v.a_offset, v.a_offset + len(v.name_a)),
        (v.b_offset, v.b_offset + len(v.name_b)),
        (v.pronoun_offset, v.pronoun_offset + len(v.pronoun)),
    )


def cmd_extract_stub(cfg: PipelineConfig) -> Path:
    out = _out(cfg)
    variants_path = _require(out / "variants.jsonl", "gapres augment")
    expanded = anonymize.read_variants_jsonl(variants_path)

    def records():
        for example_id, variants in expanded.items():
            for v in _usable(variants):
                a_span, b_span, p_span = _spans(v)
                request = embeddings.EmbeddingRequest(
                    example_id=example_id,
                    variant_id=v.variant_id,
                    text=v.text,
                    a_span=a_span,
                    b_span=b_span,
                    p_span=p_span,
                    layers=cfg.stub_layers,
                )
                yield from embeddings.stub_embed(request, cfg.stub_dim, cfg.seed)

    path = out / "embeddings.jsonl"
    embeddings.save_store_jsonl(path, records())
    return path


def _open_store(cfg: PipelineConfig) -> embeddings.EmbeddingStore:
    if cfg.embedding_source == "stub":
        path = _require(_out(cfg) / "embeddings.jsonl", "gapres extract-stub")
    else:
        path = _require(Path(cfg.embedding_source), "the external extractor")
    return embeddings.load_store(path)


def _collect_missing(store, expanded_by_id) -> list:
    missing = []
    for example_id, variants in expanded_by_id.items():
        for v in _usable(variants):
            for role in embeddings.ROLES:
                if (example_id, v.variant_id, role) not in store:
                    missing.append((example_id, v.variant_id, role))
    return missing


def _model_row(name, cfg, store, example, variant):
    """Model inputs for one (example, variant) as a tuple of 1-D arrays."""
    spec = cfg.model_specs[name]
    emb = {
        role: embeddings.concat_layers(
            store.get(example.id, variant.variant_id, role), spec.layers
        )
        for role in embeddings.ROLES
    }
    if name == "concat_mlp":
        return (np.concatenate([emb["A"], emb["B"], emb["P"]]),)
    feats = features.compute_hand_features(example, variant)
    return (
        emb["A"],
        emb["B"],
        emb["P"],
        features.candidate_feature_vector(feats, "a"),
        features.candidate_feature_vector(feats, "b"),
    )


def _stack_rows(rows):
    n_parts = len(rows[0])
    return tuple(np.stack([row[i] for row in rows]) for i in range(n_parts))


def _build_net(name, cfg, input_dims, seed):
    spec = cfg.model_specs[name]
    if name == "concat_mlp":
        return models.ConcatMlpNet(input_dims["x"], spec.hidden, seed=seed)
    return models.PairScorerNet(
        input_dims["emb"], input_dims["feat"], spec.hidden[0], seed=seed
    )


def _input_dims(name, row) -> dict:
    if name == "concat_mlp":
        return {"x": int(row[0].shape[0])}
    return {"emb": int(row[0].shape[0]), "feat": int(row[3].shape[0])}


def cmd_train(cfg: PipelineConfig) -> dict:
    out = _out(cfg)
    raw_examples = _train_examples(cfg)
    train_labeled = _corrected(cfg, raw_examples)
    expanded = anonymize.read_variants_jsonl(_require(out / "variants.jsonl", "gapres augment"))
    missing_ids = [ex.id for ex in raw_examples if ex.id not in expanded]
    if missing_ids:
        raise MissingArtifactError(
            f"variants.jsonl lacks {len(missing_ids)} corpus ids (e.g. {missing_ids[:3]}); re-run augment"
        )
    store = _open_store(cfg)
    missing = _collect_missing(store, {ex.id: expanded[ex.id] for ex in raw_examples})
    if missing:
        raise MissingArtifactError(
            f"embedding store lacks {len(missing)} records, e.g. {missing[:5]}"
        )

    folds = corpus.split_folds(raw_examples, cfg.folds, cfg.seed)
    (out / "folds.json").write_text(
        corpus.folds_to_json(raw_examples, folds, seed=cfg.seed)
    )

    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    train_label = {ex.id: evaluate.label_index(ex.label) for ex in train_labeled}
    eval_label = {ex.id: evaluate.label_index(ex.label) for ex in raw_examples}

    trace_rows = []
    manifest = {
        "seed": cfg.seed,
        "folds": cfg.folds,
        "models": {},
        "ensemble": {"weights": list(cfg.ensemble_weights), "clip": cfg.clip_threshold},
    }
    oof_by_model = {}
    for name in enabled_models(cfg):
        spec = cfg.model_specs[name]
        sample_row = _model_row(name, cfg, store, raw_examples[0], expanded[raw_examples[0].id][0])
        dims = _input_dims(name, sample_row)
        manifest["models"][name] = {
            "layers": list(spec.layers),
            "hidden": list(spec.hidden),
            "seeds": spec.seeds,
            "input_dims": dims,
        }
        oof = np.zeros((len(raw_examples), 3))
        for f, fold in enumerate(folds):
            in_fold = set(fold)
            rows, labels = [], []
            for i, ex in enumerate(raw_examples):
                if i in in_fold:
                    continue
                variants = _usable(expanded[ex.id]) if cfg.augment_train else expanded[ex.id][:1]
                for v in variants:
                    rows.append(_model_row(name, cfg, store, ex, v))
                    labels.append(train_label[ex.id])
            inputs = _stack_rows(rows)
            labels = np.asarray(labels)

            nets = []
            for j in range(spec.seeds):
                net = _build_net(name, cfg, dims, embeddings.stable_seed(cfg.seed, name, f, j))
                result = models.train(
                    net,
                    inputs,
                    labels,
                    models.TrainConfig(
                        learning_rate=spec.learning_rate,
                        epochs=spec.epochs,
                        batch_size=spec.batch_size,
                        seed=embeddings.stable_seed(cfg.seed, name, f, j, "shuffle"),
                    ),
                )
                models.save_net(net, ckpt_dir / f"{name}_fold{f}_seed{j}.json")
                trace_rows.extend(
                    (name, f, j, epoch, loss) for epoch, loss in enumerate(result.loss_trace)
                )
                nets.append(net)

            for i in fold:
                ex = raw_examples[i]
                variants = _usable(expanded[ex.id]) if cfg.tta else expanded[ex.id][:1]
                per_variant = [
                    models.seed_average(nets, _stack_rows([_model_row(name, cfg, store, ex, v)]))[0]
                    for v in variants
                ]
                oof[i] = evaluate.tta_aggregate(per_variant)
        oof_by_model[name] = oof
        evaluate.write_submission(out / f"oof_{name}.csv", [ex.id for ex in raw_examples], oof)

    models.write_loss_trace_csv(out / "loss_trace.csv", trace_rows)

    labels = np.asarray([eval_label[ex.id] for ex in raw_examples])
    pronouns = [ex.pronoun for ex in raw_examples]
    report = {"folds": cfg.folds, "seed": cfg.seed, "models": {}, "ensemble": {}}
    for name, oof in oof_by_model.items():
        report["models"][name] = {
            "log_loss": evaluate.log_loss(oof, labels),
            "report": evaluate.gender_report(oof, labels, pronouns).to_dict(),
        }
    combined = evaluate.weighted_ensemble(
        [oof_by_model[name] for name in enabled_models(cfg)], cfg.ensemble_weights
    )
    clipped = evaluate.clip_probs(combined, cfg.clip_threshold)
    report["ensemble"] = {
        "weights": list(cfg.ensemble_weights),
        "clip": cfg.clip_threshold,
        "log_loss_raw": evaluate.log_loss(combined, labels),
        "log_loss_clipped": evaluate.log_loss(clipped, labels),
        "report": evaluate.gender_report(clipped, labels, pronouns).to_dict(),
    }
    with open(out / "cv_report.json", "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    (out / "train_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return report


def cmd_predict(cfg: PipelineConfig) -> Path:
    out = _out(cfg)
    manifest = json.loads(_require(out / "train_manifest.json", "gapres train").read_text())
    examples = _predict_examples(cfg)
    expanded = anonymize.read_variants_jsonl(_require(out / "variants.jsonl", "gapres augment"))
    missing_ids = [ex.id for ex in examples if ex.id not in expanded]
    if missing_ids:
        raise MissingArtifactError(
            f"variants.jsonl lacks {len(missing_ids)} corpus ids (e.g. {missing_ids[:3]})"
        )
    store = _open_store(cfg)

    per_model = []
    for name in enabled_models(cfg):
        info = manifest["models"].get(name)
        if info is None:
            raise MissingArtifactError(f"train_manifest.json has no entry for model {name}")
        nets = []
        for f in range(manifest["folds"]):
            for j in range(info["seeds"]):
                path = _require(
                    out / "checkpoints" / f"{name}_fold{f}_seed{j}.json", "gapres train"
                )
                nets.append(models.load_net(path))
        preds = np.zeros((len(examples), 3))
        for i, ex in enumerate(examples):
            variants = _usable(expanded[ex.id]) if cfg.tta else expanded[ex.id][:1]
            per_variant = [
                models.seed_average(nets, _stack_rows([_model_row(name, cfg, store, ex, v)]))[0]
                for v in variants
            ]
            preds[i] = evaluate.tta_aggregate(per_variant)
        per_model.append(preds)

    combined = evaluate.weighted_ensemble(per_model, cfg.ensemble_weights)
    clipped = evaluate.clip_probs(combined, cfg.clip_threshold)
    path = out / "submission.csv"
    evaluate.write_submission(path, [ex.id for ex in examples], clipped)
    return path


def _scored_predictions(cfg: PipelineConfig):
    out = _out(cfg)
    sub_path = _require(out / "submission.csv", "gapres predict")
    ids, preds = evaluate.read_submission(sub_path)
    examples = {ex.id: ex for ex in _predict_examples(cfg)}
    missing = [i for i in ids if i not in examples]
    if missing:
        raise MissingArtifactError(
            f"submission has {len(missing)} ids absent from the corpus, e.g. {missing[:3]}"
        )
    labels = np.asarray([evaluate.label_index(examples[i].label) for i in ids])
    pronouns = [examples[i].pronoun for i in ids]
    return preds, labels, pronouns


def cmd_evaluate(cfg: PipelineConfig) -> evaluate.EvalReport:
    preds, labels, pronouns = _scored_predictions(cfg)
    report = evaluate.gender_report(preds, labels, pronouns)
    evaluate.write_report_json(_out(cfg) / "report.json", report)
    return report


def cmd_bootstrap(cfg: PipelineConfig) -> evaluate.BootstrapSummary:
    preds, labels, _ = _scored_predictions(cfg)
    summary = evaluate.bootstrap_score(
        preds,
        labels,
        sample_size=cfg.bootstrap_sample_size,
        iterations=cfg.bootstrap_iterations,
        seed=cfg.seed,
        reference=cfg.bootstrap_reference,
    )
    with open(_out(cfg) / "bootstrap.json", "w", encoding="utf-8") as f:
        json.dump(summary.to_dict(), f, indent=2)
        f.write("\n")
    return summary


def cmd_report_lengths(cfg: PipelineConfig) -> Path:
    examples = _predict_examples(cfg)
    rows = evaluate.length_histogram([ex.text for ex in examples], cfg.histogram_bin_width)
    path = _out(cfg) / "lengths.csv"
    evaluate.write_histogram_csv(path, rows)
    return path


# --- argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gapres", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command in (
        "augment", "extract-stub", "train", "predict", "evaluate", "bootstrap",
        "report-lengths",
    ):
        p = sub.add_parser(command)
        p.add_argument("--config", required=True, help="pipeline TOML file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument(
            "--layers", default=None,
            help="comma-separated layer indices; use the = form: --layers=-5,-6",
        )
        p.add_argument("--weights", default=None, help="comma-separated ensemble weights")
        p.add_argument("--clip", type=float, default=None)
        p.add_argument("--out", default=None, help="output directory override")
    return parser


_COMMANDS = {
    "augment": cmd_augment,
    "extract-stub": cmd_extract_stub,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "bootstrap": cmd_bootstrap,
    "report-lengths": cmd_report_lengths,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        result = _COMMANDS[args.command](cfg)
    except (MissingArtifactError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ConfigError, corpus.GapParseError, corpus.GapValidationError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    if args.command == "augment":
        print(json.dumps(result, indent=2))
    elif args.command == "train":
        for name, entry in result["models"].items():
            print(f"{name}: OOF log loss {entry['log_loss']:.4f}")
        print(f"ensemble (clipped): {result['ensemble']['log_loss_clipped']:.4f}")
    elif args.command == "evaluate":
        print(json.dumps(result.to_dict(), indent=2))
    elif args.command == "bootstrap":
        print(json.dumps(result.to_dict(), indent=2))
    else:
        print(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
