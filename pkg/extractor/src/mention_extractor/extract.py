"""Run a pretrained bidirectional transformer over variant files and write
per-mention embedding records.

Input is the variants JSONL produced by the augmentation stage (the original
document plus each applied rewrite); output is the mention-embedding JSONL
contract: one record per (example, variant, role) holding the mean of the
word-piece vectors of that mention for each requested hidden layer, indexed
backward from the top (-1 = last hidden layer). Records whose spans cannot be
aligned to word pieces, or that cannot fit the length budget, are skipped and
logged rather than written approximately.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .align import AlignmentError, align_span, choose_window

log = logging.getLogger("mention_extractor")

ROLES = ("A", "B", "P")


@dataclass(frozen=True)
class ExtractorConfig:
    model: str
    variants_path: str
    output_path: str
    layers: tuple[int, ...] = (-3, -4, -5, -6)
    max_seq_len: int = 384
    batch_size: int = 8
    lowercase: bool | None = None  # None = follow the tokenizer
    device: str = "cpu"


@dataclass
class ExtractStats:
    written: int = 0
    skipped: list[tuple[str, int, str]] = field(default_factory=list)

    def skip(self, example_id: str, variant: int, reason: str) -> None:
        self.skipped.append((example_id, variant, reason))
        log.warning("skip %s variant %s: %s", example_id, variant, reason)


def read_usable_variants(path):
    """Variant records worth embedding: the original plus applied rewrites."""
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec["variant"] == 0 or rec["applied"]:
                records.append(rec)
    return records


def _mention_spans(rec) -> dict[str, tuple[int, int]]:
    return {
        "A": (rec["a_offset"], rec["a_offset"] + len(rec["name_a"])),
        "B": (rec["b_offset"], rec["b_offset"] + len(rec["name_b"])),
        "P": (rec["pronoun_offset"], rec["pronoun_offset"] + len(rec["pronoun"])),
    }


@dataclass
class _Prepared:
    example_id: str
    variant: int
    input_ids: list[int]
    role_positions: dict[str, list[int]]  # positions inside input_ids


def _prepare(rec, tokenizer, lowercase: bool, max_seq_len: int, stats: ExtractStats):
    text = rec["text"]
    if lowercase:
        lowered = text.lower()
        if len(lowered) != len(text):
            stats.skip(rec["id"], rec["variant"],
                       "lowercasing changes the text length, offsets would drift")
            return None
        text = lowered

    enc = tokenizer(text, add_special_tokens=False, return_offsets_mapping=True)
    ids = enc["input_ids"]
    offsets = enc["offset_mapping"]
    if not ids:
        stats.skip(rec["id"], rec["variant"], "tokenizer produced no tokens")
        return None

    try:
        role_tokens = {
            role: align_span(offsets, span, text)
            for role, span in _mention_spans(rec).items()
        }
        required = sorted({i for toks in role_tokens.values() for i in toks})
        pronoun_center = float(np.mean(role_tokens["P"]))
        start, end = choose_window(len(ids), required, pronoun_center, max_seq_len - 2)
    except AlignmentError as err:
        stats.skip(rec["id"], rec["variant"], str(err))
        return None

    input_ids = [tokenizer.cls_token_id] + ids[start:end] + [tokenizer.sep_token_id]
    role_positions = {
        role: [i - start + 1 for i in toks] for role, toks in role_tokens.items()
    }
    return _Prepared(rec["id"], rec["variant"], input_ids, role_positions)


def _round8(x: float) -> float:
    return float(f"{x:.8g}")


def _forward_batch(model, batch, layers, pad_id, device, out_file, dim) -> int:
    max_len = max(len(item.input_ids) for item in batch)
    ids = torch.full((len(batch), max_len), pad_id, dtype=torch.long)
    mask = torch.zeros((len(batch), max_len), dtype=torch.long)
    for row, item in enumerate(batch):
        ids[row, : len(item.input_ids)] = torch.tensor(item.input_ids)
        mask[row, : len(item.input_ids)] = 1
    with torch.no_grad():
        out = model(input_ids=ids.to(device), attention_mask=mask.to(device),
                    output_hidden_states=True)
    hidden = out.hidden_states  # tuple: embeddings + one entry per layer

    written = 0
    for row, item in enumerate(batch):
        for role in ROLES:
            positions = item.role_positions[role]
            record = {
                "example_id": item.example_id,
                "variant": item.variant,
                "role": role,
                "dim": dim,
                "layers": {},
            }
            for layer in layers:
                vecs = hidden[layer][row, positions, :].cpu().numpy()
                mean = vecs.mean(axis=0)
                record["layers"][str(layer)] = [_round8(float(x)) for x in mean]
            out_file.write(json.dumps(record))
            out_file.write("\n")
            written += 1
    return written


def extract(config: ExtractorConfig) -> ExtractStats:
    """Embed every usable variant record and write the embedding JSONL."""
    tokenizer = AutoTokenizer.from_pretrained(config.model)
    model = AutoModel.from_pretrained(config.model)
    model.eval()
    model.to(config.device)

    n_layers = model.config.num_hidden_layers
    for layer in config.layers:
        if not (-n_layers <= layer <= -1):
            raise ValueError(
                f"layer {layer} outside [-{n_layers}, -1] for this model"
            )
    lowercase = config.lowercase
    if lowercase is None:
        lowercase = bool(getattr(tokenizer, "do_lower_case", False))

    records = read_usable_variants(config.variants_path)
    stats = ExtractStats()
    dim = model.config.hidden_size
    with open(config.output_path, "w", encoding="utf-8") as out_file:
        batch: list[_Prepared] = []
        for rec in records:
            prepared = _prepare(rec, tokenizer, lowercase, config.max_seq_len, stats)
            if prepared is None:
                continue
            batch.append(prepared)
            if len(batch) == config.batch_size:
                stats.written += _forward_batch(
                    model, batch, config.layers, tokenizer.pad_token_id,
                    config.device, out_file, dim,
                )
                batch = []
        if batch:
            stats.written += _forward_batch(
                model, batch, config.layers, tokenizer.pad_token_id,
                config.device, out_file, dim,
            )
    log.info("wrote %d records, skipped %d variants", stats.written, len(stats.skipped))
    return stats


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="extract-mentions",
        description="Write per-mention transformer embeddings for variant files",
    )
    parser.add_argument("--model", required=True, help="model name or local path")
    parser.add_argument("--variants", required=True, help="variants JSONL input")
    parser.add_argument("--out", required=True, help="embedding JSONL output")
    parser.add_argument("--layers", default="-3,-4,-5,-6",
                        help="comma-separated negative layer indices (use --layers=-5,-6)")
    parser.add_argument("--max-seq-len", type=int, default=384)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--device", default="cpu")
    case = parser.add_mutually_exclusive_group()
    case.add_argument("--uncased", action="store_true",
                      help="force adapter-side lowercasing")
    case.add_argument("--cased", action="store_true",
                      help="force no lowercasing regardless of tokenizer defaults")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    lowercase = True if args.uncased else False if args.cased else None
    config = ExtractorConfig(
        model=args.model,
        variants_path=args.variants,
        output_path=args.out,
        layers=tuple(int(l) for l in args.layers.split(",")),
        max_seq_len=args.max_seq_len,
        batch_size=args.batch_size,
        lowercase=lowercase,
        device=args.device,
    )
    try:
        stats = extract(config)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {stats.written} records to {config.output_path}; "
          f"skipped {len(stats.skipped)} variants")
    return 0


if __name__ == "__main__":
    sys.exit(main())
