"""Mention-embedding contract: JSONL store, layer selection, and a stub embedder.

One record holds the vectors of a single mention role (candidate A, candidate
B, or the pronoun) of one example variant, keyed by layer index counted
backward from the top of the source network (-1 = last hidden layer). Real
extractors write this format out of process; the stub embedder here produces
deterministic vectors from the mention surface text so the full pipeline can
run without a transformer.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROLES = ("A", "B", "P")


def stable_seed(*parts) -> int:
    """Deterministic cross-process seed from arbitrary string-able parts."""
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class MentionEmbedding:
    example_id: str
    variant_id: int
    role: str  # "A" | "B" | "P"
    layers: dict[int, np.ndarray]
    dim: int

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        for layer, vec in self.layers.items():
            if vec.shape != (self.dim,):
                raise ValueError(
                    f"{self.key()}: layer {layer} has shape {vec.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{self.key()}: layer {layer} contains non-finite entries")

    def key(self) -> tuple[str, int, str]:
        return (self.example_id, self.variant_id, self.role)


@dataclass(frozen=True)
class EmbeddingRequest:
    """What to embed: one variant text and its three mention spans."""

    example_id: str
    variant_id: int
    text: str
    a_span: tuple[int, int]
    b_span: tuple[int, int]
    p_span: tuple[int, int]
    layers: tuple[int, ...]

    def __post_init__(self):
        for role, (s, e) in zip(ROLES, (self.a_span, self.b_span, self.p_span)):
            if not (0 <= s < e <= len(self.text)):
                raise ValueError(
                    f"{self.example_id}/{self.variant_id}: {role} span ({s},{e}) "
                    f"outside text of length {len(self.text)}"
                )


def average_subtokens(vectors) -> np.ndarray:
    """Coordinate-wise arithmetic mean of a non-empty stack of same-length vectors."""
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    if not vectors:
        raise ValueError("cannot average an empty list of vectors")
    dim = vectors[0].shape
    for v in vectors[1:]:
        if v.shape != dim:
            raise ValueError(f"dimension mismatch: {v.shape} vs {dim}")
    return np.mean(np.stack(vectors), axis=0)


def concat_layers(emb: MentionEmbedding, order) -> np.ndarray:
    """Concatenate the requested layers in the given order."""
    missing = [layer for layer in order if layer not in emb.layers]
    if missing:
        raise KeyError(
            f"{emb.key()}: layer(s) {missing} not present (have {sorted(emb.layers)})"
        )
    return np.concatenate([emb.layers[layer] for layer in order])


def stub_embed(request: EmbeddingRequest, dim: int, seed: int) -> list[MentionEmbedding]:
    """Deterministic test-double embeddings for the three roles of a request.

    Each vector is seeded from (seed, layer, role, span surface text), so the
    same surface always maps to the same vector: rewriting two different names
    to the same placeholder makes their stub embeddings identical, which is
    exactly the premise anonymization relies on. Entries are uniform in [-1, 1].
    """
    out = []
    for role, (s, e) in zip(ROLES, (request.a_span, request.b_span, request.p_span)):
        surface = request.text[s:e]
        layers = {}
        for layer in request.layers:
            rng = np.random.default_rng(stable_seed(seed, layer, role, surface))
            layers[layer] = rng.uniform(-1.0, 1.0, dim)
        out.append(
            MentionEmbedding(
                example_id=request.example_id,
                variant_id=request.variant_id,
                role=role,
                layers=layers,
                dim=dim,
            )
        )
    return out


class EmbeddingStore:
    """Immutable (example, variant, role) -> MentionEmbedding lookup."""

    def __init__(self, records):
        self._by_key: dict[tuple[str, int, str], MentionEmbedding] = {}
        self._dim: int | None = None
        for rec in records:
            key = rec.key()
            if key in self._by_key:
                raise ValueError(f"duplicate embedding record for {key}")
            if self._dim is None:
                self._dim = rec.dim
            elif rec.dim != self._dim:
                raise ValueError(
                    f"{key}: dim {rec.dim} differs from store dim {self._dim}"
                )
            self._by_key[key] = rec

    @property
    def dim(self) -> int | None:
        return self._dim

    def __len__(self) -> int:
        return len(self._by_key)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._by_key

    def get(self, example_id: str, variant_id: int, role: str) -> MentionEmbedding:
        key = (example_id, variant_id, role)
        if key not in self._by_key:
            raise KeyError(f"no embedding record for {key}")
        return self._by_key[key]

    def keys(self):
        return self._by_key.keys()


# --- JSON Lines format (canonical): floats as 8-significant-digit decimals

def _round8(x: float) -> float:
    return float(f"{x:.8g}")


def embedding_to_record(emb: MentionEmbedding) -> dict:
    return {
        "example_id": emb.example_id,
        "variant": emb.variant_id,
        "role": emb.role,
        "dim": emb.dim,
        "layers": {str(layer): [_round8(x) for x in vec] for layer, vec in emb.layers.items()},
    }


def record_to_embedding(rec: dict) -> MentionEmbedding:
    layers = {}
    dim = int(rec["dim"])
    for layer, values in rec["layers"].items():
        vec = np.asarray(values, dtype=np.float64)
        layers[int(layer)] = vec
    return MentionEmbedding(
        example_id=str(rec["example_id"]),
        variant_id=int(rec["variant"]),
        role=rec["role"],
        layers=layers,
        dim=dim,
    )


def save_store_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for emb in records:
            f.write(json.dumps(embedding_to_record(emb)))
            f.write("\n")


def load_store_jsonl(path) -> EmbeddingStore:
    """Load and validate a JSONL embedding file (the extractor contract)."""

    def records():
        with open(path, encoding="utf-8") as f:
            for line_num, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield record_to_embedding(json.loads(line))
                except ValueError as err:
                    raise ValueError(f"{path}:{line_num}: {err}") from None

    return EmbeddingStore(records())


def load_store(path) -> EmbeddingStore:
    path = Path(path)
    if path.suffix == ".bin":
        return load_store_binary(path)
    return load_store_jsonl(path)


# --- binary sidecar format: length-prefixed records, little-endian float32

_MAGIC = b"MEB1"


def save_store_binary(path, records) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        for emb in records:
            id_bytes = emb.example_id.encode("utf-8")
            payload = struct.pack("<H", len(id_bytes)) + id_bytes
            payload += struct.pack("<bB H B", emb.variant_id, ROLES.index(emb.role),
                                   emb.dim, len(emb.layers))
            for layer in sorted(emb.layers):
                payload += struct.pack("<b", layer)
                payload += emb.layers[layer].astype("<f4").tobytes()
            f.write(struct.pack("<I", len(payload)))
            f.write(payload)


def load_store_binary(path) -> EmbeddingStore:
    def records():
        with open(path, "rb") as f:
            if f.read(4) != _MAGIC:
                raise ValueError(f"{path}: not a mention-embedding binary file")
            while True:
                head = f.read(4)
                if not head:
                    break
                (length,) = struct.unpack("<I", head)
                payload = f.read(length)
                if len(payload) != length:
                    raise ValueError(f"{path}: truncated record")
                (id_len,) = struct.unpack_from("<H", payload, 0)
                pos = 2
                example_id = payload[pos : pos + id_len].decode("utf-8")
                pos += id_len
                variant_id, role_idx, dim, n_layers = struct.unpack_from("<bB H B", payload, pos)
                pos += struct.calcsize("<bB H B")
                layers = {}
                for _ in range(n_layers):
                    (layer,) = struct.unpack_from("<b", payload, pos)
                    pos += 1
                    vec = np.frombuffer(payload, dtype="<f4", count=dim, offset=pos)
                    layers[layer] = vec.astype(np.float64)
                    pos += 4 * dim
                yield MentionEmbedding(example_id, variant_id, ROLES[role_idx], layers, dim)

    return EmbeddingStore(records())
