"""The mention-embedding contract and the deterministic stub embedder.

Run: python3 demos/03_embedding_store.py
"""

import tempfile
from pathlib import Path

import numpy as np

from gapres.embeddings import (
    EmbeddingRequest,
    concat_layers,
    load_store,
    save_store_jsonl,
    stub_embed,
)

text = "Kate said she met Alice ."
request = EmbeddingRequest(
    example_id="demo-1",
    variant_id=1,
    text=text,
    a_span=(text.index("Alice"), text.index("Alice") + 5),
    b_span=(0, 4),
    p_span=(text.index("she"), text.index("she") + 3),
    layers=(-3, -4),
)

records = stub_embed(request, dim=6, seed=0)
for emb in records:
    print(f"role {emb.role}: layers {sorted(emb.layers)}, first coords",
          np.round(emb.layers[-3][:3], 3))

# the stub hashes the surface string: the same mention surface in the same
# role embeds identically, no matter which document it came from
other_text = "Brel thanked Kate after she ate ."
other = EmbeddingRequest(
    example_id="demo-2", variant_id=2,
    text=other_text,
    a_span=(0, 4),
    b_span=(other_text.index("Kate"), other_text.index("Kate") + 4),
    p_span=(other_text.index("she"), other_text.index("she") + 3),
    layers=(-3, -4),
)
b_here = stub_embed(other, dim=6, seed=0)[1]   # role B is "Kate" here
b_there = records[1]                           # and role B was "Kate" above
print("\nsame surface, same role, different document -> identical vectors:",
      np.array_equal(b_here.layers[-3], b_there.layers[-3]))

vec = concat_layers(records[0], [-3, -4])
print("concatenating layers -3 and -4 gives dimension", vec.shape[0])

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "embeddings.jsonl"
    save_store_jsonl(path, records)
    store = load_store(path)
    print("store round-trip:", len(store), "records, dim", store.dim)
    print("lookup ('demo-1', 1, 'P') ->",
          np.round(store.get("demo-1", 1, "P").layers[-4][:3], 3))
