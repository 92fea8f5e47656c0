import json

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "kate", "met", "til", "##da", "before", "she", "left", ".",
    "john", "said", "he", "pa", "##rker", "mary", "thanked", "candace",
    "and", "smiled", "walked", "home", "on", "tuesday", "evening", "the",
    "old", "mill", "road", "past", "town", ",",
]


@pytest.fixture(scope="session")
def tiny_bert_dir(tmp_path_factory):
    """A saved, randomly initialized 4-layer uncased BERT with a toy vocab."""
    model_dir = tmp_path_factory.mktemp("tiny-bert")
    vocab_file = model_dir / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)

    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=4,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=128,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(model_dir)
    tokenizer.save_pretrained(model_dir)
    return model_dir


def write_variants(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec))
            f.write("\n")


def variant_record(example_id, text, pronoun, name_a, name_b, variant=0, applied=False):
    return {
        "id": example_id,
        "variant": variant,
        "applied": applied,
        "skip_reasons": [],
        "text": text,
        "pronoun_offset": text.index(pronoun),
        "a_offset": text.index(name_a),
        "b_offset": text.index(name_b),
        "pronoun": pronoun,
        "name_a": name_a,
        "name_b": name_b,
    }


@pytest.fixture()
def three_example_variants(tmp_path):
    records = [
        variant_record("ex-1", "Kate met Tilda before she left .", "she", "Kate", "Tilda"),
        variant_record("ex-2", "John said he met Tilda .", "he", "John", "Tilda"),
        variant_record(
            "ex-3", "Mary thanked Candace Tilda and she smiled .",
            "she", "Mary", "Candace Tilda",
        ),
    ]
    path = tmp_path / "variants.jsonl"
    write_variants(path, records)
    return path, records
