import numpy as np
import pytest
import torch
from transformers import AutoModel, AutoTokenizer

from mention_extractor.extract import ExtractorConfig, extract, read_usable_variants

from conftest import variant_record, write_variants

from gapres.embeddings import load_store


def _config(tiny_bert_dir, variants_path, out_path, **kwargs):
    defaults = dict(
        model=str(tiny_bert_dir),
        variants_path=str(variants_path),
        output_path=str(out_path),
        layers=(-1, -2),
        max_seq_len=64,
        batch_size=2,
    )
    defaults.update(kwargs)
    return ExtractorConfig(**defaults)


class TestRoundTrip:
    def test_three_example_fixture_loads_through_the_store(
        self, tiny_bert_dir, three_example_variants, tmp_path
    ):
        variants_path, records = three_example_variants
        out_path = tmp_path / "embeddings.jsonl"
        stats = extract(_config(tiny_bert_dir, variants_path, out_path))
        assert stats.skipped == []
        assert stats.written == len(records) * 3

        store = load_store(out_path)  # validates dims, finiteness, duplicates
        assert len(store) == len(records) * 3
        for rec in records:
            for role in ("A", "B", "P"):
                emb = store.get(rec["id"], rec["variant"], role)
                assert sorted(emb.layers) == [-2, -1]

    def test_record_dim_matches_model_hidden_size(
        self, tiny_bert_dir, three_example_variants, tmp_path
    ):
        variants_path, _ = three_example_variants
        out_path = tmp_path / "embeddings.jsonl"
        extract(_config(tiny_bert_dir, variants_path, out_path))
        model = AutoModel.from_pretrained(tiny_bert_dir)
        assert load_store(out_path).dim == model.config.hidden_size

    def test_applied_and_original_variants_only(self, tiny_bert_dir, tmp_path):
        text = "Kate met Tilda before she left ."
        records = [
            variant_record("ex-1", text, "she", "Kate", "Tilda", variant=0),
            variant_record("ex-1", text, "she", "Kate", "Tilda", variant=1, applied=True),
            dict(variant_record("ex-1", text, "she", "Kate", "Tilda", variant=2),
                 skip_reasons=["placeholder_in_text"]),
        ]
        variants_path = tmp_path / "variants.jsonl"
        write_variants(variants_path, records)
        assert [r["variant"] for r in read_usable_variants(variants_path)] == [0, 1]
        out_path = tmp_path / "embeddings.jsonl"
        extract(_config(tiny_bert_dir, variants_path, out_path))
        store = load_store(out_path)
        assert ("ex-1", 0, "A") in store and ("ex-1", 1, "A") in store
        assert ("ex-1", 2, "A") not in store


def _reference_hidden(tiny_bert_dir, text):
    """Independent forward pass: full sequence with special tokens."""
    tokenizer = AutoTokenizer.from_pretrained(tiny_bert_dir)
    model = AutoModel.from_pretrained(tiny_bert_dir)
    model.eval()
    enc = tokenizer(text.lower(), return_tensors="pt")
    with torch.no_grad():
        out = model(**enc, output_hidden_states=True)
    return tokenizer, out.hidden_states


class TestVectorValues:
    def test_single_piece_mention_equals_raw_token_vector(
        self, tiny_bert_dir, three_example_variants, tmp_path
    ):
        variants_path, records = three_example_variants
        out_path = tmp_path / "embeddings.jsonl"
        extract(_config(tiny_bert_dir, variants_path, out_path))
        store = load_store(out_path)

        text = records[0]["text"]  # "Kate met Tilda before she left ."
        _, hidden = _reference_hidden(tiny_bert_dir, text)
        # content tokens: kate met til ##da before she left .
        # position 1 is "kate" (after [CLS])
        for layer in (-1, -2):
            raw = hidden[layer][0, 1].numpy()
            got = store.get("ex-1", 0, "A").layers[layer]
            assert np.allclose(got, raw, atol=1e-6)

    def test_multi_piece_mention_is_the_piece_average(
        self, tiny_bert_dir, three_example_variants, tmp_path
    ):
        variants_path, records = three_example_variants
        out_path = tmp_path / "embeddings.jsonl"
        extract(_config(tiny_bert_dir, variants_path, out_path))
        store = load_store(out_path)

        text = records[0]["text"]
        _, hidden = _reference_hidden(tiny_bert_dir, text)
        # "Tilda" tokenizes to til(3) ##da(4) after [CLS]
        for layer in (-1, -2):
            want = hidden[layer][0, [3, 4]].numpy().mean(axis=0)
            got = store.get("ex-1", 0, "B").layers[layer]
            assert np.allclose(got, want, atol=1e-6)

    def test_two_word_mention_covers_both_words(
        self, tiny_bert_dir, three_example_variants, tmp_path
    ):
        variants_path, records = three_example_variants
        out_path = tmp_path / "embeddings.jsonl"
        extract(_config(tiny_bert_dir, variants_path, out_path))
        store = load_store(out_path)

        text = records[2]["text"]  # "Mary thanked Candace Tilda and she smiled ."
        _, hidden = _reference_hidden(tiny_bert_dir, text)
        # content: mary thanked candace til ##da and she smiled .
        for layer in (-1, -2):
            want = hidden[layer][0, [3, 4, 5]].numpy().mean(axis=0)
            got = store.get("ex-3", 0, "B").layers[layer]
            assert np.allclose(got, want, atol=1e-6)

    def test_deterministic_output(self, tiny_bert_dir, three_example_variants, tmp_path):
        variants_path, _ = three_example_variants
        out_a = tmp_path / "a.jsonl"
        out_b = tmp_path / "b.jsonl"
        extract(_config(tiny_bert_dir, variants_path, out_a))
        extract(_config(tiny_bert_dir, variants_path, out_b))
        assert out_a.read_bytes() == out_b.read_bytes()


class TestSkipPaths:
    def test_unalignable_span_is_skipped_and_logged(self, tiny_bert_dir, tmp_path):
        # the labeled span stops mid-word, so no piece tiling can match it
        text = "Kate met Tilda before she left ."
        rec = variant_record("bad-1", text, "she", "Kate", "Tilda")
        rec["b_offset"] = text.index("Tilda")
        rec["name_b"] = "Til"
        variants_path = tmp_path / "variants.jsonl"
        write_variants(variants_path, [rec])
        out_path = tmp_path / "embeddings.jsonl"
        stats = extract(_config(tiny_bert_dir, variants_path, out_path))
        assert stats.written == 0
        assert len(stats.skipped) == 1
        assert stats.skipped[0][0] == "bad-1"

    def test_lowercase_length_instability_is_skipped(self, tiny_bert_dir, tmp_path):
        # U+0130 lowercases to two code points, which would shift every offset
        text = "Kate met İda before she left ."
        rec = variant_record("bad-2", text, "she", "Kate", "İda")
        variants_path = tmp_path / "variants.jsonl"
        write_variants(variants_path, [rec])
        out_path = tmp_path / "embeddings.jsonl"
        stats = extract(_config(tiny_bert_dir, variants_path, out_path))
        assert stats.written == 0
        assert stats.skipped[0][2].startswith("lowercasing")

    def test_forced_cased_mode_keeps_unstable_text(self, tiny_bert_dir, tmp_path):
        text = "Kate met İda before she left ."
        rec = variant_record("ok-1", text, "she", "Kate", "İda")
        variants_path = tmp_path / "variants.jsonl"
        write_variants(variants_path, [rec])
        out_path = tmp_path / "embeddings.jsonl"
        stats = extract(_config(tiny_bert_dir, variants_path, out_path, lowercase=False))
        assert stats.written == 3  # tokenizes (to [UNK]) but aligns fine

    def test_bad_layer_index_rejected(self, tiny_bert_dir, three_example_variants, tmp_path):
        variants_path, _ = three_example_variants
        with pytest.raises(ValueError, match="layer"):
            extract(_config(tiny_bert_dir, variants_path, tmp_path / "x.jsonl",
                            layers=(-9,)))


class TestWindowing:
    def test_long_document_windows_around_the_pronoun(self, tiny_bert_dir, tmp_path):
        filler = " walked home on tuesday evening past the old mill road" * 4
        text = "Kate met Tilda before she left" + filler + " ."
        rec = variant_record("long-1", text, "she", "Kate", "Tilda")
        variants_path = tmp_path / "variants.jsonl"
        write_variants(variants_path, [rec])
        out_path = tmp_path / "embeddings.jsonl"
        stats = extract(_config(tiny_bert_dir, variants_path, out_path, max_seq_len=16))
        assert stats.skipped == []
        assert len(load_store(out_path)) == 3

    def test_mentions_too_far_apart_are_skipped(self, tiny_bert_dir, tmp_path):
        filler = " walked home on tuesday evening past the old mill road" * 4
        text = "Kate" + filler + " met Tilda before she left ."
        rec = variant_record("long-2", text, "she", "Kate", "Tilda")
        variants_path = tmp_path / "variants.jsonl"
        write_variants(variants_path, [rec])
        out_path = tmp_path / "embeddings.jsonl"
        stats = extract(_config(tiny_bert_dir, variants_path, out_path, max_seq_len=16))
        assert stats.written == 0
        assert "budget" in stats.skipped[0][2]
