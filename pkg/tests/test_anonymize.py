import json

import numpy as np
import pytest

from gapres.anonymize import (
    PLACEHOLDER_SETS,
    SkipReason,
    apply_placeholders,
    check_skip_conditions,
    coverage_summary,
    expand_variants,
    expand_with_tta,
    find_name_occurrences,
    find_whole_word,
    pronoun_gender,
    read_variants_jsonl,
    write_variants_jsonl,
)

from conftest import make_example, random_gap_example


class TestPronounGender:
    @pytest.mark.parametrize("pronoun", ["he", "him", "his", "He", "HIM", "His"])
    def test_masculine_forms(self, pronoun):
        assert pronoun_gender(pronoun) == "masculine"

    @pytest.mark.parametrize("pronoun", ["she", "her", "hers", "She", "HERS", "they"])
    def test_everything_else_is_feminine(self, pronoun):
        assert pronoun_gender(pronoun) == "feminine"


class TestPlaceholderInventory:
    def test_four_sets_with_expected_names(self):
        expected = [
            (("Alice", "Kate"), ("John", "Michael")),
            (("Elizabeth", "Mary"), ("James", "Henry")),
            (("Kate", "Elizabeth"), ("Michael", "James")),
            (("Mary", "Alice"), ("Henry", "John")),
        ]
        assert len(PLACEHOLDER_SETS) == 4
        for pset, (fem, masc) in zip(PLACEHOLDER_SETS, expected):
            assert pset.feminine == fem
            assert pset.masculine == masc
            assert all(" " not in name for name in pset.all_names)

    def test_gender_routing(self):
        assert PLACEHOLDER_SETS[0].pair_for("he") == ("John", "Michael")
        assert PLACEHOLDER_SETS[0].pair_for("hers") == ("Alice", "Kate")


class TestWordMatching:
    def test_no_match_inside_longer_word(self):
        assert find_whole_word("Erina spoke", "Erin") == []
        assert find_whole_word("aKate Kate", "Kate") == [(6, 10)]

    def test_apostrophe_extends_the_word(self):
        # "Nick's" is one word, so "Nick" alone does not occur in it
        assert find_whole_word("Nick's sister", "Nick") == []

    def test_punctuation_is_a_boundary(self):
        assert find_whole_word("met Kate, then Kate.", "Kate") == [(4, 8), (15, 19)]

    def test_case_sensitive(self):
        assert find_whole_word("kate spoke", "Kate") == []

    def test_single_occurrence_at_labeled_offset(self):
        text = "Dara met Bolu ."
        spans_a, spans_b = find_name_occurrences(text, "Dara", "Bolu")
        assert spans_a == [(0, 4)]
        assert spans_b == [(9, 13)]

    def test_two_word_name_includes_lone_last_name(self):
        text = "a box-out on Candace Parker , and later Parker stood"
        _, spans_b = find_name_occurrences(text, "Plenette Pierson", "Candace Parker")
        full = text.index("Candace Parker")
        lone = text.index("Parker", full + len("Candace Parker"))
        assert spans_b == [(full, full + 14), (lone, lone + 6)]

    def test_erina_fixture_matches_hand_enumeration(self):
        # hand scan of this fixture: only positions 0 and 17 hold "Erin"
        # as a maximal word; "Erina" at 22 must not count
        text = "Erin greeted, and Erin met Erina ."
        spans_a, _ = find_name_occurrences(text, "Erin", "Zofu")
        assert spans_a == [(0, 4), (18, 22)]


class TestSkipConditions:
    def test_placeholder_already_in_document(self, placeholder_collision_example):
        ex = placeholder_collision_example
        # feminine pronoun: sets 0 and 3 carry Alice and must be skipped
        assert check_skip_conditions(ex, PLACEHOLDER_SETS[0]) == {
            SkipReason.PLACEHOLDER_IN_TEXT
        }
        assert check_skip_conditions(ex, PLACEHOLDER_SETS[3]) == {
            SkipReason.PLACEHOLDER_IN_TEXT
        }
        assert check_skip_conditions(ex, PLACEHOLDER_SETS[1]) == frozenset()
        assert check_skip_conditions(ex, PLACEHOLDER_SETS[2]) == frozenset()

    def test_partial_name_elsewhere(self, partial_name_example):
        for pset in PLACEHOLDER_SETS:
            assert check_skip_conditions(partial_name_example, pset) == {
                SkipReason.PARTIAL_NAME_ELSEWHERE
            }

    def test_name_longer_than_two_words(self, long_name_example):
        assert check_skip_conditions(long_name_example, PLACEHOLDER_SETS[0]) == {
            SkipReason.LONG_NAME
        }
        for pset in PLACEHOLDER_SETS:
            assert SkipReason.LONG_NAME in check_skip_conditions(long_name_example, pset)

    def test_nested_candidate_names(self, nested_names_example):
        for pset in PLACEHOLDER_SETS:
            assert check_skip_conditions(nested_names_example, pset) == {
                SkipReason.NESTED_CANDIDATES
            }

    def test_collision_check_uses_gender_selected_pair_only(self):
        # masculine pronoun: a feminine placeholder in the text is harmless
        ex = make_example(
            "Alice watched while Dormu thanked Besil and he left .",
            "he", "Dormu", "Besil", label="A",
        )
        assert check_skip_conditions(ex, PLACEHOLDER_SETS[0]) == frozenset()
        assert check_skip_conditions(
            ex, PLACEHOLDER_SETS[0], check_all_set_names=True
        ) == {SkipReason.PLACEHOLDER_IN_TEXT}

    def test_overlapping_label_spans_fail_safe(self):
        # A and B point at overlapping but non-nested surfaces
        text = "Maron Delu Karos spoke and she left ."
        ex = make_example(
            text, "she", "Maron Delu", "Delu Karos",
            a_offset=0, b_offset=6, label="A",
        )
        reasons = check_skip_conditions(ex, PLACEHOLDER_SETS[0])
        assert SkipReason.NESTED_CANDIDATES in reasons


class TestApplyPlaceholders:
    def test_same_length_replacement_keeps_offsets(self):
        # Zorla -> Alice (5 chars), Brin -> Kate (4 chars): only B shifts text
        ex = make_example(
            "Zorla met Brin before she left .", "she", "Zorla", "Brin", label="A"
        )
        v = apply_placeholders(ex, PLACEHOLDER_SETS[0])
        assert v.a_offset == ex.a_offset
        assert v.text[v.a_offset : v.a_offset + 5] == "Alice"

    def test_nine_char_name_to_four_char_placeholder_shifts_pronoun_by_five(self):
        text = "Konstanza said she met Dara ."
        ex = make_example(text, "she", "Dara", "Konstanza", label="B")
        v = apply_placeholders(ex, PLACEHOLDER_SETS[0])
        # oracle: recompute offsets by searching the transformed text
        assert v.text == "Kate said she met Alice ."
        assert v.pronoun_offset == v.text.index("she")
        assert v.pronoun_offset == ex.pronoun_offset - 5
        assert v.b_offset == v.text.index("Kate")
        assert v.a_offset == v.text.index("Alice")

    def test_replacement_after_pronoun_leaves_pronoun_alone(self):
        text = "Bo said she met Konstanza and Dara ."
        ex = make_example(text, "she", "Konstanza", "Dara", label="A")
        v = apply_placeholders(ex, PLACEHOLDER_SETS[0])
        assert v.pronoun_offset == ex.pronoun_offset

    def test_all_occurrences_replaced(self):
        text = "Dara met Bolu , then Dara thanked Bolu , and she left ."
        ex = make_example(text, "she", "Dara", "Bolu", label="A")
        v = apply_placeholders(ex, PLACEHOLDER_SETS[1])
        assert "Dara" not in v.text and "Bolu" not in v.text
        assert v.text.count("Elizabeth") == 2 and v.text.count("Mary") == 2

    def test_precondition_violation_raises(self, nested_names_example):
        with pytest.raises(ValueError, match="overlapping"):
            apply_placeholders(nested_names_example, PLACEHOLDER_SETS[0])


class TestExpansion:
    def test_clean_example_gives_five_variants(self):
        ex = make_example("Dara met Bolu before she left .", "she", "Dara", "Bolu")
        usable = expand_with_tta(ex)
        assert [v.variant_id for v in usable] == [0, 1, 2, 3, 4]
        assert usable[0].applied is False and usable[0].text == ex.text
        assert all(v.applied for v in usable[1:])

    def test_variant_zero_is_untouched_original(self):
        ex = make_example("Dara met Bolu before she left .", "she", "Dara", "Bolu")
        v0 = expand_variants(ex)[0]
        assert v0.variant_id == 0
        assert v0.applied is False
        assert v0.skip_reasons == frozenset()
        assert (v0.text, v0.a_offset, v0.b_offset, v0.pronoun_offset) == (
            ex.text, ex.a_offset, ex.b_offset, ex.pronoun_offset
        )

    def test_applied_iff_no_skip_reasons(self, placeholder_collision_example):
        variants = expand_variants(placeholder_collision_example)
        assert len(variants) == 5
        for v in variants[1:]:
            assert v.applied == (not v.skip_reasons)
        # Alice sits in sets 0 and 3, so exactly two rewrites survive
        usable = expand_with_tta(placeholder_collision_example)
        assert [v.variant_id for v in usable] == [0, 2, 3]

    def test_set_independent_conditions_block_everything(self, long_name_example):
        usable = expand_with_tta(long_name_example)
        assert [v.variant_id for v in usable] == [0]
        for v in expand_variants(long_name_example)[1:]:
            assert SkipReason.LONG_NAME in v.skip_reasons

    def test_expansion_is_deterministic(self):
        ex = make_example("Dara met Bolu before she left .", "she", "Dara", "Bolu")
        assert expand_variants(ex) == expand_variants(ex)


def _assert_variant_offsets(v):
    assert v.text[v.pronoun_offset : v.pronoun_offset + len(v.pronoun)] == v.pronoun
    assert v.text[v.a_offset : v.a_offset + len(v.name_a)] == v.name_a
    assert v.text[v.b_offset : v.b_offset + len(v.name_b)] == v.name_b


class TestOffsetIntegrity:
    def test_randomized_fixtures(self):
        rng = np.random.default_rng(2024)
        for i in range(300):
            ex = random_gap_example(rng, ex_id=f"rnd-{i}")
            long_or_nested = False
            for v in expand_variants(ex):
                _assert_variant_offsets(v)
                if v.applied:
                    pair = PLACEHOLDER_SETS[v.variant_id - 1].pair_for(ex.pronoun)
                    assert (v.name_a, v.name_b) == pair
                if {SkipReason.LONG_NAME, SkipReason.NESTED_CANDIDATES} & v.skip_reasons:
                    long_or_nested = True
            if long_or_nested:
                # these two conditions depend only on the example
                for v in expand_variants(ex)[1:]:
                    assert not v.applied

    def test_equal_length_placeholders_keep_all_offsets(self):
        ex = make_example(
            "Zorla met Brin at the mill before she left .",
            "she", "Zorla", "Brin", label="A",
        )
        v = apply_placeholders(ex, PLACEHOLDER_SETS[0])  # Alice(5), Kate(4)... B shifts
        assert v.a_offset == ex.a_offset
        ex2 = make_example(
            "Zorla met Brin at the mill before she left .".replace("Brin", "Mura"),
            "she", "Zorla", "Mura", label="A",
        )
        v2 = apply_placeholders(ex2, PLACEHOLDER_SETS[0])
        # Zorla->Alice and Mura->Kate are both length-preserving
        assert (v2.a_offset, v2.b_offset, v2.pronoun_offset) == (
            ex2.a_offset, ex2.b_offset, ex2.pronoun_offset
        )
        assert len(v2.text) == len(ex2.text)


class TestVariantsFile:
    def test_jsonl_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        examples = [random_gap_example(rng, ex_id=f"rt-{i}") for i in range(10)]
        expanded = {ex.id: expand_variants(ex) for ex in examples}
        path = tmp_path / "variants.jsonl"
        write_variants_jsonl(path, expanded)
        loaded = read_variants_jsonl(path)
        assert loaded == expanded

    def test_record_fields(self, tmp_path, placeholder_collision_example):
        ex = placeholder_collision_example
        path = tmp_path / "variants.jsonl"
        write_variants_jsonl(path, {ex.id: expand_variants(ex)})
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(records) == 5
        skipped = [r for r in records if r["variant"] > 0 and not r["applied"]]
        assert {r["variant"] for r in skipped} == {1, 4}
        assert all(r["skip_reasons"] == ["placeholder_in_text"] for r in skipped)
        for r in records:
            for key in ("id", "variant", "applied", "skip_reasons", "text",
                        "pronoun_offset", "a_offset", "b_offset"):
                assert key in r


class TestCoverage:
    def test_ten_example_fixture_matches_hand_classification(self):
        clean = [
            make_example(f"Firo{i} met Galu{i} before she left .", "she",
                         f"Firo{i}", f"Galu{i}", ex_id=f"c{i}")
            for i in range(6)
        ]
        examples = clean + [
            make_example("Alice went to live with Kathy and she cried .", "she",
                         "Alice", "Kathy", ex_id="p1"),
            make_example(
                "Plenette Pierson boxed out Candace Parker , and later Parker stood as she argued .",
                "she", "Plenette Pierson", "Candace Parker", ex_id="p2",
            ),
            make_example("Dorata Frances Zane met Molly and she ran .", "she",
                         "Dorata Frances Zane", "Molly", ex_id="p3"),
            make_example("Erin Fray spoke and she smiled .", "she",
                         "Erin Fray", "Erin", a_offset=0, b_offset=0, ex_id="p4"),
        ]
        cov = coverage_summary(examples)
        assert cov["examples"] == 10
        # by hand: sets 1 and 2 apply to 7 docs, sets 0 and 3 lose the Alice doc
        assert cov["per_set_applied"] == [0.6, 0.7, 0.7, 0.6]
        assert cov["applied_fraction"] == pytest.approx(0.65)
        assert cov["skip_rates"] == {
            "placeholder_in_text": 0.1,
            "partial_name_elsewhere": 0.1,
            "long_name": 0.1,
            "nested_candidates": 0.1,
        }
        assert cov["all_sets_applied_fraction"] == 0.6
        assert cov["any_set_applied_fraction"] == 0.7
