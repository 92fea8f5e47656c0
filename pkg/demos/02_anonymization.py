"""The name-anonymization rewrite: placeholder sets, skip rules, offset remapping.

Run: python3 demos/02_anonymization.py
"""

from gapres.anonymize import (
    PLACEHOLDER_SETS,
    check_skip_conditions,
    expand_variants,
    expand_with_tta,
)
from gapres.corpus import GapExample


def example(text, pronoun, name_a, name_b, label="A"):
    return GapExample(
        id="demo", text=text, pronoun=pronoun,
        pronoun_offset=text.index(pronoun),
        name_a=name_a, a_offset=text.index(name_a), a_coref=label == "A",
        name_b=name_b, b_offset=text.index(name_b), b_coref=label == "B",
        url="",
    )


print("placeholder inventory:")
for pset in PLACEHOLDER_SETS:
    print(f"  set {pset.set_id}: F={pset.feminine}  M={pset.masculine}")

clean = example("Konstanza said she met Dara .", "she", "Dara", "Konstanza", label="B")
print("\nclean example expands into", len(expand_with_tta(clean)), "usable variants:")
for v in expand_with_tta(clean):
    marker = "original" if v.variant_id == 0 else f"set {v.variant_id - 1}"
    print(f"  [{marker:>8}] {v.text}  (pronoun at {v.pronoun_offset})")

print("\nwhy offsets move: replacing the 9-char 'Konstanza' with 'Kate' shifts")
print("everything after it left by 5, and the remap reproduces exactly that.")

skippy = [
    ("placeholder collision",
     example("Alice went to live with Kathy and cared for her .", "her", "Alice", "Kathy")),
    ("partial name elsewhere",
     example("Plenette Pierson boxed out Candace Parker , and later Parker stood as she argued .",
             "she", "Plenette Pierson", "Candace Parker", label="B")),
    ("name too long",
     example("Elizabeth Frances Zane met Nadia , and she ran on .", "she",
             "Elizabeth Frances Zane", "Nadia")),
    ("nested candidates",
     example("Erin Fray spoke and she smiled .", "she", "Erin Fray", "Erin")),
]
print("\nskip rules on the classic cases:")
for title, ex in skippy:
    reasons = {
        pset.set_id: sorted(r.value for r in check_skip_conditions(ex, pset))
        for pset in PLACEHOLDER_SETS
    }
    usable = len(expand_with_tta(ex))
    print(f"  {title}: per-set reasons {reasons} -> {usable} usable variant(s)")

print("\nfull expansion records (applied flag + reasons) feed the variants JSONL:")
for v in expand_variants(skippy[0][1]):
    print(f"  variant {v.variant_id}: applied={v.applied} "
          f"reasons={sorted(r.value for r in v.skip_reasons)}")
