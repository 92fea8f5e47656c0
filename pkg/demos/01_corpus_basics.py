"""Parsing, validating, correcting, and folding a GAP-format corpus.

Run: python3 demos/01_corpus_basics.py
"""

from gapres.corpus import (
    GapValidationError,
    LabelCorrection,
    apply_corrections,
    folds_to_json,
    parse_gap_tsv,
    split_folds,
)

TSV = """\
ID\tText\tPronoun\tPronoun-offset\tA\tA-offset\tA-coref\tB\tB-offset\tB-coref\tURL
demo-1\tZorla met Brin at the fair before she left .\tshe\t34\tZorla\t0\tTRUE\tBrin\t10\tFALSE\thttp://example.org/wiki/Zorla
demo-2\tTom greeted Hana and thanked him kindly .\thim\t29\tTom\t0\tFALSE\tHana\t12\tFALSE\t
demo-3\tMira asked Odo to fetch her coat .\ther\t24\tMira\t0\tTRUE\tOdo\t11\tFALSE\t
demo-4\tKarel and Sten argued until he apologised .\the\t28\tKarel\t0\tFALSE\tSten\t10\tTRUE\t
"""

examples = parse_gap_tsv(TSV)
print(f"parsed {len(examples)} examples; labels:",
      {ex.id: ex.label for ex in examples})

# every offset is checked against the text during parsing
broken = TSV.replace("\t34\t", "\t33\t")
try:
    parse_gap_tsv(broken)
except GapValidationError as err:
    print("validation catches a shifted offset ->", err)

# label corrections rewrite the coref flags; evaluation can still use originals
corrected = apply_corrections(examples, [LabelCorrection("demo-2", "A")])
print("demo-2 label after correction:", corrected[1].label)

# deterministic, size-balanced folds
folds = split_folds(examples, k=2, seed=0)
print("fold sizes:", [len(f) for f in folds])
print(folds_to_json(examples, folds, seed=0))
