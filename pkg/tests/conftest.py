import numpy as np
import pytest

from gapres.corpus import GapExample

GAP_HEADER = "ID\tText\tPronoun\tPronoun-offset\tA\tA-offset\tA-coref\tB\tB-offset\tB-coref\tURL"

# Two rows with every field chosen by hand; tests compare against these
# literal values, so keep them in sync with FIXTURE_EXAMPLES below.
FIXTURE_TSV = "\n".join(
    [
        GAP_HEADER,
        "dev-1\tZorla met Brin at the fair before she left .\tshe\t34\tZorla\t0\tTRUE\tBrin\t10\tFALSE\thttp://example.org/wiki/Zorla",
        "dev-2\tTom greeted Hana and thanked him kindly .\thim\t29\tTom\t0\tFALSE\tHana\t12\tFALSE\t",
    ]
)

FIXTURE_EXAMPLES = [
    GapExample(
        id="dev-1",
        text="Zorla met Brin at the fair before she left .",
        pronoun="she",
        pronoun_offset=34,
        name_a="Zorla",
        a_offset=0,
        a_coref=True,
        name_b="Brin",
        b_offset=10,
        b_coref=False,
        url="http://example.org/wiki/Zorla",
    ),
    GapExample(
        id="dev-2",
        text="Tom greeted Hana and thanked him kindly .",
        pronoun="him",
        pronoun_offset=29,
        name_a="Tom",
        a_offset=0,
        a_coref=False,
        name_b="Hana",
        b_offset=12,
        b_coref=False,
        url="",
    ),
]


def make_example(
    text,
    pronoun,
    name_a,
    name_b,
    *,
    ex_id="ex-0",
    a_offset=None,
    b_offset=None,
    pronoun_offset=None,
    label="A",
    url="",
):
    """Build a valid example, locating offsets by search unless given."""
    if a_offset is None:
        a_offset = text.index(name_a)
    if b_offset is None:
        b_offset = text.index(name_b)
    if pronoun_offset is None:
        pronoun_offset = text.index(pronoun)
    return GapExample(
        id=ex_id,
        text=text,
        pronoun=pronoun,
        pronoun_offset=pronoun_offset,
        name_a=name_a,
        a_offset=a_offset,
        a_coref=label == "A",
        name_b=name_b,
        b_offset=b_offset,
        b_coref=label == "B",
        url=url,
    )


# --- the worked skip-condition fixtures

@pytest.fixture
def placeholder_collision_example():
    # a placeholder first name is already in the document
    return make_example(
        "Alice went to live with Nick's sister Kathy , who desperately tried to care for her .",
        "her",
        "Alice",
        "Kathy",
        label="A",
    )


@pytest.fixture
def partial_name_example():
    # full name whose last name also occurs alone
    text = (
        "The Shock's Plenette Pierson made a hard box-out on Candace Parker , causing "
        "both players to become entangled and fall over . As Parker tried to stand up , "
        "she protested ."
    )
    return make_example(text, "she", "Plenette Pierson", "Candace Parker", label="B")


@pytest.fixture
def long_name_example():
    return make_example(
        "Elizabeth Frances Zane carried the message while Molly watched , and she ran on .",
        "she",
        "Elizabeth Frances Zane",
        "Molly",
        label="A",
    )


@pytest.fixture
def nested_names_example():
    # candidate B is labeled inside candidate A, a tagging artifact
    text = "Erin Fray spoke at the meeting and she smiled ."
    return make_example(
        text, "she", "Erin Fray", "Erin", a_offset=0, b_offset=0, label="A"
    )


def random_gap_example(rng: np.random.Generator, ex_id="rnd"):
    """A randomized but always-valid example for offset property tests.

    Exercises repeated mentions, two-word names, occasional placeholder
    collisions, and every pronoun form.
    """
    from gapres.anonymize import PLACEHOLDER_SETS
    from gapres.synth import make_name_pool

    pool = make_name_pool(40, seed=int(rng.integers(1 << 30)))
    placeholders = sorted({n for s in PLACEHOLDER_SETS for n in s.all_names})
    pronouns = ["he", "him", "his", "she", "her", "hers", "He", "She"]
    fillers = ["walked", "to", "the", "old", "mill", "and", "spoke", "softly", "then", "left"]

    def pick_name():
        if rng.random() < 0.35:
            return f"{pool[int(rng.integers(len(pool)))]} {pool[int(rng.integers(len(pool)))]}"
        return pool[int(rng.integers(len(pool)))]

    name_a = pick_name()
    name_b = pick_name()
    pronoun = pronouns[int(rng.integers(len(pronouns)))]

    mentions = ["A"] + ["A"] * int(rng.integers(0, 3)) + ["B"] + ["B"] * int(rng.integers(0, 2))
    rng.shuffle(mentions)
    tokens = []
    plan = []
    for m in mentions:
        plan.extend([None] * int(rng.integers(1, 4)) + [m])
    plan.extend([None, "P"] + [None] * int(rng.integers(1, 3)))
    if rng.random() < 0.15:
        plan.insert(int(rng.integers(len(plan))), "X")  # a stray placeholder name

    offsets = {}
    pos = 0
    for item in plan:
        if item is None:
            token = fillers[int(rng.integers(len(fillers)))]
        elif item == "A":
            token = name_a
            offsets.setdefault("A", pos)
        elif item == "B":
            token = name_b
            offsets.setdefault("B", pos)
        elif item == "P":
            token = pronoun
            offsets["P"] = pos
        else:
            token = placeholders[int(rng.integers(len(placeholders)))]
        tokens.append(token)
        pos += len(token) + 1
    text = " ".join(tokens) + " ."

    label = ["A", "B", "NEITHER"][int(rng.integers(3))]
    return make_example(
        text,
        pronoun,
        name_a,
        name_b,
        ex_id=ex_id,
        a_offset=offsets["A"],
        b_offset=offsets["B"],
        pronoun_offset=offsets["P"],
        label=label,
    )
