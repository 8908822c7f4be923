#!/usr/bin/env python3
"""Generate the desk-scale fixture datasets under fixtures/.

Deterministic: fixed RNG seed, stable iteration order. Re-running rewrites
identical files.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"
rng = random.Random(20240517)

# ---------------------------------------------------------------- detox ----

GARDEN = {
    "nouns": ["gardener", "roses", "tulips", "hedge", "lawn", "trellis", "orchard",
              "seedlings", "ferns", "moss", "daisies", "shed", "path", "beds"],
    "verbs": ["waters", "trims", "plants", "weeds", "rakes", "prunes", "tends"],
    "adjs": ["quiet", "tidy", "green", "sunny", "shaded", "mossy"],
}
TEA = {
    "nouns": ["kettle", "teapot", "saucer", "oolong", "chamomile", "biscuits", "tray",
              "porcelain", "cups", "honey", "scones", "jasmine"],
    "verbs": ["steeps", "pours", "serves", "warms", "brews", "stirs"],
    "adjs": ["warm", "gentle", "fragrant", "amber", "sweet", "steaming"],
}
MUSIC = {
    "nouns": ["violin", "cello", "melody", "chorus", "sonata", "flute", "harp",
              "rhythm", "quartet", "ballad", "tune", "strings"],
    "verbs": ["plays", "hums", "tunes", "rehearses", "performs", "composes"],
    "adjs": ["soft", "bright", "merry", "slow", "lilting", "tender"],
}
STORM = {
    "nouns": ["thunder", "lightning", "hurricane", "tempest", "gale", "downpour",
              "cyclone", "squall", "hail", "torrent", "whirlwind", "storm"],
    "verbs": ["rages", "crashes", "floods", "batters", "howls", "strikes", "roars",
              "lashes"],
    "adjs": ["violent", "furious", "savage", "roaring", "black", "howling"],
}

TEMPLATES = [
    "the {a1} {n1} {v1} the {a2} {n2}",
    "a {n1} {v1} near the {a1} {n2}",
    "the {n1} {v1} and the {n2} {v2}",
    "every {n1} {v1} beside the {a1} {n2}",
    "the {a1} {n1} {v1} while a {n2} {v2}",
    "a {a1} {n1} {v1} under the {n2}",
]


def sentence(topic, rng):
    t = rng.choice(TEMPLATES)
    return t.format(
        n1=rng.choice(topic["nouns"]),
        n2=rng.choice(topic["nouns"]),
        v1=rng.choice(topic["verbs"]),
        v2=rng.choice(topic["verbs"]),
        a1=rng.choice(topic["adjs"]),
        a2=rng.choice(topic["adjs"]),
    )


def make_detox():
    out = ROOT / "detox"
    out.mkdir(parents=True, exist_ok=True)

    safe = [sentence(t, rng) for t in (GARDEN, TEA, MUSIC) for _ in range(100)]
    storm = [sentence(STORM, rng) for _ in range(100)]
    corpus = safe + storm
    rng.shuffle(corpus)
    (out / "corpus.txt").write_text("\n".join(corpus) + "\n")

    # Demonstration examples: the corpus storm sentences plus fresh variants.
    examples = storm + [sentence(STORM, rng) for _ in range(40)]
    with (out / "examples.jsonl").open("w") as f:
        for i, text in enumerate(examples):
            f.write(json.dumps({"id": f"s{i:03d}", "text": text}) + "\n")

    # Prompts: prefixes of corpus sentences, 40 storm-leaning + 80 safe.
    prompts = []
    storm_pool = [s for s in corpus if s in storm]
    safe_pool = [s for s in corpus if s not in storm]
    for s in rng.sample(storm_pool, 40):
        k = rng.choice([2, 3])
        prompts.append(" ".join(s.split()[:k]))
    for s in rng.sample(safe_pool, 80):
        k = rng.choice([2, 3, 4])
        prompts.append(" ".join(s.split()[:k]))
    rng.shuffle(prompts)
    with (out / "prompts.jsonl").open("w") as f:
        for i, p in enumerate(prompts):
            f.write(json.dumps({"id": f"d{i:03d}", "prompt": p}) + "\n")


# ------------------------------------------------------------ copyright ----

NAME_SYLLABLES = ["bel", "dor", "fen", "gal", "hol", "kar", "lun", "mar", "nor",
                  "pel", "rav", "sel", "tor", "ul", "ven", "wyn", "zan", "bri",
                  "cas", "eld"]
TRADES = ["quarry", "mill", "forge", "loom", "kiln", "dock", "granary", "tannery",
          "brewery", "smithy", "orchard", "salt-works"]
GOODS = ["stone", "flour", "iron", "cloth", "clay", "fish", "grain", "leather",
         "ale", "nails", "apples", "salt"]
MOVES = ["sends", "ships", "carries", "hauls", "trades", "delivers", "barters",
         "ferries"]
KEEPS = ["keeps", "stores", "guards", "stacks", "counts", "seals", "weighs",
         "records"]
PLACES = ["harbor", "gate", "square", "bridge", "cellar", "tower", "market",
          "crossing"]
TIMES = ["dawn", "dusk", "noon", "midnight", "spring", "harvest", "winter",
         "solstice"]


def invent_name(rng, used):
    while True:
        name = "".join(rng.sample(NAME_SYLLABLES, rng.choice([2, 3])))
        if name not in used:
            used.add(name)
            return name


def make_paragraph(rng, used_names):
    """Alternate paragraph-unique names with common trade words so that
    every bigram contains a name: an order-3 model then memorizes each
    paragraph as one deterministic chain."""
    names = [invent_name(rng, used_names) for _ in range(3)]
    commons = (
        rng.sample(TRADES, 3) + rng.sample(GOODS, 4) + rng.sample(MOVES, 3)
        + rng.sample(KEEPS, 3) + rng.sample(PLACES, 3) + rng.sample(TIMES, 2)
    )
    rng.shuffle(commons)
    words = []
    for i, common in enumerate(commons * 2):  # ~36 pairs -> ~72 tokens
        words.append(names[(i * 2) % 3])
        words.append(common)
        if len(words) >= 56:
            break
    return " ".join(words)


def make_copyright():
    out = ROOT / "copyright"
    out.mkdir(parents=True, exist_ok=True)
    used = set()
    paragraphs = [make_paragraph(rng, used) for _ in range(60)]
    (out / "corpus.txt").write_text("\n".join(paragraphs) + "\n")

    with (out / "examples.jsonl").open("w") as f:
        for i, text in enumerate(paragraphs):
            f.write(json.dumps({"id": f"p{i:04d}", "text": text}) + "\n")

    with (out / "prompts.jsonl").open("w") as f:
        for i, text in enumerate(paragraphs[:50]):
            prompt = " ".join(text.split()[:6])
            f.write(json.dumps({"id": f"c{i:03d}", "prompt": prompt,
                                "reference": text}) + "\n")


# -------------------------------------------------------------- hostile ----

def make_hostile():
    """Short documents whose vocabulary saturates the model: with the
    documents as demonstration examples even a single generated token sits
    well above low thresholds."""
    out = ROOT / "hostile"
    out.mkdir(parents=True, exist_ok=True)
    used = set()
    docs = []
    for _ in range(12):
        a = invent_name(rng, used)
        b = invent_name(rng, used)
        good = rng.choice(GOODS)
        move = rng.choice(MOVES)
        docs.append(f"{a} {move} {good} to {b}")
    (out / "corpus.txt").write_text("\n".join(docs) + "\n")
    with (out / "prompts.jsonl").open("w") as f:
        for i, d in enumerate(docs[:10]):
            prompt = " ".join(d.split()[:2])
            f.write(json.dumps({"id": f"h{i:03d}", "prompt": prompt}) + "\n")


if __name__ == "__main__":
    make_detox()
    make_copyright()
    make_hostile()
    for sub in ("detox", "copyright", "hostile"):
        for p in sorted((ROOT / sub).glob("*")):
            lines = p.read_text().count("\n")
            print(f"{p.relative_to(ROOT.parent)}: {lines} lines")
