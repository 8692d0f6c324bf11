#!/usr/bin/env python3
"""Build the bundled 50-review fixture corpus (products + reviews JSONL).

The reviews mix five shapes: repeated-noun mentions, pronoun-only chains,
noun-plus-pronoun chains, one-off mentions, and no-mention chatter. The mix
is chosen so rule-based annotators of different sophistication agree on most
but not all sentence-level mask bits.

Annotations are produced separately by the annotator tool:
    annotate --products products.jsonl --reviews reviews.jsonl --out annotations.jsonl
"""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "fixture50"

PRODUCTS = [
    ("p01", "Twisty Pins for Upholstery, Slipcovers, and Bedskirts 50/pkg",
     "Package of 50 clear twisty pins for securing fabrics and accent trims .",
     "pins", True),
    ("p02", "Steel Kitchen Blender",
     "Powerful blender with a steel jar and five speed settings .",
     "blender", False),
    ("p03", "Copper Desk Lamp",
     "Warm copper lamp with an adjustable arm and fabric cord .",
     "lamp", False),
    ("p04", "Garden Work Gloves",
     "Breathable gloves with reinforced palms for yard work .",
     "gloves", True),
    ("p05", "Folding Dish Rack",
     "Compact rack that folds flat and drains into the sink .",
     "rack", False),
    ("p06", "Compact Camp Stove",
     "Lightweight stove that packs small and boils water fast .",
     "stove", False),
    ("p07", "Electric Tea Kettle",
     "Quick kettle with auto shutoff and a wide spout .",
     "kettle", False),
    ("p08", "Woven Door Mat",
     "Durable mat that traps dirt and dries quickly .",
     "mat", False),
    ("p09", "Portable Bluetooth Speaker",
     "Small speaker with long battery life and deep bass .",
     "speaker", False),
    ("p10", "Ergonomic Office Chair",
     "Supportive chair with adjustable lumbar and mesh back .",
     "chair", False),
    ("p11", "Insulated Water Bottle",
     "Double wall bottle that keeps drinks cold all day .",
     "bottle", False),
    ("p12", "Ceramic Chef Knife",
     "Sharp knife that holds an edge and never rusts .",
     "knife", False),
]

NOUN_SENTS = [
    "The {noun} arrived well packed and the {noun} {verb} great .",
    "This {noun} {verb} better than my old one .",
    "The {noun} {verb} exactly as described .",
    "Honestly the {noun} {verb} perfect for the price .",
    "My second {noun} and this {noun} {verb} even better .",
]
PRONOUN_FOLLOW = [
    "{pron} {verb} every single day since .",
    "After weeks {pron} still {verb} like new .",
    "I would say {pron} {verb} exactly as promised .",
    "{pron} even {verb} after heavy use .",
]
ONE_OFF = [
    "Only gripe is the {noun} smelled odd at first .",
    "For the price the {noun} is hard to beat .",
]
CHATTER = [
    "Shipping took almost two weeks .",
    "The box was dented on arrival .",
    "Customer service answered me quickly .",
    "Delivery driver left everything at the gate .",
    "Would order from this seller again .",
    "My kids thought the color was funny .",
    "Packaging had way too much plastic .",
    "Arrived two days earlier than promised .",
]

VERBS_S = ["works", "looks", "feels", "performs", "sounds"]
VERBS_P = ["work", "look", "feel", "perform", "sound"]


def sentence(template, noun, plural, rng):
    verb = rng.choice(VERBS_P if plural else VERBS_S)
    pron = "they" if plural else "it"
    if "{pron}" in template and template.startswith("{pron}"):
        template = template.replace("{pron}", pron.capitalize(), 1)
    return template.format(noun=noun, verb=verb, pron=pron).split()


def build_reviews(rng):
    reviews = []
    shapes = (
        ["noun_repeat"] * 14
        + ["pronoun_only"] * 10
        + ["noun_then_pronoun"] * 8
        + ["single_mention"] * 5
        + ["no_mention"] * 12
    )
    rng.shuffle(shapes)
    # the case-study review ships verbatim as the 50th
    per_product = {pid: 0 for pid, *_ in PRODUCTS}
    for i, shape in enumerate(shapes):
        pid, _, _, noun, plural = PRODUCTS[i % len(PRODUCTS)]
        per_product[pid] += 1
        rid = f"{pid}_r{per_product[pid]:02d}"
        chatter = iter(rng.sample(CHATTER, 3))  # no repeats within one review
        sents = []
        if shape == "noun_repeat":
            sents.append(sentence(rng.choice(NOUN_SENTS), noun, plural, rng))
            sents.append(next(chatter).split())
            sents.append(sentence(rng.choice(NOUN_SENTS), noun, plural, rng))
        elif shape == "pronoun_only":
            pron = "They" if plural else "It"
            verb = rng.choice(VERBS_P if plural else VERBS_S)
            sents.append(f"{pron} {verb} better than expected .".split())
            sents.append(sentence(rng.choice(PRONOUN_FOLLOW), noun, plural, rng))
            sents.append(next(chatter).split())
        elif shape == "noun_then_pronoun":
            sents.append(sentence(rng.choice(NOUN_SENTS), noun, plural, rng))
            sents.append(sentence(rng.choice(PRONOUN_FOLLOW), noun, plural, rng))
            sents.append(next(chatter).split())
        elif shape == "single_mention":
            sents.append(next(chatter).split())
            sents.append(sentence(rng.choice(ONE_OFF), noun, plural, rng))
            sents.append(next(chatter).split())
        else:
            sents = [next(chatter).split() for _ in range(3)]
        votes = rng.choice([0, 1, 2, 3, 5, 9, 17, 40])
        reviews.append(
            {
                "review_id": rid,
                "product_id": pid,
                "sentences": sents,
                "features_path": None,
                "votes": int(votes),
            }
        )
    sofa = {
        "review_id": "p01_rcase",
        "product_id": "p01",
        "sentences": [
            "I bought these to pin the loose material on a sofa cover and they worked like a charm .".split(),
            "The sofa cover definitely looks form fitting now .".split(),
        ],
        "features_path": None,
        "votes": 17,
    }
    return reviews[:49] + [sofa]


def main():
    rng = random.Random(50)
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "products.jsonl", "w", encoding="utf-8") as fh:
        for pid, name, desc, _, _ in PRODUCTS:
            fh.write(
                json.dumps(
                    {
                        "product_id": pid,
                        "name": name.split(),
                        "sentences": [desc.split()],
                        "features_path": None,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    with open(OUT / "reviews.jsonl", "w", encoding="utf-8") as fh:
        for review in build_reviews(rng):
            fh.write(json.dumps(review, ensure_ascii=False) + "\n")
    print(f"wrote fixture corpus to {OUT}")


if __name__ == "__main__":
    main()
