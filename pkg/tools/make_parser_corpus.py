"""Regenerate tests/fixtures/completion_corpus.json.

100 synthetic model completions that perturb the waypoint form in the ways
chat models actually do (case changes, bracket residue, prose padding,
markdown, number formats). 99 carry a recoverable point number; one is
genuinely unparseable and must raise.
"""

import json
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures",
                   "completion_corpus.json")

PREFIXES = [
    "",
    "Sure! ",
    "Okay, here's my decision.\n\n",
    "Let me think about this step by step. The frontier points look most "
    "promising since several are labeled new. ",
    "## Decision\n",
]

FORMS = [
    "The point I have selected is point number: {n}.",
    "The point I have selected is point number: [{n}].",
    "The point I have selected is Point Number {n}.",
    "the point i have selected is point number:{n}",
    "I need to select a waypoint from a numbered list of graph points, "
    "frontier points and object points. The point I have selected is point "
    "number: {n} .",
    "My selected waypoint is point number {n}.",
    "POINT NUMBER: {n}",
    "After weighing the options, point number: #{n} is my choice.",
]

DESCRIPTIONS = [
    " My environment can be described as an office corridor with several doors.",
    " My environment can be described as [a cluttered indoor space].",
    " my environment can be described as a large open hall. ",
    "",
]

REASONINGS = [
    " My reasoning is that this point is far from my prior states and opens "
    "unexplored space.",
    " My reasoning is that this point [sits next to a detected object].",
    " My reasoning is that this point: leads toward the target room.",
    "",
]

SUFFIXES = [
    "",
    "\n\nGood luck!",
    "\nI will reassess after the robot arrives.",
    " ]",
]


def main():
    rng = random.Random(20240817)
    corpus = []
    for i in range(99):
        n = rng.randint(1, 60)
        text = (
            rng.choice(PREFIXES)
            + rng.choice(FORMS).format(n=n)
            + rng.choice(DESCRIPTIONS)
            + rng.choice(REASONINGS)
            + rng.choice(SUFFIXES)
        )
        corpus.append({"text": text, "expect": n})
    corpus.append({
        "text": "I cannot decide between the waypoints; they all look equally "
                "promising to me. Please advise.",
        "expect": None,
    })
    rng.shuffle(corpus)
    with open(OUT, "w", encoding="utf-8") as f:
        json.dump(corpus, f, indent=1)
        f.write("\n")
    print(f"wrote {OUT} ({len(corpus)} entries)")


if __name__ == "__main__":
    main()
