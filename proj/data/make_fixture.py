#!/usr/bin/env python3
"""Regenerates data/fixture: a tiny two-aspect corpus, 8-d vectors, taxonomy and config."""
import json
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parent / "fixture"
rng = random.Random(7)

GROUPS = {0: ["picture", "photo", "image"], 1: ["sound", "audio", "volume"]}
CUES = {0: ["sharp", "bright", "colorful", "crisp"], 1: ["loud", "clear", "booming", "bassy"]}
FILLER = ["the", "is", "very", "really", "quite", "and", "it", "was"]
TEMPLATES = [
    "the {p} is very {c}",
    "the {p} was really {c}",
    "{p} quite {c} and {c2}",
    "it has {c} {p}",
    "really {c} {p} and it was {c2}",
]


def vec(values):
    return " ".join(f"{v:.4f}" for v in values)


def write_vectors():
    lines = []
    # Cue words carry the aspect signal in dims 0-3.
    for g, cues in CUES.items():
        for w in cues:
            v = [rng.gauss(0, 0.1) for _ in range(8)]
            v[0 + 2 * g] += 1.0
            v[1 + 2 * g] += 0.8
            lines.append(f"{w} {vec(v)}")
    # Phrase vectors are interleaved across aspects on purpose.
    for i, w in enumerate(["picture", "sound", "photo", "audio", "image", "volume"]):
        v = [rng.gauss(0, 0.1) for _ in range(8)]
        v[4 + i % 4] += 1.0
        lines.append(f"{w} {vec(v)}")
    for w in FILLER + ["has"]:
        v = [rng.gauss(0, 0.6) for _ in range(8)]
        lines.append(f"{w} {vec(v)}")
    (OUT / "vectors.txt").write_text("\n".join(lines) + "\n")


def write_corpus():
    records = []
    for g, phrases in GROUPS.items():
        for p in phrases:
            for i in range(10):
                t = TEMPLATES[i % len(TEMPLATES)]
                c, c2 = rng.sample(CUES[g], 2)
                tokens = t.format(p=p, c=c, c2=c2).split()
                start = tokens.index(p)
                records.append({"tokens": tokens,
                                "mentions": [{"phrase": p, "start": start, "end": start + 1, "group": g}]})
    rng.shuffle(records)
    (OUT / "corpus.jsonl").write_text("".join(json.dumps(r) + "\n" for r in records))


def write_taxonomy():
    lines = [{"concept": "root", "parents": [], "count": 0}]
    for top in ["a", "b"]:
        lines.append({"concept": top, "parents": ["root"], "count": 0})
    for mid, top in [("a1", "a"), ("a2", "a"), ("b1", "b"), ("b2", "b")]:
        lines.append({"concept": mid, "parents": [top], "count": 0})
    leaves = {"l1": "a1", "l2": "a1", "l3": "a2", "l4": "a2", "l5": "b1", "l6": "b1", "l7": "b2", "l8": "b2"}
    for leaf, mid in leaves.items():
        lines.append({"concept": leaf, "parents": [mid], "count": 1})
    words = {"picture": "l1", "photo": "l2", "image": "l3", "sound": "l5", "audio": "l6", "volume": "l7"}
    for w, c in words.items():
        lines.append({"word": w, "concepts": [c]})
    (OUT / "taxonomy.jsonl").write_text("".join(json.dumps(r) + "\n" for r in lines))


CONFIG = """\
; Fixture pipeline configuration. Paths are relative to the working directory.
[data]
corpus = data/fixture/corpus.jsonl
vectors = data/fixture/vectors.txt
taxonomy = data/fixture/taxonomy.jsonl

[run]
seed = 42
out-dir = out
"""

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    write_vectors()
    write_corpus()
    write_taxonomy()
    (OUT / "config.ini").write_text(CONFIG)
