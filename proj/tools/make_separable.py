#!/usr/bin/env python3
"""Writes data/synthetic_separable.jsonl: 50 identifier pairs whose labels are
a fixed function of the roles of the two identifiers.

Four sections carry four identifiers (12 ordered pairs each) and one section
carries two (2 pairs). Every identifier belongs to one role; the label set of
a pair depends only on (role(source), role(destination)). Every rule fires in
at least two sections: a property without positives gets zero balancing
weight on its negatives and would not be learned.
"""

import argparse
import json
from pathlib import Path

ROLES = {
    "key": ["Kalpha", "Kbeta"],
    "msg": ["msgGamma", "msgDelta"],
    "ctr": ["ctrEpsilon", "ctrZeta"],
    "id": ["idEta", "idTheta"],
}
RULES = {
    ("key", "msg"): ["confidentiality", "integrity"],
    ("key", "key"): ["generate"],
    ("ctr", "id"): ["accounting"],
    ("id", "msg"): ["include"],
    ("msg", "id"): ["authentication"],
}
VERBS = {
    ("key", "msg"): "{s} ciphers and protects {d}.",
    ("key", "key"): "{d} is derived from {s}.",
    ("ctr", "id"): "{s} is charged to {d}.",
    ("id", "msg"): "{s} is included in {d}.",
    ("msg", "id"): "{s} authenticates {d}.",
}
SECTIONS = [
    ["Kalpha", "Kbeta", "msgGamma", "idEta"],
    ["Kbeta", "msgDelta", "ctrEpsilon", "idTheta"],
    ["Kalpha", "msgDelta", "ctrZeta", "idEta"],
    ["Kbeta", "Kalpha", "ctrEpsilon", "idEta"],
    ["msgGamma", "idTheta"],
]


def role_of(name: str) -> str:
    return next(r for r, names in ROLES.items() if name in names)


def build():
    yield {"format": "protodep.annotations", "version": 1}
    for i, ids in enumerate(SECTIONS):
        sentences = []
        samples = []
        for s in ids:
            for d in ids:
                if s == d:
                    continue
                rule = (role_of(s), role_of(d))
                if rule in RULES:
                    sentences.append(VERBS[rule].format(s=s, d=d))
                    samples.append((s, d, RULES[rule]))
        doc = f"synthetic-{i}"
        yield {"type": "section", "doc_id": doc, "section_id": "s", "identifiers": ids, "context": " ".join(sentences)}
        for s, d, labels in samples:
            yield {"type": "sample", "doc_id": doc, "section_id": "s", "source": s, "destination": d,
                   "labels": labels, "provenance": "expert"}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parent.parent / "data" / "synthetic_separable.jsonl")
    args = ap.parse_args()
    with args.out.open("w", encoding="utf-8", newline="\n") as f:
        for rec in build():
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
