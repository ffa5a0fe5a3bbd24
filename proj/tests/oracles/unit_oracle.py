#!/usr/bin/env python3
"""Counting and filtering oracles for fixtures/unit.

Counts records and turns by reading the files line by line, and applies the
stop-word set difference to every line of sentences.txt.

Usage: unit_oracle.py <unit fixture dir> [--write]
"""

import json
import math
import struct
import sys
from pathlib import Path

from fixture_oracle import STOPWORDS, is_question, tokenize


def count_lines(path):
    with open(path, encoding="utf-8") as f:
        return sum(1 for line in f if line.strip())


def turns(path):
    with open(path, encoding="utf-8") as f:
        return sum(len(json.loads(line)["turns"]) for line in f if line.strip())


def max_norm_error(path):
    raw = Path(path).read_bytes()
    (dim,) = struct.unpack_from("<I", raw, 4)
    pos, worst, count = 8, 0.0, 0
    while pos < len(raw):
        (n,) = struct.unpack_from("<H", raw, pos)
        pos += 2 + n
        vec = struct.unpack_from(f"<{dim}f", raw, pos)
        pos += 4 * dim
        norm = math.sqrt(sum(x * x for x in vec))
        stored = [struct.unpack("<f", struct.pack("<f", x / norm))[0] for x in vec]
        worst = max(worst, abs(math.sqrt(sum(x * x for x in stored)) - 1.0))
        count += 1
    return count, dim, worst


def main():
    root = Path(sys.argv[1])
    vectors, dim, worst = max_norm_error(root / "vectors1000.bin")
    with open(root / "questions25.jsonl", encoding="utf-8") as f:
        qdialogues = [json.loads(line) for line in f if line.strip()]
    with open(root / "sentences.txt", encoding="utf-8") as f:
        stripped = [[t for t in tokenize(line.rstrip("\n")) if t not in STOPWORDS] for line in f]
    result = {
        "dialogues50": {"dialogues": count_lines(root / "dialogues50.jsonl"), "turns": turns(root / "dialogues50.jsonl")},
        "captions200": {"images": count_lines(root / "captions200.jsonl")},
        "vectors1000": {"vectors": vectors, "dimension": dim, "max_norm_error": worst},
        "questions25": {
            "turns": sum(len(d["turns"]) for d in qdialogues),
            "questions": sum(1 for d in qdialogues for t in d["turns"] if is_question(t["text"])),
        },
        "stopword_count": len(STOPWORDS),
        "sentences_stripped": stripped,
    }
    text = json.dumps(result, indent=1, ensure_ascii=False) + "\n"
    if "--write" in sys.argv:
        (root / "oracle.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text[:600])


if __name__ == "__main__":
    main()
