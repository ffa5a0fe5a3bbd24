#!/usr/bin/env python3
"""Generates the synthetic fixtures under fixtures/.

fixtures/synthetic: three dialogue sources, two image sources, text and image
embeddings with planted topic structure, and simulated annotations whose
scores rise with similarity. fixtures/unit: small files for loader and
preprocess tests.

Run from the repository root: python3 tools/make_fixture.py
Then refresh oracles: python3 tests/oracles/fixture_oracle.py fixtures/synthetic --write
                      python3 tests/oracles/unit_oracle.py fixtures/unit --write
"""

import json
import struct
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests" / "oracles"))
import fixture_oracle  # noqa: E402

DIM = 32
SPLIT_SIZES = {"train": 50, "valid": 15, "test": 35}
IMAGE_SPLITS = {"coco": {"train": 90, "valid": 30, "test": 60}, "flickr": {"train": 75, "valid": 25, "test": 50}}

TOPICS = {
    "dog": "dog puppy leash bark fetch collar paws tail retriever kennel",
    "beach": "beach sand waves ocean surf sunset shore seashell towel tide",
    "food": "pizza pasta dinner kitchen recipe cheese sauce oven noodles salad",
    "soccer": "soccer ball goal team match stadium kick referee league striker",
    "city": "city street skyline traffic downtown subway building crowd avenue tower",
    "cat": "cat kitten whiskers purr yarn litter meow tabby claws nap",
    "train": "train station railway platform ticket carriage engine track conductor commute",
    "cake": "cake birthday frosting candles bakery chocolate slice dessert sprinkles party",
    "snow": "snow winter ski sled snowman frost mountain blizzard jacket cold",
    "guitar": "guitar music concert song chords band stage amplifier melody strings",
    "garden": "garden flowers roses tulips soil seeds watering bloom greenhouse shovel",
    "car": "car engine highway garage tires driving wheel sedan roadtrip parking",
}
FILLER = (
    "really think today maybe nice great time well yeah sure okay lovely wonderful honestly "
    "weekend morning evening friend family happy glad tired busy exciting amazing funny "
    "awesome favorite little big new old fun long short quiet loud best pretty"
).split()
STOPS = "the a is it was i you we so and but with my your this that of to in on at for".split()
EMPTY_TURNS = ["It is.", "So am I.", "Me too.", "I did!", "You were.", "That is it.", "We are, are we not."]
COMBO_SHIFT = {
    "daily+coco": 0.00,
    "daily+flickr": 0.04,
    "persona+coco": -0.03,
    "persona+flickr": 0.02,
    "empathetic+coco": 0.05,
    "empathetic+flickr": -0.02,
}


def unit(rng, n):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


def sentence(rng, topic, question):
    words = []
    for _ in range(rng.integers(4, 9)):
        r = rng.random()
        if topic and r < 0.45:
            words.append(rng.choice(TOPICS[topic].split()))
        elif r < 0.75:
            words.append(rng.choice(FILLER))
        else:
            words.append(rng.choice(STOPS))
    text = " ".join(words)
    text = text[0].upper() + text[1:]
    return text + ("?" if question else rng.choice([".", "!", "."]))


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def write_binary(path, items, dim):
    with open(path, "wb") as f:
        f.write(b"EMB1" + struct.pack("<I", dim))
        for key, vec in items:
            raw = key.encode("utf-8")
            f.write(struct.pack("<H", len(raw)) + raw + np.asarray(vec, dtype="<f4").tobytes())


def make_synthetic(rng, out):
    out.mkdir(parents=True, exist_ok=True)
    topic_names = list(TOPICS)
    centers = {t: unit(rng, DIM) for t in topic_names}

    text_vectors = []
    for source in fixture_oracle.DIALOGUE_SOURCES:
        records = []
        for split, count in SPLIT_SIZES.items():
            for n in range(count):
                did = f"{source}-{split}-{n:03d}"
                topic = topic_names[rng.integers(len(topic_names))]
                turns = []
                for t in range(rng.integers(4, 9)):
                    kind = rng.random()
                    if t > 0 and kind < 0.08:
                        text, on_topic = EMPTY_TURNS[rng.integers(len(EMPTY_TURNS))], False
                    else:
                        on_topic = kind < 0.7
                        text = sentence(rng, topic if on_topic else None, rng.random() < 0.25)
                    turns.append({"speaker": t % 2, "text": text})
                    strength = rng.uniform(0.15, 1.6) if on_topic else 0.0
                    vec = strength * centers[topic] + rng.normal(scale=1.0 / np.sqrt(DIM), size=DIM)
                    text_vectors.append((f"{did}#{t}", vec))
                records.append({"dialogue_id": did, "source": source, "split": split, "turns": turns})
        write_jsonl(out / f"{source}.jsonl", records)
    write_binary(out / "text_embeddings.bin", text_vectors, DIM)

    image_vectors = []
    for source, splits in IMAGE_SPLITS.items():
        records = []
        for split, count in splits.items():
            for n in range(count):
                iid = f"{source}_{split}_{n:04d}"
                topic = topic_names[rng.integers(len(topic_names))]
                words = [rng.choice(TOPICS[topic].split()) for _ in range(3)] + [rng.choice(FILLER)]
                caption = f"A photo of {words[0]} and {words[1]} with {words[2]}, {words[3]}"
                records.append({"image_id": iid, "source": source, "split": split, "caption": caption})
                vec = centers[topic] + rng.normal(scale=0.6 / np.sqrt(DIM), size=DIM)
                image_vectors.append((iid, vec))
        write_jsonl(out / f"{source}.jsonl", records)
    with open(out / "image_embeddings.jsonl", "w", encoding="utf-8") as f:
        for key, vec in image_vectors:
            f.write(json.dumps({"id": key, "vector": [float(np.float32(x)) for x in vec]}) + "\n")


def simulate_annotations(rng, out):
    dialogues, images, text_emb, image_emb = fixture_oracle.load_fixture(out)
    instances = fixture_oracle.enumerate_instances(dialogues, images, text_emb, image_emb)
    by_combo = {}
    for inst in instances:
        by_combo.setdefault(inst["combination"], []).append(inst)
    rows = []
    for combo in sorted(by_combo):
        for seg in fixture_oracle.segments(by_combo[combo]):
            take = min(30, len(seg))
            for idx in sorted(rng.choice(len(seg), size=take, replace=False)):
                inst = seg[idx]
                base = (inst["similarity"] - 0.15 - COMBO_SHIFT[combo]) / 0.45
                for annotator in ("ann1", "ann2", "ann3"):
                    q1 = int(np.clip(np.rint(1 + 2.4 * base + rng.normal(scale=0.5)), 1, 3))
                    q2 = int(np.clip(np.rint(0.8 + 2.2 * base + rng.normal(scale=0.5)), 1, 3))
                    q3 = int(np.clip(np.rint(1 + 4.2 * base + rng.normal(scale=0.7)), 1, 5))
                    q4 = "" if rng.random() < 0.3 else str(rng.integers(1, 5))
                    rows.append(f"{inst['instance_id']},{annotator},{q1},{q2},{q3},{q4}")
    (out / "annotations.csv").write_text("instance_id,annotator_id,q1,q2,q3,q4\n" + "\n".join(rows) + "\n")

    th = fixture_oracle.thresholds(instances, fixture_oracle.read_annotations(out / "annotations.csv"))
    for combo, info in th.items():
        if info["chosen"] is None:
            raise SystemExit(f"{combo} did not calibrate; adjust the score model")
        gap = min(abs(i["similarity"] - info["chosen"]) for i in by_combo[combo])
        if gap < 1e-7:
            raise SystemExit(f"{combo}: an instance lies {gap} from the threshold; pick another seed")


def make_unit(rng, out):
    out.mkdir(parents=True, exist_ok=True)
    topic_names = list(TOPICS)
    dialogues = []
    for n in range(50):
        topic = topic_names[n % len(topic_names)]
        turns = [{"speaker": t % 2, "text": sentence(rng, topic, rng.random() < 0.3)} for t in range(rng.integers(2, 10))]
        dialogues.append({"dialogue_id": f"u{n:02d}", "source": "daily", "split": "train", "turns": turns})
    write_jsonl(out / "dialogues50.jsonl", dialogues)

    captions = []
    for n in range(200):
        topic = topic_names[rng.integers(len(topic_names))]
        captions.append({"image_id": f"cap{n:03d}", "source": "coco", "split": ["train", "valid", "test"][n % 3],
                         "caption": sentence(rng, topic, False)})
    write_jsonl(out / "captions200.jsonl", captions)

    vectors = [(f"v{n:04d}", rng.normal(scale=rng.uniform(0.01, 50.0), size=64)) for n in range(1000)]
    write_binary(out / "vectors1000.bin", vectors, 64)

    # 40 dialogues of 10 turns: exactly 100 of the 400 turns are questions,
    # spread so that some land on first turns.
    qturns = []
    positions = set(rng.choice(400, size=100, replace=False).tolist())
    for n in range(40):
        turns = []
        for t in range(10):
            q = n * 10 + t in positions
            turns.append({"speaker": t % 2, "text": sentence(rng, "dog", q) + ("  " if q and t % 3 == 0 else "")})
        qturns.append({"dialogue_id": f"q{n:02d}", "source": "daily", "split": "train", "turns": turns})
    write_jsonl(out / "questions25.jsonl", qturns)

    with open(out / "sentences.txt", "w", encoding="utf-8") as f:
        for n in range(120):
            f.write(sentence(rng, topic_names[n % len(topic_names)], False) + "\n")
        f.write("It's the one I've been waiting for, isn't it\n")
        f.write("Ça coûte 20€ au café\n")
        f.write("THE END\n")


def main():
    rng = np.random.default_rng(20240517)
    make_synthetic(rng, ROOT / "fixtures" / "synthetic")
    simulate_annotations(rng, ROOT / "fixtures" / "synthetic")
    make_unit(rng, ROOT / "fixtures" / "unit")


if __name__ == "__main__":
    main()
