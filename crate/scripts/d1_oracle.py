#!/usr/bin/env python3
"""Brute-force oracle for the d1 fixture.

Recomputes, straight from crates/datafabric/fixtures/d1.jsonl and the
documented models, every constant the test suite pins for that fixture:
record byte sizes, placements, per-DPU digests, the five scripted request
answers, and the relation graph at theta = 0.25. Exits nonzero if any
recomputed value disagrees with the pinned one, so drift between this
script and the Rust tests is loud.

Run from the repository root:  python3 scripts/d1_oracle.py
"""

import json
import sys
from itertools import combinations
from pathlib import Path

FIXTURE = Path(__file__).resolve().parents[1] / "crates/datafabric/fixtures/d1.jsonl"

GRID = [(0, 0), (0, 1), (1, 0), (1, 1)]  # 2x2, row-major

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211


def fnv1a(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) % 2**64
    return h


def load_records():
    records = []
    for line in FIXTURE.read_text().splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        records.append(
            {
                "id": raw["id"],
                "keywords": sorted({t.lower() for t in raw.get("tags", [])}),
                "fields": dict(raw.get("fields", {})),
            }
        )
    return records


def serialized_size(record) -> int:
    size = 16
    for value in record["fields"].values():
        size += len(value) if isinstance(value, str) else 8
    for kw in record["keywords"]:
        size += len(kw) + 1
    return size


def round_robin(records):
    return {r["id"]: GRID[i % len(GRID)] for i, r in enumerate(records)}


def keyword_hash(records):
    return {
        r["id"]: GRID[fnv1a(min(r["keywords"]).encode()) % len(GRID)] for r in records
    }


def digests(records, placement):
    out = {dpu: set() for dpu in GRID}
    for r in records:
        out[placement[r["id"]]].update(r["keywords"])
    return out


def matches(record, mode, kws):
    held = set(record["keywords"])
    return bool(held & set(kws)) if mode == "any" else set(kws) <= held


def holds(record, field, op, literal):
    value = record["fields"].get(field)
    if value is None:
        return False
    if isinstance(value, str) != isinstance(literal, str):
        return False
    if isinstance(value, bool) or isinstance(literal, bool):
        return False
    return {
        "==": value == literal,
        "!=": value != literal,
        "<": value < literal,
        "<=": value <= literal,
        ">": value > literal,
        ">=": value >= literal,
    }[op]


def counters(records, placement, mode, kws):
    digest = digests(records, placement)
    accept = sum(
        1
        for dpu in GRID
        if (digest[dpu] & set(kws) if mode == "any" else set(kws) <= digest[dpu])
    )
    return accept, len(GRID) - accept


def select(records, mode, kws, conds):
    return [
        r
        for r in records
        if matches(r, mode, kws) and all(holds(r, *c) for c in conds)
    ]


def jaccard(a, b):
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def relation_edges(records, placement, theta):
    digest = digests(records, placement)
    edges = []
    for a, b in combinations(GRID, 2):
        w = jaccard(digest[a], digest[b])
        if w >= theta:
            distance = abs(a[0] - b[0]) + abs(a[1] - b[1])
            edges.append((a, b, w, distance))
    return edges


def check(label, computed, pinned):
    ok = computed == pinned
    print(f"{'ok ' if ok else 'FAIL'} {label}: {computed!r}" + ("" if ok else f" (pinned {pinned!r})"))
    return ok


def main() -> int:
    records = load_records()
    rr = round_robin(records)
    ok = True

    sizes = {r["id"]: serialized_size(r) for r in records}
    ok &= check("serialized sizes", sizes, {
        "r1": 40, "r2": 40, "r3": 44, "r4": 34,
        "r5": 33, "r6": 40, "r7": 34, "r8": 44,
    })
    ok &= check("total bytes", sum(sizes.values()), 309)

    ok &= check("round-robin digests", {d: sorted(kws) for d, kws in digests(records, rr).items()}, {
        (0, 0): ["info", "log", "sensor", "temp"],
        (0, 1): ["sensor", "temp"],
        (1, 0): ["cat", "humidity", "image", "sensor"],
        (1, 1): ["error", "log", "pressure", "sensor"],
    })
    ok &= check("keyword-hash placement", keyword_hash(records), {
        "r1": (1, 1), "r2": (1, 1), "r3": (0, 0), "r4": (0, 1),
        "r5": (0, 1), "r6": (1, 1), "r7": (1, 1), "r8": (1, 0),
    })

    # the five scripted requests, in order
    q1 = select(records, "any", ["temp"], [("value", ">", 29)])
    ok &= check("Q1 count", len(q1), 2)
    ok &= check("Q1 counters", counters(records, rr, "any", ["temp"]), (2, 2))

    q2 = select(records, "any", ["temp"], [])
    ok &= check("Q2 sum(value)", sum(r["fields"]["value"] for r in q2), 93)

    q3 = select(records, "any", ["sensor"], [("city", "==", "Oslo")])
    ok &= check("Q3 search", sorted(r["id"] for r in q3), ["r1", "r3", "r8"])

    q4 = select(records, "any", ["temp"], [("value", "<", 30)])
    for r in q4:
        r["fields"]["value"] *= 2
    ok &= check("Q4 scale updates", len(q4), 1)

    q5 = select(records, "any", ["temp"], [])
    ok &= check("Q5 sum after scale", sum(r["fields"]["value"] for r in q5), 121)

    ok &= check("relation edges at theta 0.25", relation_edges(records, rr, 0.25), [
        ((0, 0), (0, 1), 0.5, 1),
        ((0, 0), (1, 1), 1 / 3, 2),
    ])

    print("all pinned values reproduced" if ok else "mismatch against pinned values")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
