"""Regenerate the shipped synthetic corpus and its canned model responses.

    python scripts/make_synthetic.py [OUT_DIR]

Output is deterministic; the default OUT_DIR is src/codemie/data/synthetic.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

TYPES = ["PER", "LOC", "ORG", "TIME", "OTHER"]
RELATIONS = ["PER-LOC_born_in", "PER-ORG_member_of", "PER-TIME_birth_time", "ORG-LOC_located_in"]
ATTRS = {
    "PER": ["name", "occupation", "gender", "nationality", "marital status", "place of birth", "place of death"],
    "LOC": ["name", "type", "function"],
    "ORG": ["name", "type", "establishment status", "affiliation", "domain"],
    "TIME": ["name", "incident"],
}

PEOPLE = [
    ("Bob Hope", "Hope", "actor", "male"),
    ("Ada Lovelace", "Lovelace", "mathematician", "female"),
    ("Marie Curie", "Curie", "physicist", "female"),
    ("Nikola Tesla", "Tesla", "engineer", "male"),
    ("Grace Hopper", "Hopper", "computer scientist", "female"),
    ("Louis Armstrong", "Armstrong", "musician", "male"),
    ("Frida Kahlo", "Kahlo", "painter", "female"),
    ("Alan Turing", "Turing", "mathematician", "male"),
    ("Amelia Earhart", "Earhart", "aviator", "female"),
    ("Charles Darwin", "Darwin", "naturalist", "male"),
    ("Rosalind Franklin", "Franklin", "chemist", "female"),
    ("Enrico Fermi", "Fermi", "physicist", "male"),
]
PLACES = ["London", "Paris", "Eltham", "Smiljan", "Warsaw", "New York", "Coyoacan", "Shrewsbury", "Rome", "Kansas"]
ORGS = [
    ("United Service Organizations", "charity"),
    ("Royal Society", "learned society"),
    ("Sorbonne", "university"),
    ("Westinghouse", "company"),
    ("US Navy", "military"),
    ("Bell Labs", "laboratory"),
]
YEARS = ["1903", "1815", "1867", "1856", "1906", "1901", "1907", "1912", "1897", "1809", "1920", "1901"]

ZH_DOCS = [
    {
        "text": "张伟是北京大学的教授。他出生于上海。",
        "entities": [("张伟", "PER"), ("他", "PER"), ("北京大学", "ORG"), ("上海", "LOC")],
        "chains": [(["张伟", "他"], "PER"), (["北京大学"], "ORG"), (["上海"], "LOC")],
        "relations": [("PER-ORG_member_of", 0, 1), ("PER-LOC_born_in", 0, 2)],
        "attrs": {"PER": [["张伟", "教授", "男", "中国", "未提及", "上海", "未提及"]], "ORG": [["北京大学", "大学", "未提及", "未提及", "教育"]]},
    },
    {
        "text": "李娜在2011年赢得了法国网球公开赛。",
        "entities": [("李娜", "PER"), ("2011年", "TIME"), ("法国网球公开赛", "OTHER")],
        "chains": [(["李娜"], "PER"), (["2011年"], "TIME"), (["法国网球公开赛"], "OTHER")],
        "relations": [],
        "attrs": {"PER": [["李娜", "网球运动员", "女", "中国", "未提及", "未提及", "未提及"]], "TIME": [["2011年", "赢得法国网球公开赛"]]},
    },
]


def box(rng: random.Random) -> list[float]:
    w = rng.randint(1000, 4000) / 10000
    h = rng.randint(1000, 4000) / 10000
    cx = rng.randint(int(w * 5000) + 1, 10000 - int(w * 5000) - 1) / 10000
    cy = rng.randint(int(h * 5000) + 1, 10000 - int(h * 5000) - 1) / 10000
    return [cx, cy, w, h]


def english_doc(i: int, rng: random.Random) -> tuple[dict, dict]:
    full, short, occ, gender = PEOPLE[i % len(PEOPLE)]
    born, moved = rng.sample(PLACES, 2)
    org, org_type = ORGS[i % len(ORGS)]
    year = YEARS[i % len(YEARS)]
    text = (
        f"{full} was born in {born} in {year}. The {occ} later joined the {org}, "
        f"and {short} spent many years in {moved}."
    )
    entities = [(full, "PER"), (short, "PER"), (born, "LOC"), (year, "TIME"), (org, "ORG"), (moved, "LOC")]
    chains = [([full, short], "PER"), ([born], "LOC"), ([year], "TIME"), ([org], "ORG"), ([moved], "LOC")]
    relations = [("PER-LOC_born_in", 0, 1), ("PER-TIME_birth_time", 0, 2), ("PER-ORG_member_of", 0, 3)]
    if i % 3 == 0:
        relations.append(("ORG-LOC_located_in", 3, 4))
    n_images = i % 3
    images = [f"syn-{i:02d}-{k}.jpg" for k in range(1, n_images + 1)]
    regions = []
    for ref in images:
        regions.append({"image": ref, "type": "PER", **dict(zip(("cx", "cy", "w", "h"), box(rng)))})
        if rng.random() < 0.5:
            regions.append({"image": ref, "type": "ORG", **dict(zip(("cx", "cy", "w", "h"), box(rng)))})
    attrs = {
        "PER": [[full, occ, gender, "not mentioned", "not mentioned", born, "not mentioned"]],
        "LOC": [[born, "city", "not mentioned"], [moved, "city", "residence"]],
        "ORG": [[org, org_type, "not mentioned", "not mentioned", "not mentioned"]],
        "TIME": [[year, f"birth of {full}"]],
    }
    doc = {
        "text": text,
        "language": "EN",
        "images": images,
        "entities": entities,
        "chains": chains,
        "relations": relations,
        "regions": regions,
    }
    return doc, attrs


def gold_dict(doc: dict) -> dict:
    return {
        "entities": [{"surface": s, "type": t} for s, t in doc["entities"]],
        "chains": [{"id": k, "mentions": m, "type": t} for k, (m, t) in enumerate(doc["chains"])],
        "relations": [{"type": r, "subject": s, "object": o} for r, s, o in doc["relations"]],
        "regions": doc.get("regions", []),
    }


def tuple_line(values: list[str]) -> str:
    return "(" + ", ".join(values) + ")"


def attribute_responses(doc_id: str, attrs: dict, rng: random.Random, i: int) -> dict[str, str]:
    out = {}
    for etype, rows in attrs.items():
        for run in (1, 2, 3):
            lines = []
            if run == 2:
                lines.append("Sure, here are the results:")
            # runs overlap on purpose so the union/dedup path is exercised
            for k, row in enumerate(rows):
                if run == 3 and k % 2:
                    continue
                lines.append(tuple_line(row))
            if etype == "ORG" and i % 5 == 0 and run == 1:
                lines.append(tuple_line(["Road to Bali", "film", "not mentioned", "Paramount", "cinema"]))
            if etype == "PER" and run == 3:
                lines.append(tuple_line(["not mentioned"] * len(ATTRS["PER"])))
            out[f"attr/{doc_id}/{etype}/run{run}"] = "\n".join(lines)
    return out


SG_OBJECTS = ["man", "woman", "hat", "stage", "microphone", "table", "book", "flag", "car", "tree"]
SG_RELATIONS = ["wearing", "standing on", "holding", "next to", "behind"]


def scene_graph_responses(doc_id: str, images: list[str], rng: random.Random) -> dict[str, str]:
    out = {}
    for ref in images:
        triples = [
            (rng.choice(SG_OBJECTS), rng.choice(SG_OBJECTS), rng.choice(SG_RELATIONS)) for _ in range(rng.randint(2, 4))
        ]
        for run in (1, 2, 3):
            chosen = triples if run != 2 else triples[:1]
            out[f"sg/{doc_id}/{ref}/run{run}"] = "\n".join(f"- ({s}, {o}, {r})" for s, o, r in chosen)
    return out


def main(out_dir: Path) -> None:
    rng = random.Random(20240601)
    docs, responses = [], {}
    for i in range(23):
        doc_id = f"syn-{i:02d}"
        doc, attrs = english_doc(i, rng)
        docs.append({"id": doc_id, "text": doc["text"], "language": "EN", "images": doc["images"], "gold": gold_dict(doc)})
        responses.update(attribute_responses(doc_id, attrs, rng, i))
        responses.update(scene_graph_responses(doc_id, doc["images"], rng))
    for k, zh in enumerate(ZH_DOCS):
        doc_id = f"syn-zh-{k}"
        images = [f"{doc_id}-1.jpg"]
        zh = {**zh, "regions": [{"image": images[0], "type": "PER", "cx": 0.5, "cy": 0.45, "w": 0.3, "h": 0.6}]}
        docs.append({"id": doc_id, "text": zh["text"], "language": "ZH", "images": images, "gold": gold_dict(zh)})
        responses.update(attribute_responses(doc_id, zh["attrs"], rng, 1))
        responses.update(scene_graph_responses(doc_id, images, rng))
    schema = {
        "types": TYPES,
        "attributes": {t: ATTRS.get(t, []) for t in TYPES},
        "relation_types": RELATIONS,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "corpus.jsonl").open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(d, ensure_ascii=False) + "\n")
    (out_dir / "schema.json").write_text(json.dumps(schema, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    (out_dir / "mock_responses.json").write_text(
        json.dumps({"responses": dict(sorted(responses.items())), "default": ""}, indent=1, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(docs)} documents and {len(responses)} canned responses to {out_dir}")


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src" / "codemie" / "data" / "synthetic"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
