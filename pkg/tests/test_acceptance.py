"""Acceptance suite: one group of tests per criterion, summarized at the end of the run."""

import itertools
import json
import random
import time
from functools import partial
from importlib import resources

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from codemie import cli
from codemie.core import (
    AnnotationSet,
    Document,
    Entity,
    EntityChain,
    RelationTriple,
    VisualRegion,
    annotations_equivalent,
    is_not_mentioned,
    normalize,
)
from codemie.evaluation import b_cubed, ceaf_e, hallucination_rate, iou, muc, score_chains, score_grounding
from codemie.knowledge import (
    CachingClient,
    CompletionRequest,
    MockClient,
    generate_attributes,
    RawTupleRow,
    parse_tuple_lines,
    postprocess_attributes,
    run_triplicate,
)
from codemie.parser import has_hallucination, parse_output
from codemie.template import build_input_template, render_gold_output
from codemie.visual import fuse

from conftest import IMAGES, RELATIONS, TYPES, annotation_sets, make_doc, make_schema
from oracles import b3_oracle, ceaf_e_oracle, entity_pair_oracle, f1, fuse_oracle, muc_oracle, raster_iou, set_partitions
from test_metrics import _relation_prf, box, lattice_box
from test_template import GOLDEN, bob_hope_doc, bob_hope_knowledge

criterion = pytest.mark.criterion


# --- 1 ---------------------------------------------------------------------


@criterion(1, "round-trip fidelity over >= 500 generated annotation sets, < 10 s")
def test_round_trip_fidelity():
    rng = random.Random(1)
    doc, schema = make_doc(), make_schema()
    samples = [random_annotation_set(rng, doc, max_items=20, surface=adversarial_surface) for _ in range(600)]
    start = time.perf_counter()
    for ann in samples:
        parsed, report = parse_output(render_gold_output(ann, doc, schema).text, schema, image_refs=doc.image_refs)
        assert annotations_equivalent(parsed, ann, tol=1e-4), report
    elapsed = time.perf_counter() - start
    # every structure shows up at both ends of the size range
    for field in ("entities", "chains", "relations", "regions"):
        sizes = [len(getattr(a, field)) for a in samples]
        assert min(sizes) == 0 and max(sizes) >= 15, field
    assert elapsed < 10, f"{elapsed:.1f}s"


@criterion(1, "round-trip fidelity over >= 500 generated annotation sets, < 10 s")
@settings(max_examples=500, database=None, suppress_health_check=list(HealthCheck))
@given(annotation_sets(max_items=20))
def test_round_trip_fidelity_property(ann):
    doc, schema = make_doc(), make_schema()
    parsed, report = parse_output(render_gold_output(ann, doc, schema).text, schema, image_refs=doc.image_refs)
    assert annotations_equivalent(parsed, ann, tol=1e-4), report


# --- 2 ---------------------------------------------------------------------


def _rich_outputs(rng, n):
    doc, schema = make_doc(), make_schema()
    outs = []
    while len(outs) < n:
        outs.append(render_gold_output(random_annotation_set(rng, doc), doc, schema).text)
    return outs


def _mutate(rng, text):
    data = bytearray(text.encode("utf-8"))
    for _ in range(rng.randint(1, 8)):
        op = rng.random()
        pos = rng.randrange(len(data) + 1)
        if op < 0.3 and data:
            del data[min(pos, len(data) - 1) : pos + rng.randint(1, 4)]
        elif op < 0.6:
            data[pos:pos] = rng.choice([b"[", b"]", b"=", b",", b'"', b"\\", b"\n", b" ", b"\xff", b"\xe4\xb8", b"1e9"])
        elif op < 0.8 and data:
            data[min(pos, len(data) - 1)] = rng.randrange(256)
        else:
            # splice in a slice of the text itself
            a = rng.randrange(len(data) + 1)
            data[pos:pos] = data[a : a + rng.randint(1, 40)]
    return bytes(data)


def _noise(rng):
    if rng.random() < 0.5:
        return bytes(rng.randrange(256) for _ in range(rng.randint(0, 200)))
    return "".join(rng.choice('entity_dic[]"=,0123 \nchain_dic.-e') for _ in range(rng.randint(0, 200))).encode()


@criterion(2, "parser totality on 100,000 fuzzed byte strings, deterministic, < 60 s")
def test_parser_totality():
    rng = random.Random(20240601)
    schema = make_schema()
    bases = _rich_outputs(rng, 50)
    inputs = [_mutate(rng, rng.choice(bases)) if i % 2 else _noise(rng) for i in range(100_000)]
    reports = []
    start = time.perf_counter()
    for raw in inputs:
        _, report = parse_output(raw, schema, image_refs=IMAGES)
        reports.append(report)
    elapsed = time.perf_counter() - start
    for i in range(0, len(inputs), 10):
        assert parse_output(inputs[i], schema, image_refs=IMAGES)[1] == reports[i]
    assert any(r.deviations for r in reports) and any(not r.deviations for r in reports)
    assert elapsed < 60, f"{elapsed:.1f}s"


# --- 3 ---------------------------------------------------------------------


_ADVERSARIAL = list("abcXYZ019 _-'\"\\[],=.#:{}()") + ["é", "e\u0301", "北", "京", "\t", "ß"]


def adversarial_surface(rng: random.Random) -> str:
    while True:
        s = normalize("".join(rng.choice(_ADVERSARIAL) for _ in range(rng.randint(1, 12))))
        if s:
            return s


def plain_surface(rng: random.Random) -> str:
    return rng.choice(["Bob", "Hope", "New York", "北京", 'say "hi"', "a\\b", "Eltham", "1903", "x, y"]) + str(rng.randrange(50))


def random_annotation_set(rng: random.Random, doc: Document, max_items: int = 8, surface=plain_surface) -> AnnotationSet:
    surface = partial(surface, rng)
    entities = tuple(Entity(surface(), rng.choice(TYPES)) for _ in range(rng.randint(0, max_items)))
    chains = tuple(
        EntityChain(i, tuple(dict.fromkeys(surface() for _ in range(rng.randint(1, 3)))), rng.choice(TYPES))
        for i in range(rng.randint(0, max_items))
    )
    relations = ()
    if chains:
        relations = tuple(
            RelationTriple(rng.choice(RELATIONS), rng.randrange(len(chains)), rng.randrange(len(chains)))
            for _ in range(rng.randint(0, max_items))
        )
    regions = tuple(
        VisualRegion(
            rng.choice(doc.image_refs), rng.choice(TYPES), rng.random(), rng.random(), rng.uniform(1e-6, 1), rng.uniform(1e-6, 1)
        )
        for _ in range(rng.randint(0, max_items))
    )
    return AnnotationSet(entities, chains, relations, regions)


_PROSE = ["Sure! Here is the extraction.", "I hope this helps.", "```python", "Note: some entities are ambiguous."]


def _contaminate(rng, text):
    lines = text.split("\n")
    filled = [i for i, line in enumerate(lines) if line.strip()]
    kind = rng.randrange(4) if filled else 0
    if kind == 0:
        lines.insert(rng.randint(0, len(lines)), rng.choice(_PROSE))
        return "\n".join(lines)
    i = rng.choice(filled)
    if kind == 1:
        # drop the closing bracket
        lines[i] = lines[i].rstrip()[:-1]
    elif kind == 2:
        # misspell the map name
        name = lines[i].split("[", 1)[0]
        lines[i] = name + "s" + lines[i][len(name) :]
    else:
        lines[i] = lines[i].replace(" = ", " : ", 1)
    return "\n".join(lines)


@criterion(3, "hallucination rate equals k/200 for k in {0, 20, 100}")
@pytest.mark.parametrize("k", [0, 20, 100])
def test_hallucination_calibration(k):
    rng = random.Random(1000 + k)
    schema = make_schema()
    docs = [make_doc(doc_id=f"h{i}") for i in range(200)]
    outputs = [render_gold_output(random_annotation_set(rng, d), d, schema).text for d in docs]
    dirty = set(rng.sample(range(200), k))
    reports = []
    for i, (doc, text) in enumerate(zip(docs, outputs)):
        if i in dirty:
            mutated = _contaminate(rng, text)
            assert mutated != text
            text = mutated
        reports.append(parse_output(text, schema, document_id=doc.id, image_refs=doc.image_refs)[1])
    flagged = {i for i, r in enumerate(reports) if has_hallucination(r)}
    assert flagged == dirty
    assert hallucination_rate(reports) == k / 200


# --- 4 ---------------------------------------------------------------------


@criterion(4, "coreference metrics match exhaustive oracles on all partitions of <= 6 mentions; fixtures exact")
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_metric_oracles(n):
    parts = [[frozenset(c) for c in p] for p in set_partitions("abcdef"[:n])]
    for pred, gold in itertools.product(parts, repeat=2):
        for got, want in ((muc(pred, gold), muc_oracle(pred, gold)), (b_cubed(pred, gold), b3_oracle(pred, gold)), (ceaf_e(pred, gold), ceaf_e_oracle(pred, gold))):
            assert abs(got.precision - want[0]) <= 1e-9
            assert abs(got.recall - want[1]) <= 1e-9
            assert abs(got.f1 - f1(*want)) <= 1e-9


@criterion(4, "coreference metrics match exhaustive oracles on all partitions of <= 6 mentions; fixtures exact")
def test_metric_fixtures():
    gold = [{"a", "b", "c"}]
    m = muc([{"a", "b"}, {"c"}], gold)
    assert (m.recall, m.precision, m.f1) == (0.5, 1.0, 2 / 3)
    b = b_cubed([{"a"}, {"b"}], [{"a", "b"}])
    assert (b.recall, b.precision) == (0.5, 1.0)
    c = ceaf_e([{"a", "b"}], gold)
    assert (c.precision, c.recall, c.f1) == (0.8, 0.8, 0.8)
    s = score_chains([{"a", "b"}, {"c"}], gold)
    assert (s.muc.f1, s.b_cubed.f1, s.ceaf_e.f1) == (2 / 3, 5 / 7, 8 / 15)
    assert s.f1 == 67 / 105


# --- 5 ---------------------------------------------------------------------


@criterion(5, "IoU vs 1000x1000 raster on 1,000 pairs; 9/23 fixture to 1e-12; strict at 0.5")
def test_iou_correctness():
    rng = random.Random(99)
    for _ in range(1000):
        a, b = lattice_box(rng), lattice_box(rng)
        assert abs(iou(a, b) - raster_iou(a.corners(), b.corners())) <= 1e-3
    assert abs(iou(box(0.5, 0.5, 0.4, 0.4), box(0.6, 0.6, 0.4, 0.4)) - 9 / 23) <= 1e-12
    a, b = box(0.5, 0.5, 0.5, 0.5), box(0.5, 0.5, 0.5, 0.25)
    assert iou(a, b) == 0.5
    assert score_grounding([a], [b], threshold=0.5).tp == 0
    assert score_grounding([a], [box(0.5, 0.5, 0.5, 0.2501)], threshold=0.5).tp == 1


# --- 6 ---------------------------------------------------------------------


@criterion(6, "single-mention chains reduce relation scoring to entity-pair scoring (100 instances)")
def test_relation_reduction():
    rng = random.Random(6)
    names = [f"e{i}" for i in range(8)]
    for _ in range(100):
        def draw():
            return [(rng.choice(RELATIONS), rng.choice(names), rng.choice(names)) for _ in range(rng.randint(0, 10))]

        pred, gold = draw(), draw()
        # bias toward overlap so the matcher is exercised
        pred += rng.sample(gold, min(len(gold), rng.randint(0, 4)))
        assert _relation_prf(pred, gold) == entity_pair_oracle(pred, gold)


# --- 7 ---------------------------------------------------------------------


@criterion(7, "fusion matches loop oracle on 100 tensors up to 8x64x128; permutation and linearity")
def test_fusion():
    rng = np.random.default_rng(7)
    shapes = [(8, 64, 128)] + [tuple(int(rng.integers(1, m + 1)) for m in (8, 64, 128)) for _ in range(99)]
    for q, n_p, d in shapes:
        patches = rng.standard_normal((q, n_p, d)).astype(np.float32)
        pos = rng.standard_normal((q, d)).astype(np.float32)
        out = fuse(patches, pos).data
        assert np.max(np.abs(out - fuse_oracle(patches, pos))) <= 1e-6
        perm = patches[:, rng.permutation(n_p), :]
        assert np.max(np.abs(fuse(perm, pos).data - out)) <= 1e-6
        other = rng.standard_normal((q, n_p, d)).astype(np.float32)
        alpha = float(rng.uniform(-2, 2))
        zero = np.zeros((q, d))
        lhs = fuse(alpha * patches + other, zero).data
        rhs = alpha * fuse(patches, zero).data + fuse(other, zero).data
        assert np.max(np.abs(lhs - rhs)) <= 1e-5


# --- 8 ---------------------------------------------------------------------

PER_ATTRS = make_schema().attributes("PER")


@criterion(8, "triplicate dedup, attribute record invariants, byte-identical cached replay")
def test_triplicate_dedup():
    rng = random.Random(8)
    pool = ["a", "A", " a", "a ", "a  b", "a b", "北京", "北京 ", "é", "é"]
    for i in range(1000):
        runs = [
            "\n".join("(%s, %s)" % (rng.choice(pool), rng.choice(pool)) for _ in range(rng.randint(0, 6)))
            for _ in range(3)
        ]
        client = MockClient({f"r/run{n + 1}": raw for n, raw in enumerate(runs)})
        rows = run_triplicate(
            lambda run: CompletionRequest("p", "m", tag=f"r/run{run}"), client, lambda raw, run: parse_tuple_lines(raw, 2, run).rows
        )
        keys = [r.key() for r in rows]
        assert len(keys) == len(set(keys)), i


@criterion(8, "triplicate dedup, attribute record invariants, byte-identical cached replay")
@settings(max_examples=1000, database=None)
@given(st.integers(0, 2**32))
def test_attribute_invariants(seed):
    rng = random.Random(seed)
    values = ["Bob", "Bob Hope", "actor", "not mentioned", "Not mentioned.", "", "  ", "未提及", "male", "Luftwaffe"]
    rows = [RawTupleRow(tuple(rng.choice(values) for _ in PER_ATTRS)) for _ in range(rng.randint(0, 6))]
    for rec in postprocess_attributes(rows, "PER", PER_ATTRS, make_schema(), known_entities={"Luftwaffe": {"ORG"}}):
        assert "name" in rec.values and len(rec.values) >= 2
        assert all(v and not is_not_mentioned(v) for v in rec.values.values())
        if rec.values["name"] == "Luftwaffe":
            assert rec.flags


@criterion(8, "triplicate dedup, attribute record invariants, byte-identical cached replay")
def test_cached_replay(tmp_path):
    doc = Document("d", "Bob Hope was born in Eltham.")

    live = MockClient(default="(Bob Hope, actor, male, British, not mentioned, Eltham, not mentioned)")
    first = generate_attributes([doc], make_schema(), CachingClient(live, tmp_path))
    snapshot = {p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())}
    dead = MockClient(default="(Someone, Else, entirely, x, y, z, w)")
    cache = CachingClient(dead, tmp_path)
    replay = generate_attributes([doc], make_schema(), cache)
    assert cache.misses == 0 and not dead.calls
    as_bytes = lambda recs: json.dumps({k: [r.to_dict() for r in v] for k, v in recs.items()}, sort_keys=True).encode()
    assert as_bytes(replay) == as_bytes(first)
    assert {p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())} == snapshot


# --- 9 ---------------------------------------------------------------------


@criterion(9, "synthetic 25-document pipeline with mock backend, < 30 s, gold self-score F1 = 1.0")
def test_end_to_end(tmp_path, capsys):
    data = resources.files("codemie").joinpath("data", "synthetic")
    corpus, mock = str(data / "corpus.jsonl"), str(data / "mock_responses.json")
    rundir = str(tmp_path / "run")
    start = time.perf_counter()
    for argv in (
        ["gen-attrs", corpus, "--mock", mock],
        ["gen-sg", corpus, "--mock", mock],
        ["build", corpus],
        ["parse", corpus, str(tmp_path / "run" / "gold_outputs.jsonl")],
        ["score", corpus],
    ):
        assert cli.main(["--run-dir", rundir, *argv]) == 0, argv
    elapsed = time.perf_counter() - start
    capsys.readouterr()
    report = json.loads((tmp_path / "run" / "score.json").read_text())
    assert report["documents"] == 25
    assert {t: report["tasks"][t]["f1"] for t in report["tasks"]} == {
        "entities": 1.0,
        "chains": 1.0,
        "relations": 1.0,
        "grounding": 1.0,
    }
    assert elapsed < 30, f"{elapsed:.1f}s"


# --- 10 --------------------------------------------------------------------


@criterion(10, "input templates byte-identical to committed goldens")
def test_template_goldens():
    schema = make_schema()
    doc = bob_hope_doc()
    attrs, graphs = bob_hope_knowledge()
    assert build_input_template(doc, attrs, graphs, schema).text.encode("utf-8") == (GOLDEN / "bob_hope_input.py").read_bytes()
    assert render_gold_output(doc.gold, doc, schema).text.encode("utf-8") == (GOLDEN / "bob_hope_output.txt").read_bytes()
    bare = Document("bare", "No images here.")
    assert build_input_template(bare, [], [], schema).text.encode("utf-8") == (GOLDEN / "bare_input.py").read_bytes()
    golden = (GOLDEN / "bob_hope_input.py").read_text(encoding="utf-8")
    assert '    """first , extract entities from text .\n' in golden
    assert "    # extacted entities , entity chains , relations and visual areas\n" in golden
