import io
import json
from fractions import Fraction
from importlib import resources
from pathlib import Path

import httpx
import numpy as np
import pytest

from codemie import __version__, cli
from codemie.visual import read_embeddings, write_embeddings

GOLDEN = Path(__file__).parent / "golden" / "mutated"


def synthetic(name):
    return str(resources.files("codemie").joinpath("data", "synthetic", name))


def run(tmp_path, *argv, capsys=None):
    code = cli.main(["--run-dir", str(tmp_path / "run"), *argv])
    out = capsys.readouterr().out if capsys else ""
    return code, (json.loads(out) if code == 0 and out.strip() else out)


def jsonl(path):
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


@pytest.fixture
def pipeline(tmp_path, capsys):
    corpus, mock = synthetic("corpus.jsonl"), synthetic("mock_responses.json")
    for argv in (
        ("gen-attrs", corpus, "--mock", mock),
        ("gen-sg", corpus, "--mock", mock),
        ("build", corpus),
    ):
        code, _ = run(tmp_path, *argv, capsys=capsys)
        assert code == 0, argv
    return tmp_path / "run", corpus


class TestEndToEnd:
    def test_gold_outputs_score_perfectly(self, pipeline, tmp_path, capsys):
        rundir, corpus = pipeline
        assert run(tmp_path, "parse", corpus, str(rundir / "gold_outputs.jsonl"), capsys=capsys)[0] == 0
        code, result = run(tmp_path, "score", corpus, capsys=capsys)
        assert code == 0
        assert result["f1"] == {"entities": 1.0, "chains": 1.0, "relations": 1.0, "grounding": 1.0}
        assert result["hallucination_rate"] == 0.0
        code, errors = run(tmp_path, "errors", corpus, capsys=capsys)
        assert code == 0 and all(sum(c.values()) == 0 for c in errors.values())
        code, h = run(tmp_path, "halluc", capsys=capsys)
        assert code == 0 and h["samples"] == 25

    def test_attribute_generation_drops_and_flags(self, pipeline):
        rundir, _ = pipeline
        rows = {r["doc_id"]: r["records"] for r in jsonl(rundir / "attributes.jsonl")}
        assert len(rows) == 25
        records = [rec for recs in rows.values() for rec in recs]
        assert all("name" in r["values"] and len(r["values"]) >= 2 for r in records)
        assert any(r["flags"] for r in rows["syn-00"])

    def test_templates_are_python(self, pipeline):
        import ast

        rundir, _ = pipeline
        for row in jsonl(rundir / "templates.jsonl"):
            ast.parse(row["input"])

    def test_rerun_is_identical_and_cached(self, pipeline, tmp_path, capsys):
        rundir, corpus = pipeline
        before = (rundir / "attributes.jsonl").read_bytes()
        code, result = run(tmp_path, "gen-attrs", corpus, "--mock", synthetic("mock_responses.json"), capsys=capsys)
        assert code == 0 and result["cache_misses"] == 0 and result["cache_hits"] > 0
        assert (rundir / "attributes.jsonl").read_bytes() == before

    def test_cache_replays_without_backend(self, pipeline, tmp_path, capsys, monkeypatch):
        rundir, corpus = pipeline

        def refuse(*a, **k):
            raise AssertionError("backend must not be called")

        monkeypatch.setattr(cli.HttpChatClient, "complete", refuse)
        before = (rundir / "scene_graphs.jsonl").read_bytes()
        assert run(tmp_path, "gen-sg", corpus, capsys=capsys)[0] == 0
        assert (rundir / "scene_graphs.jsonl").read_bytes() == before

    def test_manifest(self, pipeline):
        rundir, corpus = pipeline
        m = json.loads((rundir / "manifest.json").read_text())
        assert m["toolkit_version"] == __version__
        assert set(m["commands"]) == {"gen-attrs", "gen-sg", "build"}
        build = m["commands"]["build"]
        assert corpus in build["inputs"] and len(build["config_hash"]) == 64
        assert set(build["outputs"]) == {"templates.jsonl", "gold_outputs.jsonl"}

    def test_seed_changes_config_hash(self, pipeline, tmp_path, capsys):
        rundir, corpus = pipeline
        first = json.loads((rundir / "manifest.json").read_text())["commands"]["build"]["config_hash"]
        assert cli.main(["--seed", "3", "--run-dir", str(rundir), "build", corpus]) == 0
        second = json.loads((rundir / "manifest.json").read_text())["commands"]["build"]["config_hash"]
        assert first != second


def _fraction(v):
    return float(Fraction(v)) if isinstance(v, str) else v


def _compare(got, want, path=""):
    for key, value in want.items():
        if isinstance(value, dict):
            _compare(got[key], value, f"{path}{key}.")
        else:
            assert got[key] == pytest.approx(_fraction(value), abs=1e-12), path + key


def test_mutated_fixture_matches_hand_computed_scores(tmp_path, capsys):
    corpus = str(GOLDEN / "corpus.jsonl")
    assert run(tmp_path, "parse", corpus, str(GOLDEN / "outputs.jsonl"), capsys=capsys)[0] == 0
    assert run(tmp_path, "score", corpus, capsys=capsys)[0] == 0
    report = json.loads((tmp_path / "run" / "score.json").read_text())
    want = json.loads((GOLDEN / "expected.json").read_text())
    errors = {task: report["errors"][task]["counts"] for task in want["errors"]}
    assert errors == want.pop("errors")
    _compare(report, want)


def test_parse_reads_a_directory_of_outputs(tmp_path, capsys):
    outdir = tmp_path / "outs"
    outdir.mkdir()
    for row in jsonl(GOLDEN / "outputs.jsonl"):
        (outdir / f"{row['doc_id']}.txt").write_text(row["output"])
    code, result = run(tmp_path, "parse", str(GOLDEN / "corpus.jsonl"), str(outdir), capsys=capsys)
    assert code == 0 and result == {"documents": 2, "with_deviations": 1}


class TestExitCodes:
    def test_missing_input(self, tmp_path, capsys):
        assert run(tmp_path, "build", str(tmp_path / "nope.jsonl"))[0] == 1
        assert "no such file" in capsys.readouterr().err

    def test_malformed_corpus(self, tmp_path, capsys):
        bad = tmp_path / "c.jsonl"
        bad.write_text("{oops\n")
        (tmp_path / "schema.json").write_text(json.dumps({"types": ["PER"]}))
        assert run(tmp_path, "build", str(bad))[0] == 1
        assert "c.jsonl:1" in capsys.readouterr().err

    def test_predictions_for_unknown_document(self, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        preds.write_text(json.dumps({"doc_id": "ghost", "prediction": {}}) + "\n")
        assert run(tmp_path, "score", str(GOLDEN / "corpus.jsonl"), "--predictions", str(preds))[0] == 1

    def test_secret_in_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("api_key: sk-1\n")
        assert cli.main(["--config", str(cfg), "--run-dir", str(tmp_path), "halluc"]) == 1
        assert "CODEMIE_API_KEY" in capsys.readouterr().err

    def test_m3d_not_available(self, tmp_path, capsys):
        assert run(tmp_path, "ingest", "m3d", str(GOLDEN / "corpus.jsonl"))[0] == 1

    def test_transport_failure(self, tmp_path, capsys, monkeypatch):
        original = cli.HttpChatClient

        def offline(endpoint):
            return original(endpoint, transport=httpx.MockTransport(lambda r: httpx.Response(503)), sleep=lambda s: None)

        monkeypatch.setattr(cli, "HttpChatClient", offline)
        assert run(tmp_path, "gen-attrs", str(GOLDEN / "corpus.jsonl"))[0] == 2
        assert "transport error" in capsys.readouterr().err


def test_ingest_twitter(tmp_path, capsys):
    src = tmp_path / "train.txt"
    src.write_text("IMGID:7\nParis\tB-LOC\nrocks\tO\n")
    out = tmp_path / "out" / "train.jsonl"
    code, result = run(tmp_path, "ingest", "twitter-conll", str(src), "-o", str(out), capsys=capsys)
    assert code == 0 and result["documents"] == 1
    assert (out.parent / "schema.json").exists()
    assert run(tmp_path, "build", str(out), capsys=capsys)[0] == 0


def test_scripted_review(pipeline, tmp_path, capsys):
    rundir, corpus = pipeline
    decisions = tmp_path / "d.jsonl"
    decisions.write_text(
        "\n".join(
            json.dumps(d)
            for d in (
                {"doc_id": "syn-00", "action": "EDIT", "field": "occupation", "value": "comedian"},
                {"doc_id": "syn-00", "action": "KEEP"},
                {"doc_id": "syn-00", "action": "DROP"},
                {"doc_id": "syn-01", "action": "EDIT", "field": "height", "value": "tall"},
            )
        )
    )
    code, result = run(tmp_path, "review", "--corpus", corpus, "--decisions", str(decisions), capsys=capsys)
    assert code == 0 and result["rejected_edits"] == 1
    reviewed = {r["doc_id"]: r["records"] for r in jsonl(rundir / "attributes.reviewed.jsonl")}
    original = {r["doc_id"]: r["records"] for r in jsonl(rundir / "attributes.jsonl")}
    assert len(reviewed["syn-00"]) == len(original["syn-00"]) - 1
    assert reviewed["syn-00"][0]["provenance"] == "REVIEWED"
    assert reviewed["syn-00"][0]["values"]["occupation"] == "comedian"
    assert reviewed["syn-01"] == original["syn-01"]
    # build prefers the reviewed file
    assert run(tmp_path, "build", corpus, capsys=capsys)[0] == 0
    tpl = {r["doc_id"]: r["input"] for r in jsonl(rundir / "templates.jsonl")}
    assert "comedian" in tpl["syn-00"]


def test_interactive_review_resumes(pipeline, tmp_path, capsys, monkeypatch):
    rundir, _ = pipeline
    monkeypatch.setattr("sys.stdin", io.StringIO("?\nk\nq\n"))
    assert run(tmp_path, "review", capsys=capsys)[0] == 0
    journal = sorted((rundir / "review").glob("*.jsonl"))
    assert journal
    monkeypatch.setattr("sys.stdin", io.StringIO("q\n"))
    assert run(tmp_path, "review", capsys=capsys)[0] == 0
    first = jsonl(rundir / "attributes.reviewed.jsonl")[0]["records"]
    assert first[0]["provenance"] == "REVIEWED"


def test_fuse(tmp_path, capsys):
    patches = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    write_embeddings(tmp_path / "p.emb", patches)
    positions = np.ones((2, 4), dtype=np.float32)
    write_embeddings(tmp_path / "pos.emb", positions, kind="positions")
    code, result = run(tmp_path, "fuse", str(tmp_path / "p.emb"), "--positions", str(tmp_path / "pos.emb"), capsys=capsys)
    assert code == 0 and (result["q"], result["d_g"]) == (2, 4)
    fused = read_embeddings(tmp_path / "run" / "fused.emb")
    np.testing.assert_allclose(fused, patches.mean(axis=1) + 1)
    assert run(tmp_path, "fuse", str(tmp_path / "p.emb"), capsys=capsys)[0] == 0
