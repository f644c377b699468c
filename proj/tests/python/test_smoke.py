import json
import os
import pathlib
import re

import pytest

import gforge

FIXTURES = pathlib.Path(os.environ.get("GFORGE_FIXTURE_DIR", pathlib.Path(__file__).resolve().parents[2] / "fixtures"))
MINI = FIXTURES / "corpus" / "mini.pubtator"


def test_corpus_stats_and_roundtrip():
    assert gforge.corpus_stats(MINI) == (10, 49)
    text = MINI.read_text()
    once = gforge.normalize_pubtator(text)
    assert gforge.normalize_pubtator(once) == once
    assert gforge.parse_pubtator(once) == gforge.load_corpus(MINI)


def test_errors_carry_codes():
    with pytest.raises(gforge.GforgeError) as info:
        gforge.parse_pubtator("1|t|x\n1|a|y\n1\t0\t9\tzzz\tSpecificDisease\n")
    assert info.value.code == "OffsetMismatch"
    assert str(info.value).startswith("OffsetMismatch: ")


def test_batch_permutation_is_pinned():
    assert gforge.batch_permutation(10, 7) == [0, 7, 4, 9, 3, 1, 2, 8, 6, 5]


def test_scoring():
    gold = [{"doc_id": "d", "start": 0, "end": 3, "mention": "DMD", "category": "SpecificDisease"}]
    pred = [{"doc_id": "d", "start": 0, "end": 3, "mention": "DMD", "category": "Modifier"}]
    s = gforge.score(pred, gold)
    assert s["strict"]["f1"] == 0.0
    assert s["strict-nocat"]["f1"] == 1.0
    assert gforge.match_count(pred, gold, "soft-nocat") == 1
    assert gforge.format_score(2 * 0.38 * 0.35 / 0.73) == "0.36"


def test_evaluate_matches_golden_output():
    out = gforge.evaluate(FIXTURES / "eval" / "pred.pubtator", FIXTURES / "eval" / "gold.pubtator")
    assert out == (FIXTURES / "eval" / "expected_evaluate.txt").read_text()


def test_guideline_revision():
    text = (FIXTURES / "guidelines" / "disease_v1.txt").read_text()
    g = gforge.parse_guideline(text)
    assert "abbreviations" in [s["section_id"] for s in g["sections"]]
    child = gforge.apply_revision(
        text, {"rationale": "r", "edits": [{"op": "append_example", "section_id": "modifier", "text": "new"}]}
    )
    assert child["parent_version"] == g["version_id"]
    assert child["version_id"] != g["version_id"]
    with pytest.raises(gforge.GforgeError) as info:
        gforge.apply_revision(text, {"edits": [{"op": "replace_body", "section_id": "nope", "body": "x"}]})
    assert info.value.code == "UnknownSection"


def test_prompt_and_parse():
    doc = gforge.load_corpus(MINI)[0]
    prompt = gforge.annotator_prompt(doc)
    assert "### Annotation guidelines" not in prompt
    assert f"Document ID: {doc['doc_id']}" in prompt
    first = doc["mentions"][0]
    reply = json.dumps({"annotations": [{"mention": first["mention"], "category": first["category"]}]})
    parsed = gforge.parse_annotator_output(reply, doc)
    assert parsed["annotations"][0]["mention"] == first["mention"]


def test_replayed_hitl_run(tmp_path):
    store = tmp_path / "runs"
    r = gforge.run(FIXTURES / "runs" / "hitl.conf", store, "py")
    assert r["status"] == "AwaitingReview"
    assert gforge.format_score(r["iterations"][0]["gate"]) == "0.47"
    r = gforge.review(store, "py", "approve")
    assert r["status"] == "Running"
    r = gforge.resume(store, "py")
    assert r["status"] == "Completed"
    assert [gforge.format_score(it["gate"]) for it in r["iterations"]] == ["0.47", "0.96", "0.93"]
    assert gforge.list_runs(store) == ["py"]
    lineage = gforge.guideline_lineage(store, "py")
    assert len(lineage) == 2 and lineage[1]["parent_version"] == lineage[0]["version_id"]
    with pytest.raises(gforge.GforgeError) as info:
        gforge.review(store, "py", "approve")
    assert info.value.code == "NotAwaitingReview"


def test_python_responder_drives_a_baseline_run(tmp_path):
    corpus = {d["doc_id"]: d for d in gforge.load_corpus(MINI)}
    calls = []

    def gold_echo(prompt):
        doc_id = re.search(r"Document ID: (\S+)", prompt).group(1)
        calls.append(doc_id)
        items = [{"mention": m["mention"], "category": m["category"], "start": m["start"]} for m in corpus[doc_id]["mentions"]]
        return json.dumps({"annotations": items})

    r = gforge.run(
        FIXTURES / "runs" / "baseline.conf", tmp_path, "echo", overrides={"max_in_flight": 3}, responder=gold_echo
    )
    assert r["status"] == "Completed"
    assert sorted(calls) == sorted(corpus)
    assert all(it["gate"] == 1.0 for it in r["iterations"])


def test_responder_errors_fail_the_run(tmp_path):
    def broken(prompt):
        raise RuntimeError("no model")

    with pytest.raises(gforge.GforgeError) as info:
        gforge.run(FIXTURES / "runs" / "auto.conf", tmp_path, "bad", responder=broken)
    assert info.value.code == "FailedRun"
    assert gforge.load_run(tmp_path, "bad")["status"] == "Failed"
