"""Annotation-guideline refinement loop: corpus, scoring, runs.

Thin wrapper over the compiled core. Structured results come back as plain
dicts and lists.
"""

import json
import os

from . import _core
from ._core import GforgeError, batch_permutation, format_score, normalize_pubtator, prompt_digest

__all__ = [
    "GforgeError",
    "annotator_prompt",
    "apply_revision",
    "batch_permutation",
    "corpus_stats",
    "evaluate",
    "format_score",
    "guideline_lineage",
    "list_runs",
    "load_corpus",
    "load_run",
    "match_count",
    "normalize_pubtator",
    "parse_annotator_output",
    "parse_guideline",
    "parse_pubtator",
    "prompt_digest",
    "resume",
    "review",
    "run",
    "score",
]

__version__ = _core.version()


def _paths(paths):
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    return [os.fspath(p) for p in paths]


def load_corpus(paths):
    return json.loads(_core.load_corpus(_paths(paths)))


def parse_pubtator(text):
    return json.loads(_core.parse_pubtator(text))


def corpus_stats(paths):
    """(documents, mentions) over the merged files."""
    return tuple(_core.corpus_stats(_paths(paths)))


def match_count(pred, gold, mode="strict"):
    return _core.match_count(json.dumps(pred), json.dumps(gold), mode)


def score(pred, gold):
    """P/R/F1 under all four criteria, keyed by mode name."""
    return json.loads(_core.score(json.dumps(pred), json.dumps(gold)))


def evaluate(pred_path, gold_path, format="text", method="LLM"):
    return _core.evaluate(os.fspath(pred_path), os.fspath(gold_path), format, method)


def parse_guideline(text):
    return json.loads(_core.parse_guideline(text))


def apply_revision(guideline_text, revision):
    return json.loads(_core.apply_revision(guideline_text, json.dumps(revision)))


def annotator_prompt(doc, guideline=None):
    return _core.annotator_prompt(doc["doc_id"], doc["title"], doc["abstract"], guideline)


def parse_annotator_output(raw, doc):
    return json.loads(_core.parse_annotator_output(raw, doc["doc_id"], doc["title"], doc["abstract"]))


def run(config, store, run_id="", overrides=None, responder=None):
    """Create and drive a run. `responder(prompt) -> str` replaces the configured backend."""
    pairs = [(k, str(v)) for k, v in (overrides or {}).items()]
    return json.loads(_core.run(os.fspath(config), os.fspath(store), run_id, pairs, responder))


def resume(store, run_id, responder=None):
    return json.loads(_core.resume(os.fspath(store), run_id, responder))


def review(store, run_id, decision, revision=None):
    rev = None if revision is None else json.dumps(revision)
    return json.loads(_core.review(os.fspath(store), run_id, decision, rev))


def load_run(store, run_id):
    return json.loads(_core.load_run(os.fspath(store), run_id))


def list_runs(store):
    return list(_core.list_runs(os.fspath(store)))


def guideline_lineage(store, run_id):
    return json.loads(_core.guideline_lineage(os.fspath(store), run_id))
