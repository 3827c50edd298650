"""Acceptance checks, one marker per criterion.

Run ``pytest tests/test_acceptance.py`` to get a PASS/FAIL line per criterion
in the terminal summary. Criteria 1 and 5 need the CFamily dataset: set
``CFAMILY_DIR`` to a folder holding ``train.txt`` and ``test.txt``. Without it
they fail with an explicit message instead of being skipped.
"""
import json
import random
import shutil
import socket
import time

import httpx
import pytest

from llmtsp.audit import audit_records
from llmtsp.cfamily import MINED_RULES, TSP_RUNS, dataset_dir, scoring_graphs
from llmtsp.cli import main, read_predictions
from llmtsp.evaluation import compute_metrics, f_tsp
from llmtsp.gateway import parse_mined_rules, parse_predictions
from llmtsp.kg_store import TripleStore, add_inverses, load_dataset, load_graph
from llmtsp.partition import (PartitionConfig, build_subgraphs, partition, read_manifest,
                              write_manifest, partition_stats)
from llmtsp.rules import entail, filter_rules, ground_body, parse_rule, render_rule, score_rule

import demo
import oracles

TOL = 0.005
UNCLE = "uncleOf(X,Y) <- brotherOf(X,Z1) ^ fatherOf(Z1,Y)"


# -- criterion 1 and 5: reported rule qualities ------------------------------

@pytest.fixture(scope="module")
def cfamily_graph():
    """The scoring graph on which the uncleOf row reproduces, tried in documented order.

    Yields ``(name, graph)`` or a failure message; tests fail on the message so
    a missing dataset is reported as a failed criterion, not a setup error.
    """
    d = dataset_dir()
    if d is None:
        return ("CFamily dataset not available: set CFAMILY_DIR to a folder with "
                "train.txt and test.txt")
    train, test = load_dataset(d)
    uncle = next(r for r in MINED_RULES if r.text == UNCLE)
    closest = []
    for name, graph in scoring_graphs(train, test).items():
        q = score_rule(graph, uncle.rule)
        if (q.support == uncle.support and abs(q.head_coverage - uncle.head_coverage) <= TOL
                and abs(q.confidence - uncle.confidence) <= TOL):
            return name, graph
        closest.append(f"{name}: support {q.support} hc {q.head_coverage:.4f} "
                       f"conf {q.confidence:.4f}")
    return "no candidate graph reproduces 627/0.24/0.82; closest: " + "; ".join(closest)


def selected(cfamily_graph):
    if isinstance(cfamily_graph, str):
        pytest.fail(cfamily_graph, pytrace=False)
    return cfamily_graph


@pytest.mark.acceptance(criterion=1)
@pytest.mark.parametrize("row", MINED_RULES, ids=lambda r: f"{r.model}-{r.index}")
def test_c1_rule_quality(cfamily_graph, row):
    name, graph = selected(cfamily_graph)
    start = time.perf_counter()
    q = score_rule(graph, row.rule)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    assert q.support == row.support, f"{name}: support {q.support} != {row.support}"
    assert abs(q.head_coverage - row.head_coverage) <= TOL
    assert abs(q.confidence - row.confidence) <= TOL


@pytest.mark.acceptance(criterion=5)
def test_c5_all_pass_default_thresholds(cfamily_graph):
    _, graph = selected(cfamily_graph)
    rules = [r.rule for r in MINED_RULES]
    kept = {r for r, _ in filter_rules(rules, 0.45, 0.05, graph)}
    assert kept == set(rules)


@pytest.mark.acceptance(criterion=5)
def test_c5_raised_confidence_threshold(cfamily_graph):
    _, graph = selected(cfamily_graph)
    rules = [r.rule for r in MINED_RULES]
    kept = {r for r, _ in filter_rules(rules, 0.60, 0.05, graph)}
    expected_out = {r.rule for r in MINED_RULES if r.confidence < 0.60}
    assert {0.49, 0.5, 0.52, 0.59} <= {r.confidence for r in MINED_RULES if r.confidence < 0.60}
    assert set(rules) - kept == expected_out


# -- criterion 2: published metric arithmetic --------------------------------

@pytest.mark.acceptance(criterion=2)
@pytest.mark.parametrize("run", TSP_RUNS, ids=lambda r: f"{r[0]}-run{r[1]}")
def test_c2_jprecision(run):
    _, _, n_predict, n_positive, jp, _, _ = run
    assert abs(compute_metrics(n_positive, n_predict, 4598).jprecision - jp) <= 0.001


@pytest.mark.acceptance(criterion=2)
@pytest.mark.parametrize("run", TSP_RUNS, ids=lambda r: f"{r[0]}-run{r[1]}")
def test_c2_f_from_printed_pairs(run):
    *_, jp, sr, f = run
    assert abs(f_tsp(jp, sr) - f) <= 0.001


@pytest.mark.acceptance(criterion=2)
def test_c2_recall_follows_formula():
    for _, _, n_predict, n_positive, *_ in TSP_RUNS:
        m = compute_metrics(n_positive, n_predict, 4598)
        assert m.st_recall == pytest.approx((n_positive / 4598) ** 0.5, abs=1e-12)


# -- criterion 3: oracle equivalence -----------------------------------------

@pytest.mark.acceptance(criterion=3)
def test_c3_oracle_equivalence():
    start = time.perf_counter()
    nonempty = 0
    for seed in range(100):
        triples = oracles.random_graph(seed, max_triples=200, max_relations=8)
        n_rel = len({r for _, r, _ in triples})
        rule = parse_rule(oracles.random_rule_text(seed, n_relations=n_rel))
        store = TripleStore.from_labeled(triples)
        pairs = {(store.entities.label(x), store.entities.label(y))
                 for x, y in ground_body(store, rule)}
        assert pairs == oracles.ground_body_fast(triples, rule.body), seed
        q, ref = score_rule(store, rule), oracles.score(triples, rule.head, rule.body)
        assert (q.support, q.body_groundings, q.head_facts) == (
            ref["support"], ref["body_groundings"], ref["head_facts"]), seed
        assert (q.head_coverage, q.confidence) == (ref["hc"], ref["conf"]), seed
        assert {d.triple for d in entail(store, rule)} == oracles.entail(
            triples, rule.head, rule.body), seed
        nonempty += bool(pairs)
    assert nonempty >= 50  # the comparison is not vacuous
    assert time.perf_counter() - start < 30.0


# -- criterion 4: partition properties ---------------------------------------

@pytest.mark.acceptance(criterion=4)
def test_c4_partition_properties(tmp_path):
    for seed in range(50):
        rng = random.Random(seed)
        store = TripleStore.from_labeled(oracles.random_graph(seed, max_entities=80))
        lo = rng.randint(1, 8)
        cfg = PartitionConfig(hops=rng.randint(1, 3), min_group=lo,
                              max_group=lo + rng.randint(0, 20), seed=seed)
        groups = partition(store, cfg)
        assert set().union(*(g.entities for g in groups)) == set(store.entity_ids), seed
        for g in groups:
            assert g.flag or cfg.min_group <= len(g) <= cfg.max_group, seed
        subgraphs = build_subgraphs(store, groups)
        stats = partition_stats(store, groups, subgraphs)
        covered = set().union(*(sg.store.labeled() for sg in subgraphs))
        assert stats.triple_loss == len(store) - len(covered), seed
        paths = [tmp_path / f"{seed}_{i}.tsv" for i in range(2)]
        for p in paths:
            write_manifest(p, store, partition(store, cfg))
        assert paths[0].read_bytes() == paths[1].read_bytes(), seed
        assert [g.entities for g in read_manifest(paths[0], store)] == [
            g.entities for g in groups]


# -- criterion 6: offline replay of the packaged session ---------------------

OUTPUTS = ["rules.txt", "partition.tsv", "predictions.jsonl", "eval.txt", "eval.json",
           "hallucination.txt", "hallucination.json"]


@pytest.fixture
def no_network(monkeypatch):
    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(httpx.Client, "send", refuse)


@pytest.fixture
def replay_runs(tmp_path, no_network):
    session = tmp_path / "session"
    shutil.copytree(demo.DEMO, session)
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        assert main(["pipeline", "--config", str(session / "pipeline.cfg"),
                     "--out", str(out)]) == 0
        outs.append(out)
    return session, outs


@pytest.mark.acceptance(criterion=6)
def test_c6_replay_is_byte_identical(replay_runs):
    _, (a, b) = replay_runs
    for name in OUTPUTS:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


@pytest.mark.acceptance(criterion=6)
def test_c6_session_shape(replay_runs):
    _, (out, _) = replay_runs
    summary = json.loads((out / "predict_summary.json").read_text())
    assert summary["subgraphs"] >= 3 and summary["rules"] >= 2
    assert summary["failures"] == 0


@pytest.mark.acceptance(criterion=6)
def test_c6_auditor_flags_annotated_premises(replay_runs):
    session, (out, _) = replay_runs
    graph = add_inverses(load_graph(session / "train.txt"))
    subgraphs = build_subgraphs(graph, read_manifest(out / "partition.tsv", graph))
    audits = audit_records(subgraphs, read_predictions(out / "predictions.jsonl"))
    flagged = sorted(p for a in audits for p in a.nonexistent_premises)
    ann = demo.annotations()
    assert flagged == sorted(tuple(p) for p in ann["nonexistent_premises"])
    report = json.loads((out / "hallucination.json").read_text())
    assert report["nonexistent_by_relation"] == {"brotherOf": 2, "sonOf": 1}


@pytest.mark.acceptance(criterion=6)
def test_c6_hallucinated_transcript(no_network):
    sg, rule, text = demo.hallucinated_transcript()
    audits = audit_records({sg.group_id: sg}, parse_predictions(text, rule, sg.group_id))
    missing = [p for a in audits for p in a.nonexistent_premises]
    assert sorted(p[1] for p in missing) == ["brotherOf", "brotherOf", "sonOf"]


# -- criterion 7: round trip and parser totality -----------------------------

@pytest.mark.acceptance(criterion=7)
@pytest.mark.parametrize("row", MINED_RULES, ids=lambda r: f"{r.model}-{r.index}")
def test_c7_round_trip(row):
    rule = parse_rule(row.text)
    assert parse_rule(render_rule(rule)) == rule
    assert render_rule(rule) == row.text


def fuzz_corpus(n=1000, seed=0):
    rng = random.Random(seed)
    pieces = ["PREMISES:", "PREDICTION:", "PREDICTIONS:", "(", ")", ",", ";", "<-", "⟵", "←",
              ":-", "^", "∧", "&", "\n", " ", "\t", "X", "Y", "Z1", "Z2", "uncleOf", "inv_",
              "fatherOf", "(a, uncleOf, b)", "r(X,Z1)", "h(X,Y)", "1.", "- ", "**", "`", "NONE",
              "é", "​", "\x00", "🙂", "))", "((", "Rule 3:", "(,,)", "\\"]
    corpus = []
    for _ in range(n):
        if rng.random() < 0.3:
            corpus.append("".join(chr(rng.randrange(1, 0x2FFF)) for _ in range(rng.randrange(80))))
        else:
            corpus.append("".join(rng.choice(pieces) for _ in range(rng.randrange(60))))
    return corpus


@pytest.mark.acceptance(criterion=7)
def test_c7_parsers_total_on_fuzz_corpus():
    rule = parse_rule(UNCLE)
    corpus = fuzz_corpus()
    assert len(corpus) == 1000
    for text in corpus:
        mined = parse_mined_rules(text)
        assert all(isinstance(r, type(rule)) for r in mined.rules)
        for rec in parse_predictions(text, rule, 0):
            assert len(rec.predicted) == 3
