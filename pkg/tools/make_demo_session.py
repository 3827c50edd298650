"""Regenerate the packaged replay session under src/llmtsp/fixtures/family_demo.

Three disconnected all-male family trees give three subgraphs. Responses are
scripted: most follow the rule correctly, one answers in free text, one
predicts off the rule head, and one (nephewOf on the third family) cites
premises that do not exist in the subgraph. Those premises are listed by hand
in annotations.json.

Run after any change to the prompt templates:

    python tools/make_demo_session.py
"""
from __future__ import annotations

import json
import random
import shutil
from pathlib import Path

from llmtsp.gateway import (build_rule_prompt, build_tsp_prompt, explain_rule, format_triple,
                            record_fixture)
from llmtsp.kg_store import add_inverses, load_graph, write_triples
from llmtsp.partition import PartitionConfig, build_subgraphs, partition, rule_related_triples
from llmtsp.rules import entail, parse_rule

ROOT = Path(__file__).resolve().parents[1] / "src" / "llmtsp" / "fixtures" / "family_demo"
STAMP = "2026-10-18T00:00:00Z"
MODEL = "scripted-demo"

# father -> sons
FAMILIES = [
    {"p100": ["p101", "p102", "p103"], "p101": ["p104", "p105"], "p102": ["p106"],
     "p103": ["p107", "p108"], "p104": ["p109"]},
    {"p200": ["p201", "p202"], "p201": ["p203", "p204", "p205"], "p202": ["p206"],
     "p203": ["p207"], "p204": ["p208"]},
    {"p300": ["p301", "p302", "p303", "p304"], "p301": ["p305"], "p302": ["p306", "p307"],
     "p304": ["p308"]},
]

UNCLE = parse_rule("uncleOf(X,Y) <- brotherOf(X,Z1) ^ fatherOf(Z1,Y)")
NEPHEW = parse_rule("nephewOf(X,Y) <- sonOf(X,Z1) ^ brotherOf(Z1,Y)")

# hand-annotated hallucinations in the third family's nephewOf transcript
HALLUCINATED = [
    {"predicted": ("p305", "nephewOf", "p303"),
     "premises": [("p305", "sonOf", "p302"), ("p302", "brotherOf", "p303")]},
    {"predicted": ("p306", "nephewOf", "p308"),
     "premises": [("p306", "sonOf", "p302"), ("p302", "brotherOf", "p308")]},
    {"predicted": ("p308", "nephewOf", "p307"),
     "premises": [("p308", "sonOf", "p304"), ("p304", "brotherOf", "p307")]},
]
NONEXISTENT = [("p305", "sonOf", "p302"), ("p302", "brotherOf", "p308"),
               ("p304", "brotherOf", "p307")]


def closure(families):
    facts = set()
    for fam in families:
        father_of = {s: f for f, sons in fam.items() for s in sons}
        for f, sons in fam.items():
            for s in sons:
                facts.add((f, "fatherOf", s))
                facts.add((s, "sonOf", f))
                for b in sons:
                    if b != s:
                        facts.add((s, "brotherOf", b))
        for n, f in father_of.items():
            for u in fam.get(father_of.get(f), []):
                if u != f:
                    facts.add((u, "uncleOf", n))
                    facts.add((n, "nephewOf", u))
    return facts


def mining_response(head: str) -> str:
    if head == "uncleOf":
        return ("Here are rules for uncleOf:\n"
                "1. uncleOf(X,Y) <- brotherOf(X,Z1) ^ fatherOf(Z1,Y)\n"
                "Explanation: the brother of Y's father is Y's uncle.\n"
                "2. uncleOf(X,Y) <- brotherOf(X,Z1) ^ fatherOf(Z2,Y)\n"
                "Explanation: a malformed chain kept to exercise the reject log.\n")
    if head == "nephewOf":
        return ("1. nephewOf(X,Y) <- sonOf(X,Z1) ^ brotherOf(Z1,Y)\n"
                "Explanation: the son of Y's brother is Y's nephew.\n")
    if head == "fatherOf":
        return ("1. fatherOf(X,Y) <- brotherOf(X,Z1) ^ sonOf(Z1,Y)\n"
                "Explanation: this rule is weak and should be filtered out.\n")
    return f"I could not find a reliable rule with {head} as the head.\n"


def structured(derivations) -> str:
    lines = ["Let me reason step by step."]
    for triple, premises in derivations:
        lines.append(f"PREMISES: {'; '.join(format_triple(p) for p in premises)}")
        lines.append(f"PREDICTION: {format_triple(triple)}")
    return "\n".join(lines) + "\n"


def main():
    facts = closure(FAMILIES)
    rng = random.Random(7)
    held = {t for t in sorted(facts) if t[1] in ("uncleOf", "nephewOf") and rng.random() < 0.4}
    train = facts - held
    if ROOT.exists():
        shutil.rmtree(ROOT)
    (ROOT / "replay").mkdir(parents=True)
    write_triples(ROOT / "train.txt", train)
    write_triples(ROOT / "test.txt", held)

    graph = add_inverses(load_graph(ROOT / "train.txt"))
    relations = graph.relation_labels()
    for head in relations:
        record_fixture(ROOT / "replay", build_rule_prompt(relations, head),
                       mining_response(head), MODEL, STAMP)

    cfg = PartitionConfig(hops=2, min_group=3, max_group=30, seed=0)
    subgraphs = build_subgraphs(graph, partition(graph, cfg))
    assert len(subgraphs) == 3, len(subgraphs)
    fam_of = {sg.group_id: min(sg.store.entities.label(e) for e in sg.entities)[1]
              for sg in subgraphs}

    for sg in subgraphs:
        sg_facts = sg.store.labeled()
        for rule in (UNCLE, NEPHEW):
            related = sorted(sg.store.label(t) for t in rule_related_triples(sg, rule))
            prompt = build_tsp_prompt(rule, explain_rule(rule), related)
            derived = [(d.triple, d.premises) for d in entail(sg, rule)]
            fam = fam_of[sg.group_id]
            if fam == "1" and rule == UNCLE:
                text = "Reasoning over the chain, I find:\n" + "".join(
                    f"{t[0]} is the uncle of {t[2]}, so {format_triple(t)} is missing.\n"
                    for t, _ in derived)
            elif fam == "2" and rule == UNCLE:
                off = (("p206", "nephewOf", "p201"),
                       (("p206", "sonOf", "p202"), ("p202", "brotherOf", "p201")))
                assert all(p in sg_facts for p in off[1])
                text = structured(derived + [off])
            elif fam == "3" and rule == NEPHEW:
                bad = [(tuple(h["predicted"]), tuple(tuple(p) for p in h["premises"]))
                       for h in HALLUCINATED]
                for _, prem in bad:
                    for p in prem:
                        assert (p in sg_facts) == (p not in NONEXISTENT), p
                text = structured(derived[:2] + bad)
            else:
                text = structured(derived)
            record_fixture(ROOT / "replay", prompt, text, MODEL, STAMP)

    (ROOT / "annotations.json").write_text(json.dumps({
        "hallucinated_transcript": {"rule": str(NEPHEW), "family": 3},
        "nonexistent_premises": [list(t) for t in NONEXISTENT],
        "nonexistent_by_relation": {"brotherOf": 2, "sonOf": 1},
    }, indent=2) + "\n", encoding="utf-8")
    (ROOT / "pipeline.cfg").write_text(
        "# replay session over three small family trees\n"
        "train = train.txt\n"
        "test = test.txt\n"
        "backend = replay\n"
        "fixtures = replay\n"
        "model = scripted-demo\n"
        "predictor = llm\n"
        "hops = 2\n"
        "min_group = 3\n"
        "max_group = 30\n"
        "seed = 0\n", encoding="utf-8")
    print(f"wrote {ROOT}")


if __name__ == "__main__":
    main()
