"""
Scoring chain rules on a small family graph
===========================================

Build a graph, add inverse relations, and measure support, head coverage
and confidence for a few hand-written rules. If ``CFAMILY_DIR`` points at the
CFamily split, the published rule table is scored as well.
"""
from llmtsp.cfamily import comparison_report, dataset_dir
from llmtsp.kg_store import TripleStore, add_inverses
from llmtsp.rules import entail, filter_rules, parse_rule

# Two brothers, one of whom has two children. Only one uncle fact is known.
facts = [
    ("tom", "brotherOf", "bob"), ("bob", "brotherOf", "tom"),
    ("bob", "fatherOf", "ann"), ("bob", "fatherOf", "ben"),
    ("ann", "daughterOf", "bob"), ("ben", "sonOf", "bob"),
    ("tom", "uncleOf", "ann"),
]
graph = add_inverses(TripleStore.from_labeled(facts))
print(f"{len(graph)} triples over {graph.num_relations} relations after inverses")

# %%
# Rules are written with a chain of variables from X to Y. The second rule
# walks back along ``sonOf`` through its inverse.
rules = [parse_rule(t) for t in (
    "uncleOf(X,Y) <- brotherOf(X,Z1) ^ fatherOf(Z1,Y)",
    "uncleOf(X,Y) <- brotherOf(X,Z1) ^ inv_sonOf(Z1,Y)",
    "uncleOf(X,Y) <- fatherOf(X,Z1) ^ brotherOf(Z1,Y)",
)]
for rule, q in filter_rules(rules, 0.0, 0.0, graph):
    print(f"{rule} | {q.annotation()}")

# %%
# With the default thresholds only rules that are right often enough survive.
kept = filter_rules(rules, 0.45, 0.05, graph)
print("kept:", [str(r) for r, _ in kept])

# %%
# The oracle predictor applies a kept rule and lists each new triple with
# the premises that produced it.
for d in entail(graph, kept[0][0]):
    print(d.triple, "from", d.premises)

# %%
# Published numbers, when the benchmark is available locally.
if dataset_dir() is not None:
    best, report = comparison_report()
    print(report)
else:
    print("CFAMILY_DIR not set; skipping the published rule table")
