"""Triple set prediction on knowledge graphs with mined Horn rules and LLM backends."""
from .audit import AuditRecord, HallucinationReport, summarize
from .evaluation import (EvalReport, canonicalize_predictions, compute_metrics, evaluate,
                         split_pos_neg)
from .gateway import (BackendConfig, PredictionRecord, PromptDoc, build_rule_prompt,
                      build_tsp_prompt, complete, parse_mined_rules, parse_predictions)
from .kg_store import (Triple, TripleStore, add_inverses, load_dataset, load_graph)
from .partition import (EntityGroup, PartitionConfig, Subgraph, build_subgraph,
                        rule_related_triples)
from .rules import (Rule, RuleQuality, entail, filter_rules, ground_body, parse_rule,
                    render_rule, score_rule)

__all__ = [
    "AuditRecord", "BackendConfig", "EntityGroup", "EvalReport", "HallucinationReport",
    "PartitionConfig", "PredictionRecord", "PromptDoc", "Rule", "RuleQuality", "Subgraph",
    "Triple", "TripleStore", "add_inverses", "build_rule_prompt", "build_subgraph",
    "build_tsp_prompt", "canonicalize_predictions", "complete", "compute_metrics",
    "demo_session_dir", "entail", "evaluate", "filter_rules", "ground_body", "load_dataset",
    "load_graph", "parse_mined_rules", "parse_predictions", "parse_rule",
    "render_rule", "rule_related_triples", "score_rule", "split_pos_neg", "summarize",
]

__version__ = "0.1.0"


def demo_session_dir():
    """Folder of the packaged replay session over three small family trees."""
    from importlib.resources import files
    return files("llmtsp") / "fixtures" / "family_demo"
