"""Stage commands and the ``llmtsp`` command line.

Every stage reads and writes plain files, so stages can be mixed freely:
rules typed by hand can be scored, partitioned and oracle-predicted without
any language model in the loop.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .audit import HallucinationReport, audit_records, summarize
from .evaluation import EvalReport, aggregate, evaluate
from .gateway import (BackendConfig, BackendError, PredictionRecord, build_rule_prompt,
                      build_tsp_prompt, complete_many, explain_rule, parse_mined_rules,
                      parse_predictions)
from .kg_store import TripleStore, add_inverses, inverse_of, load_graph
from .partition import (PartitionConfig, build_subgraphs, partition, partition_stats,
                        read_manifest, rule_related_triples, write_manifest)
from .rules import Rule, filter_rules, read_rules, render_rule, entail

log = logging.getLogger("llmtsp")

RULES_FILE = "rules.txt"
REJECTS_FILE = "rules_rejects.txt"
SCORED_FILE = "scored_rules.txt"
MANIFEST_FILE = "partition.tsv"
PREDICTIONS_FILE = "predictions.jsonl"
PREDICT_SUMMARY_FILE = "predict_summary.json"


@dataclass
class PipelineConfig:
    train: str = "train.txt"
    test: str | None = "test.txt"
    out: str = "out"
    rules: str | None = None
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    alpha_conf: float = 0.45
    alpha_hc: float = 0.05
    min_length: int = 2
    max_length: int = 3
    backend: BackendConfig = field(default_factory=BackendConfig)
    predictor: str = "oracle"
    score_graph: str = "train"
    seed: int = 0

    def __post_init__(self):
        if self.predictor not in ("oracle", "llm"):
            raise ValueError(f"unknown predictor {self.predictor!r}")
        if self.score_graph not in ("train", "full"):
            raise ValueError(f"unknown score graph {self.score_graph!r}")

    @property
    def out_dir(self) -> Path:
        path = Path(self.out)
        path.mkdir(parents=True, exist_ok=True)
        return path


_PARTITION_KEYS = {"hops", "min_group", "max_group"}
_BACKEND_KEYS = {f.name for f in dataclasses.fields(BackendConfig)} - {"stub", "mode"}
_FLOATS = {"alpha_conf", "alpha_hc", "temperature", "timeout", "backoff", "min_interval"}
_INTS = {"hops", "min_group", "max_group", "seed", "min_length", "max_length",
         "max_tokens", "max_retries", "max_in_flight"}
_PATHS = {"train", "test", "out", "rules", "fixture_dir", "capture_dir"}


def _coerce(key: str, value: str):
    if key in _FLOATS:
        return float(value)
    if key in _INTS:
        return int(value)
    if key == "verbose":
        return value.lower() in ("1", "true", "yes", "on")
    return value


def build_config(settings: dict) -> PipelineConfig:
    """Assemble a config from flat ``key -> value`` settings."""
    settings = {k.replace("-", "_"): v for k, v in settings.items() if v is not None}
    if "backend" in settings:
        settings["mode"] = settings.pop("backend")
    if "fixtures" in settings:
        settings["fixture_dir"] = settings.pop("fixtures")
    seed = int(settings.get("seed", 0))
    part = {k: int(settings.pop(k)) for k in list(settings) if k in _PARTITION_KEYS}
    back = {k: _coerce(k, settings.pop(k)) for k in list(settings) if k in _BACKEND_KEYS}
    if "mode" in settings:
        back["mode"] = settings.pop("mode")
    top = {k: _coerce(k, v) for k, v in settings.items()}
    unknown = set(top) - {f.name for f in dataclasses.fields(PipelineConfig)}
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return PipelineConfig(partition=PartitionConfig(seed=seed, **part),
                          backend=BackendConfig(**back), **top)


def read_config_file(path) -> dict:
    """``key = value`` lines; relative paths resolve against the file's folder."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string("[pipeline]\n" + path.read_text(encoding="utf-8"))
    out = {}
    for key, value in parser["pipeline"].items():
        key = key.replace("-", "_")
        if key == "fixtures":
            key = "fixture_dir"
        if key in _PATHS and not Path(value).is_absolute():
            value = str(path.parent / value)
        out[key] = value
    return out


# -- stages ------------------------------------------------------------------

def _train_graph(cfg: PipelineConfig) -> TripleStore:
    return add_inverses(load_graph(cfg.train))


def _scoring_graph(cfg: PipelineConfig) -> TripleStore:
    train = load_graph(cfg.train)
    if cfg.score_graph == "full":
        if not cfg.test:
            raise ValueError("score_graph=full needs a test file")
        train = TripleStore.from_labeled(train.labeled() | load_graph(cfg.test).labeled())
    return add_inverses(train)


def _write_rules(path: Path, scored) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rule, q in scored:
            fh.write(f"{render_rule(rule)} | {q.annotation()}\n")


def cmd_mine_rules(cfg: PipelineConfig) -> Path:
    """Prompt for rules with every relation (inverses included) as the head."""
    graph = _scoring_graph(cfg)
    relations = graph.relation_labels()
    prompts = [build_rule_prompt(relations, head) for head in relations]
    responses = complete_many(prompts, cfg.backend)
    out = cfg.out_dir
    candidates: list[Rule] = []
    rejects: list[str] = []
    failures = []
    for head, resp in zip(relations, responses):
        if isinstance(resp, Exception):
            failures.append((head, resp))
            continue
        mined = parse_mined_rules(resp)
        for rule in mined.rules:
            if not cfg.min_length <= rule.length <= cfg.max_length:
                rejects.append(f"{head}\tlength {rule.length} outside bounds\t{render_rule(rule)}")
            elif rule.head != head:
                rejects.append(f"{head}\twrong head {rule.head}\t{render_rule(rule)}")
            else:
                candidates.append(rule)
        rejects.extend(f"{head}\t{reason}\t{line}" for line, reason in mined.rejects)
    kept = filter_rules(candidates, cfg.alpha_conf, cfg.alpha_hc, graph)
    _write_rules(out / RULES_FILE, kept)
    (out / REJECTS_FILE).write_text("".join(r + "\n" for r in rejects), encoding="utf-8")
    log.info("mined %d candidate rules, kept %d", len(candidates), len(kept))
    if failures:
        raise BackendError(f"{len(failures)} rule-mining requests failed "
                           f"(first: {failures[0][0]}: {failures[0][1]}); partial results kept")
    return out / RULES_FILE


def cmd_score_rules(cfg: PipelineConfig, rules_path=None) -> Path:
    """Annotate a rules file with qualities; rules below threshold are commented out."""
    rules = read_rules(rules_path or cfg.rules)
    graph = _scoring_graph(cfg)
    kept = filter_rules(rules, cfg.alpha_conf, cfg.alpha_hc, graph)
    everything = filter_rules(rules, 0.0, 0.0, graph)
    kept_rules = {r for r, _ in kept}
    path = cfg.out_dir / SCORED_FILE
    with open(path, "w", encoding="utf-8") as fh:
        for rule, q in everything:
            prefix = "" if rule in kept_rules else "# dropped: "
            fh.write(f"{prefix}{render_rule(rule)} | {q.annotation()}\n")
    return path


def cmd_partition(cfg: PipelineConfig) -> Path:
    graph = _train_graph(cfg)
    groups = partition(graph, cfg.partition)
    path = cfg.out_dir / MANIFEST_FILE
    write_manifest(path, graph, groups)
    return path


def cmd_predict(cfg: PipelineConfig, rules_path=None) -> Path:
    """Predict per subgraph x rule with the oracle or the language model."""
    rules = read_rules(rules_path or cfg.rules)
    graph = _train_graph(cfg)
    groups = partition(graph, cfg.partition)
    out = cfg.out_dir
    subgraphs = build_subgraphs(graph, groups)
    write_manifest(out / MANIFEST_FILE, graph, groups, partition_stats(graph, groups, subgraphs))

    records: list[PredictionRecord] = []
    failures = 0
    empty_context = 0
    tasks = [(sg, rule) for sg in subgraphs for rule in rules]
    if cfg.predictor == "oracle":
        for sg, rule in tasks:
            for d in entail(sg, rule):
                records.append(PredictionRecord(d.triple, d.premises, rule, sg.group_id,
                                                provenance="oracle"))
    else:
        prompts = []
        for sg, rule in tasks:
            related = sorted(sg.store.label(t) for t in rule_related_triples(sg, rule))
            prompts.append(build_tsp_prompt(rule, explain_rule(rule), related))
        empty_context = sum(p.empty_context for p in prompts)
        responses = complete_many(prompts, cfg.backend)
        tag = cfg.backend.fingerprint()
        for (sg, rule), prompt, resp in zip(tasks, prompts, responses):
            if isinstance(resp, Exception):
                failures += 1
                log.error("subgraph %d / %s failed: %s", sg.group_id, render_rule(rule), resp)
                continue
            records.extend(parse_predictions(
                resp, rule, sg.group_id, known_relations={rule.head, inverse_of(rule.head)},
                provenance=f"{tag}:{prompt.fingerprint}"))

    path = out / PREDICTIONS_FILE
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    summary = {"predictor": cfg.predictor, "subgraphs": len(subgraphs), "rules": len(rules),
               "tasks": len(tasks), "failures": failures, "records": len(records),
               "empty_context": empty_context}
    (out / PREDICT_SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                            encoding="utf-8")
    return path


def read_predictions(path) -> list[PredictionRecord]:
    with open(path, encoding="utf-8") as fh:
        return [PredictionRecord.from_json(line) for line in fh if line.strip()]


def _subgraphs_for(cfg: PipelineConfig, predictions_path: Path):
    graph = _train_graph(cfg)
    manifest = Path(predictions_path).with_name(MANIFEST_FILE)
    groups = read_manifest(manifest, graph) if manifest.is_file() else partition(graph, cfg.partition)
    return build_subgraphs(graph, groups)


def cmd_audit(cfg: PipelineConfig, predictions_path, out_name: str = "hallucination"
              ) -> HallucinationReport:
    records = read_predictions(predictions_path)
    report = summarize(audit_records(_subgraphs_for(cfg, predictions_path), records))
    out = cfg.out_dir
    (out / f"{out_name}.txt").write_text(report.to_text(), encoding="utf-8")
    (out / f"{out_name}.json").write_text(report.to_json() + "\n", encoding="utf-8")
    return report


def cmd_evaluate(cfg: PipelineConfig, predictions_path, test_path=None,
                 out_name: str = "eval") -> tuple[EvalReport, HallucinationReport]:
    test_path = test_path or cfg.test
    if not test_path or not Path(test_path).is_file():
        raise FileNotFoundError(f"test file not found: {test_path}")
    records = read_predictions(predictions_path)
    report = evaluate(records, load_graph(test_path), known=load_graph(cfg.train))
    out = cfg.out_dir
    (out / f"{out_name}.txt").write_text(report.to_text(), encoding="utf-8")
    (out / f"{out_name}.json").write_text(report.to_json() + "\n", encoding="utf-8")
    halluc = cmd_audit(cfg, predictions_path,
                       out_name="hallucination" if out_name == "eval" else f"{out_name}_hallucination")
    return report, halluc


def cmd_evaluate_runs(cfg: PipelineConfig, predictions_paths, test_path=None) -> dict:
    """Evaluate repeated runs and report mean and spread."""
    reports = []
    for i, p in enumerate(predictions_paths, 1):
        reports.append(cmd_evaluate(cfg, p, test_path, out_name=f"eval_run{i}")[0])
    agg = aggregate(reports)
    lines = [f"run{i}\t" + "\t".join(f"{k}={getattr(r, k)}" for k in agg)
             for i, r in enumerate(reports, 1)]
    lines += [f"{k}\t{m:.6f} ± {s:.6f}" for k, (m, s) in agg.items()]
    (cfg.out_dir / "eval_runs.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return agg


def cmd_pipeline(cfg: PipelineConfig) -> tuple[EvalReport, HallucinationReport]:
    rules_path = cfg.rules or cmd_mine_rules(cfg)
    predictions = cmd_predict(cfg, rules_path)
    return cmd_evaluate(cfg, predictions)


# -- argument parsing --------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--train")
    common.add_argument("--test")
    common.add_argument("--out")
    common.add_argument("--rules")
    common.add_argument("--seed", type=int)
    common.add_argument("--backend", choices=["http", "replay", "stub"])
    common.add_argument("--fixtures", help="replay fixture directory")
    common.add_argument("--model")
    common.add_argument("--endpoint")
    common.add_argument("--temperature", type=float)
    common.add_argument("--predictor", choices=["oracle", "llm"])
    common.add_argument("--alpha-conf", type=float)
    common.add_argument("--alpha-hc", type=float)
    common.add_argument("--hops", type=int)
    common.add_argument("--min-group", type=int)
    common.add_argument("--max-group", type=int)
    common.add_argument("--score-graph", choices=["train", "full"])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="llmtsp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mine-rules", parents=[common])
    sub.add_parser("score-rules", parents=[common])
    sub.add_parser("partition", parents=[common])
    sub.add_parser("predict", parents=[common])
    p = sub.add_parser("audit", parents=[common])
    p.add_argument("--predictions", required=True)
    p = sub.add_parser("evaluate", parents=[common])
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--predictions", nargs="+",
                       help="one file, or several to aggregate repeated runs")
    which.add_argument("--runs", nargs="+", metavar="PREDICTIONS",
                       help="prediction files of repeated runs; reports mean ± spread")
    sub.add_parser("pipeline", parents=[common])
    return parser


_NOT_SETTINGS = {"command", "config", "predictions", "runs", "verbose"}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = read_config_file(args.config) if args.config else {}
        settings.update({k: v for k, v in vars(args).items()
                         if k not in _NOT_SETTINGS and v is not None})
        if args.verbose:
            settings["verbose"] = "true"
        cfg = build_config(settings)
        return _run(args, cfg)
    except (OSError, ValueError, KeyError, BackendError) as exc:
        print(f"llmtsp: error: {exc}", file=sys.stderr)
        return 1


def _run(args, cfg: PipelineConfig) -> int:
    if args.command == "mine-rules":
        print(cmd_mine_rules(cfg))
    elif args.command == "score-rules":
        print(Path(cmd_score_rules(cfg)).read_text(encoding="utf-8"), end="")
    elif args.command == "partition":
        print(cmd_partition(cfg))
    elif args.command == "predict":
        print(cmd_predict(cfg))
    elif args.command == "audit":
        print(cmd_audit(cfg, args.predictions).to_text(), end="")
    elif args.command == "evaluate":
        files = args.predictions or args.runs
        if args.runs or len(files) > 1:
            for k, (m, s) in cmd_evaluate_runs(cfg, files).items():
                print(f"{k}\t{m:.6f} ± {s:.6f}")
        else:
            report, halluc = cmd_evaluate(cfg, files[0])
            print(report.to_text() + halluc.to_text(), end="")
    elif args.command == "pipeline":
        report, halluc = cmd_pipeline(cfg)
        print(report.to_text() + halluc.to_text(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
