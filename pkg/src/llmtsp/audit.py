"""Hallucination audit of predicted triples against their subgraph.

Two failure modes are measured: cited premises that are not in the subgraph,
and reasoning that does not follow the rule that was given.
"""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .gateway import PredictionRecord
from .rules import Rule, entail, render_rule


class RuleMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class AuditRecord:
    prediction: PredictionRecord
    premise_flags: tuple[bool, ...]
    entities_known: bool
    head_matches_rule: bool
    premise_chain_valid: bool
    entailed_by_subgraph: bool
    known_fact: bool = False

    @property
    def has_premises(self) -> bool:
        return bool(self.premise_flags)

    @property
    def nonexistent_premises(self) -> list:
        return [p for p, ok in zip(self.prediction.premises, self.premise_flags) if not ok]

    @property
    def rule_compliant(self) -> bool:
        if not self.head_matches_rule:
            return False
        return self.premise_chain_valid if self.has_premises else True


def chain_valid(rule: Rule, record: PredictionRecord) -> bool:
    """Do the cited premises instantiate the body as a chain from x to y?"""
    prem = record.premises
    if len(prem) != rule.length:
        return False
    if any(p[1] != r for p, r in zip(prem, rule.body)):
        return False
    x, _, y = record.predicted
    if prem[0][0] != x or prem[-1][2] != y:
        return False
    return all(prem[i][2] == prem[i + 1][0] for i in range(len(prem) - 1))


def entailed_set(subgraph, rule: Rule) -> set:
    return {d.triple for d in entail(subgraph, rule)}


def audit(subgraph, rule: Rule, record: PredictionRecord,
          entailed: set | None = None) -> AuditRecord:
    """Audit one prediction.

    ``entailed`` may carry a precomputed ``entailed_set(subgraph, rule)`` when
    many records share a subgraph and rule.
    """
    if record.rule != rule:
        raise RuleMismatchError(
            f"record rule {render_rule(record.rule)!r} != audited rule {render_rule(rule)!r}")
    store = getattr(subgraph, "store", subgraph)
    known = store.entities.__contains__
    if entailed is None:
        entailed = entailed_set(subgraph, rule)
    flags = tuple(known(h) and known(t) and store.contains(h, r, t)
                  for h, r, t in record.premises)
    labels = [record.predicted[0], record.predicted[2]]
    labels += [e for p in record.premises for e in (p[0], p[2])]
    return AuditRecord(
        prediction=record,
        premise_flags=flags,
        entities_known=all(known(e) for e in labels),
        head_matches_rule=record.predicted[1] == rule.head,
        premise_chain_valid=chain_valid(rule, record),
        entailed_by_subgraph=record.predicted in entailed,
        known_fact=store.contains(*record.predicted),
    )


def audit_records(subgraphs, records: Iterable[PredictionRecord]) -> list[AuditRecord]:
    """Audit records against ``subgraphs`` (indexable by subgraph id)."""
    cache: dict = {}
    out = []
    for rec in records:
        sg = subgraphs[rec.subgraph_id]
        key = (rec.subgraph_id, rec.rule)
        if key not in cache:
            cache[key] = entailed_set(sg, rec.rule)
        out.append(audit(sg, rec.rule, rec, cache[key]))
    return out


@dataclass(frozen=True)
class Rate:
    numerator: int
    denominator: int

    @property
    def value(self) -> float | None:
        """``None`` marks an undefined rate (empty denominator)."""
        return self.numerator / self.denominator if self.denominator else None

    def to_dict(self) -> dict:
        return {"numerator": self.numerator, "denominator": self.denominator,
                "rate": self.value}

    def __str__(self) -> str:
        v = self.value
        return f"{self.numerator}/{self.denominator} = " + ("undefined" if v is None else f"{v:.4f}")


@dataclass
class HallucinationReport:
    n_predictions: int
    n_with_premises: int
    n_premises: int
    nonexistent_premise: Rate
    rule_noncompliant: Rate
    unknown_entity: Rate
    oracle_confirmed: Rate
    nonexistent_by_relation: dict[str, int] = field(default_factory=dict)
    per_rule: dict[str, dict] = field(default_factory=dict)
    per_subgraph: dict[str, dict] = field(default_factory=dict)

    def rates(self) -> dict[str, Rate]:
        return {"nonexistent_premise": self.nonexistent_premise,
                "rule_noncompliant": self.rule_noncompliant,
                "unknown_entity": self.unknown_entity,
                "oracle_confirmed": self.oracle_confirmed}

    def to_dict(self) -> dict:
        return {
            "n_predictions": self.n_predictions,
            "n_with_premises": self.n_with_premises,
            "n_premises": self.n_premises,
            **{k: r.to_dict() for k, r in self.rates().items()},
            "nonexistent_by_relation": self.nonexistent_by_relation,
            "per_rule": self.per_rule,
            "per_subgraph": self.per_subgraph,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"predictions\t{self.n_predictions}",
                 f"with_premises\t{self.n_with_premises}",
                 f"premises\t{self.n_premises}"]
        lines += [f"{k}\t{r}" for k, r in self.rates().items()]
        for rel, n in sorted(self.nonexistent_by_relation.items()):
            lines.append(f"nonexistent_premises[{rel}]\t{n}")
        return "\n".join(lines) + "\n"


def _rates(audits: list[AuditRecord]) -> dict[str, Rate]:
    with_prem = [a for a in audits if a.has_premises]
    n = len(audits)
    return {
        "nonexistent_premise": Rate(sum(1 for a in with_prem if not all(a.premise_flags)),
                                    len(with_prem)),
        "rule_noncompliant": Rate(sum(1 for a in audits if not a.rule_compliant), n),
        "unknown_entity": Rate(sum(1 for a in audits if not a.entities_known), n),
        "oracle_confirmed": Rate(sum(1 for a in audits if a.entailed_by_subgraph), n),
    }


def summarize(audits: Iterable[AuditRecord]) -> HallucinationReport:
    audits = list(audits)
    rates = _rates(audits)
    by_rel: Counter = Counter()
    for a in audits:
        for p in a.nonexistent_premises:
            by_rel[p[1]] += 1
    groups_rule: dict[str, list] = defaultdict(list)
    groups_sg: dict[int, list] = defaultdict(list)
    for a in audits:
        groups_rule[render_rule(a.prediction.rule)].append(a)
        groups_sg[a.prediction.subgraph_id].append(a)

    def breakdown(groups):
        return {str(k): {name: r.to_dict() for name, r in _rates(v).items()}
                for k, v in sorted(groups.items())}

    return HallucinationReport(
        n_predictions=len(audits),
        n_with_premises=sum(1 for a in audits if a.has_premises),
        n_premises=sum(len(a.premise_flags) for a in audits),
        nonexistent_by_relation=dict(sorted(by_rel.items())),
        per_rule=breakdown(groups_rule),
        per_subgraph=breakdown(groups_sg),
        **rates,
    )
