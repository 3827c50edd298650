"""Closed-world scoring of a predicted triple set against a test set."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .kg_store import LabeledTriple, TripleStore, base_of, is_inverse
from .rules import render_rule


def fold_inverse(triple: LabeledTriple) -> LabeledTriple:
    h, r, t = triple
    return (t, base_of(r), h) if is_inverse(r) else triple


@dataclass
class Canonical:
    triples: set[LabeledTriple]
    n_raw: int = 0
    n_folded: int = 0
    n_duplicates: int = 0
    n_known: int = 0


def canonicalize_predictions(records: Iterable, known=None) -> Canonical:
    """Fold inverses, drop duplicates, and drop facts already in ``known``.

    ``records`` holds prediction records or bare labelled triples. ``known``
    is a training :class:`TripleStore` or a set of labelled triples.
    """
    if isinstance(known, TripleStore):
        known = known.labeled()
    known = {fold_inverse(t) for t in known} if known else set()
    out: set[LabeledTriple] = set()
    n_raw = n_folded = n_dup = n_known = 0
    seen_known: set[LabeledTriple] = set()
    for rec in records:
        triple = tuple(getattr(rec, "predicted", rec))
        n_raw += 1
        canon = fold_inverse(triple)
        n_folded += canon != triple
        if canon in known:
            if canon in seen_known:
                n_dup += 1
            else:
                seen_known.add(canon)
                n_known += 1
            continue
        if canon in out:
            n_dup += 1
        out.add(canon)
    return Canonical(out, n_raw, n_folded, n_dup, n_known)


def split_pos_neg(predicted: set, test: set) -> tuple[set, set]:
    positive = predicted & test
    return positive, predicted - positive


class Metrics(NamedTuple):
    jprecision: float
    st_recall: float
    f_tsp: float


def compute_metrics(n_positive: int, n_predict: int, n_test: int) -> Metrics:
    """JPrecision, squared-root test recall and their harmonic mean."""
    if n_test <= 0:
        raise ValueError("test set must be non-empty")
    if n_positive < 0 or n_positive > n_predict or n_positive > n_test:
        raise ValueError(
            f"inconsistent counts: positive={n_positive} predict={n_predict} test={n_test}")
    jp = n_positive / n_predict if n_predict else 0.0
    st = math.sqrt(n_positive / n_test)
    return Metrics(jp, st, f_tsp(jp, st))


def f_tsp(jprecision: float, st_recall: float) -> float:
    s = jprecision + st_recall
    return 2 * jprecision * st_recall / s if s else 0.0


@dataclass
class EvalReport:
    n_predict: int
    n_positive: int
    n_test: int
    jprecision: float
    st_recall: float
    f_tsp: float
    n_raw: int = 0
    n_duplicates: int = 0
    n_known: int = 0
    n_folded: int = 0
    per_rule: dict[str, dict] = field(default_factory=dict)
    per_subgraph: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        keys = ["n_raw", "n_folded", "n_duplicates", "n_known", "n_predict", "n_positive",
                "n_test", "jprecision", "st_recall", "f_tsp"]
        lines = [f"{k}={_fmt(getattr(self, k))}" for k in keys]
        for name, table in (("rule", self.per_rule), ("subgraph", self.per_subgraph)):
            for key, row in table.items():
                cells = " ".join(f"{k}={_fmt(v)}" for k, v in row.items())
                lines.append(f"{name}[{key}] {cells}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def _row(predicted: set, test: set) -> dict:
    pos, _ = split_pos_neg(predicted, test)
    m = compute_metrics(len(pos), len(predicted), len(test))
    return {"n_predict": len(predicted), "n_positive": len(pos), **m._asdict()}


def evaluate(records: list, test, known=None) -> EvalReport:
    """Score prediction records against ``test`` (store or labelled triple set)."""
    if isinstance(test, TripleStore):
        test = test.labeled()
    test = set(test)
    canon = canonicalize_predictions(records, known)
    pos, _ = split_pos_neg(canon.triples, test)
    m = compute_metrics(len(pos), len(canon.triples), len(test))

    by_rule, by_sg = defaultdict(list), defaultdict(list)
    for rec in records:
        if hasattr(rec, "rule"):
            by_rule[render_rule(rec.rule)].append(rec)
            by_sg[rec.subgraph_id].append(rec)
    per_rule = {k: _row(canonicalize_predictions(v, known).triples, test)
                for k, v in sorted(by_rule.items())}
    per_sg = {str(k): _row(canonicalize_predictions(v, known).triples, test)
              for k, v in sorted(by_sg.items())}
    return EvalReport(len(canon.triples), len(pos), len(test), m.jprecision, m.st_recall,
                      m.f_tsp, canon.n_raw, canon.n_duplicates, canon.n_known, canon.n_folded,
                      per_rule, per_sg)


def aggregate(reports: list[EvalReport]) -> dict[str, tuple[float, float]]:
    """Mean and population standard deviation of each headline number across runs."""
    keys = ["n_predict", "n_positive", "jprecision", "st_recall", "f_tsp"]
    arr = np.array([[getattr(r, k) for k in keys] for r in reports], dtype=float)
    return {k: (float(arr[:, i].mean()), float(arr[:, i].std())) for i, k in enumerate(keys)}
