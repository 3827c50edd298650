"""Chain Horn rules: parsing, rendering, grounding, scoring and forward application.

A rule ``h(X,Y) <- b1(X,Z1) ^ ... ^ bK(Z{K-1},Y)`` is stored as a head relation
and an ordered body. The variable pattern is fixed by position and never
stored.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .kg_store import LabeledTriple, Triple, TripleStore

MIN_LENGTH = 2
MAX_LENGTH = 3

_ARROW = re.compile(r"<-|⟵|←|:-")
_CONJ = re.compile(r"\^|∧|&")
_ATOM = re.compile(r"\s*([A-Za-z_]\w*)\s*\(\s*([A-Za-z_]\w*)\s*,\s*([A-Za-z_]\w*)\s*\)\s*")


class RuleParseError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Rule:
    head: str
    body: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        if not MIN_LENGTH <= len(self.body) <= MAX_LENGTH:
            raise RuleParseError(
                f"rule length must be in [{MIN_LENGTH}, {MAX_LENGTH}], got {len(self.body)}")

    @property
    def length(self) -> int:
        return len(self.body)

    @property
    def relations(self) -> tuple[str, ...]:
        return (self.head, *self.body)

    def __str__(self) -> str:
        return render_rule(self)


def _variables(k: int) -> list[str]:
    return ["X", *(f"Z{i}" for i in range(1, k)), "Y"]


def render_rule(rule: Rule) -> str:
    v = _variables(rule.length)
    body = " ^ ".join(f"{r}({v[i]},{v[i + 1]})" for i, r in enumerate(rule.body))
    return f"{rule.head}(X,Y) <- {body}"


def parse_rule(text: str) -> Rule:
    """Parse the arrow syntax; a trailing ``| key=value`` annotation is ignored."""
    text = text.split("|", 1)[0].strip()
    parts = _ARROW.split(text)
    if len(parts) != 2:
        raise RuleParseError(f"expected exactly one '<-' in {text!r}")
    head_txt, body_txt = parts
    head = _ATOM.fullmatch(head_txt)
    if not head:
        raise RuleParseError(f"bad head atom {head_txt.strip()!r}")
    atoms = []
    for piece in _CONJ.split(body_txt):
        m = _ATOM.fullmatch(piece)
        if not m:
            raise RuleParseError(f"bad body atom {piece.strip()!r}")
        atoms.append(m)
    if not MIN_LENGTH <= len(atoms) <= MAX_LENGTH:
        raise RuleParseError(
            f"rule length must be in [{MIN_LENGTH}, {MAX_LENGTH}], got {len(atoms)}")

    x, y = head.group(2), head.group(3)
    if x == y:
        raise RuleParseError(f"head atom {head.group(0).strip()!r} repeats a variable")
    seen = {x, y}
    prev = x
    for i, m in enumerate(atoms):
        a, b = m.group(2), m.group(3)
        if a != prev:
            raise RuleParseError(
                f"broken variable chain at atom {m.group(0).strip()!r}: expected {prev} first")
        last = i == len(atoms) - 1
        if last and b != y:
            raise RuleParseError(
                f"broken variable chain at atom {m.group(0).strip()!r}: expected {y} last")
        if not last:
            if b in seen:
                raise RuleParseError(
                    f"atom {m.group(0).strip()!r} reuses variable {b}")
            seen.add(b)
        prev = b
    return Rule(head.group(1), tuple(m.group(1) for m in atoms))


def read_rules(path) -> list[Rule]:
    rules = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rules.append(parse_rule(line))
            except RuleParseError as exc:
                raise RuleParseError(f"{path}:{lineno}: {exc}") from None
    return rules


# -- grounding ---------------------------------------------------------------

def _resolve(store: TripleStore, relations: Iterable[str]) -> list[int] | None:
    ids = [store.relations.id(r) for r in relations]
    return None if any(i is None for i in ids) else ids


def ground_paths(store: TripleStore, rule: Rule) -> dict[tuple[int, int], tuple[int, ...]]:
    """Map each body-satisfying ``(x, y)`` to its smallest witness path.

    The witness is the tuple of intermediate entities ``(z1, ..., z{K-1})``.
    Joins go left to right along the chain through the ``(head, relation)``
    index, deduplicating on the frontier pair at each step.
    """
    body = _resolve(store, rule.body)
    if body is None:
        return {}
    frontier: dict[tuple[int, int], tuple[int, ...]] = {}
    for h, _, t in store.pairs(body[0]):
        frontier[(h, t)] = ()
    for rel in body[1:]:
        nxt: dict[tuple[int, int], tuple[int, ...]] = {}
        tails = store.tails
        for (x, z), path in frontier.items():
            ys = tails.get((z, rel))
            if not ys:
                continue
            cand = path + (z,)
            for y in ys:
                old = nxt.get((x, y))
                if old is None or cand < old:
                    nxt[(x, y)] = cand
        frontier = nxt
    return frontier


def ground_body(store: TripleStore, rule: Rule) -> set[tuple[int, int]]:
    return set(ground_paths(store, rule))


@dataclass(frozen=True)
class RuleQuality:
    support: int
    head_coverage: float
    confidence: float
    body_groundings: int
    head_facts: int
    degenerate: bool = False

    def annotation(self) -> str:
        return (f"support={self.support} hc={self.head_coverage:.4f} "
                f"conf={self.confidence:.4f}")


def score_rule(store: TripleStore, rule: Rule) -> RuleQuality:
    """Standard (closed-world) support, head coverage and confidence.

    Support counts distinct ``(x, y)`` pairs, not distinct full bindings.
    """
    grounded = ground_body(store, rule)
    head = store.relations.id(rule.head)
    head_facts = len(store.pairs(head)) if head is not None else 0
    if head is None:
        support = 0
    else:
        tails = store.tails
        support = sum(1 for x, y in grounded if y in tails.get((x, head), ()))
    n_body = len(grounded)
    hc = support / head_facts if head_facts else 0.0
    conf = support / n_body if n_body else 0.0
    return RuleQuality(support, hc, conf, n_body, head_facts,
                       degenerate=not (head_facts and n_body))


def dedupe_rules(rules: Iterable[Rule]) -> list[Rule]:
    return list(dict.fromkeys(rules))


def filter_rules(rules: Iterable[Rule], alpha_conf: float, alpha_hc: float,
                 store: TripleStore) -> list[tuple[Rule, RuleQuality]]:
    """Keep rules with ``conf >= alpha_conf`` and ``hc >= alpha_hc``."""
    for name, value in (("alpha_conf", alpha_conf), ("alpha_hc", alpha_hc)):
        if not 0.0 <= value or value != value:
            raise ValueError(f"{name} must be a non-negative ratio, got {value}")
    kept = []
    for rule in dedupe_rules(rules):
        q = score_rule(store, rule)
        if q.confidence >= alpha_conf and q.head_coverage >= alpha_hc:
            kept.append((rule, q))
    kept.sort(key=lambda rq: (rq[0].head, -rq[1].confidence, render_rule(rq[0])))
    return kept


# -- forward application -----------------------------------------------------

class Derivation(NamedTuple):
    """A derived triple plus the premises of one witnessing body grounding."""
    triple: LabeledTriple
    premises: tuple[LabeledTriple, ...]

    @property
    def reflexive(self) -> bool:
        return self.triple[0] == self.triple[2]


def entail(graph, rule: Rule) -> list[Derivation]:
    """One forward-chaining step of ``rule`` over ``graph``.

    ``graph`` is a :class:`TripleStore` or anything with a ``store`` attribute
    holding one. Heads already present in the graph are not returned.
    Reflexive derivations (x == y) are kept; see :attr:`Derivation.reflexive`.
    """
    store: TripleStore = getattr(graph, "store", graph)
    paths = ground_paths(store, rule)
    if not paths:
        return []
    ent = store.entities.label
    body = _resolve(store, rule.body)
    head = store.relations.id(rule.head)
    out = []
    for (x, y), mids in paths.items():
        if head is not None and store.has(Triple(x, head, y)):
            continue
        chain = (x, *mids, y)
        premises = tuple(
            (ent(chain[i]), rule.body[i], ent(chain[i + 1])) for i in range(len(body)))
        out.append(Derivation((ent(x), rule.head, ent(y)), premises))
    out.sort()
    return out
