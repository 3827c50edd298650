"""Soft vertex-cut partitioning of a triple store into overlapping entity groups.

Two phases:

1. Primary grouping. Connected components that already fit within
   ``max_group`` become groups directly (undersized ones are packed together).
   For larger components, entities are visited in a seeded order; each
   still-ungrouped entity contributes its L-hop neighbourhood as a group and
   its (L-1)-hop neighbourhood is marked grouped. Neighbourhoods larger than
   ``max_group`` shrink their radius; neighbourhoods under ``min_group`` are
   held back.
2. Fine-tuning. Every entity still ungrouped is merged, with as many of its
   neighbours as fit, into the smallest group holding it or one of its
   neighbours.

Groups overlap, so every triple whose endpoints share a group survives in at
least one subgraph.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .kg_store import Triple, TripleStore, UnknownEntityError
from .rules import Rule

OK = ""
OVERFLOW = "overflow"
RESIDUAL = "residual"


@dataclass(frozen=True)
class PartitionConfig:
    hops: int = 2
    min_group: int = 10
    max_group: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.hops < 1:
            raise ValueError("hops must be >= 1")
        if not 0 < self.min_group <= self.max_group:
            raise ValueError("need 0 < min_group <= max_group")


@dataclass
class EntityGroup:
    entities: set[int]
    flag: str = OK

    def __len__(self) -> int:
        return len(self.entities)

    def sorted(self) -> list[int]:
        return sorted(self.entities)


@dataclass
class Subgraph:
    group_id: int
    entities: frozenset[int]
    store: TripleStore

    def __len__(self) -> int:
        return len(self.store)

    def contains(self, h: str, r: str, t: str) -> bool:
        return self.store.contains(h, r, t)


@dataclass
class PartitionStats:
    n_groups: int
    size_histogram: dict[int, int]
    multi_homed: int
    n_triples: int
    covered_triples: int
    triple_loss: int
    flags: dict[str, int] = field(default_factory=dict)

    def lines(self) -> list[str]:
        hist = ",".join(f"{k}:{v}" for k, v in sorted(self.size_histogram.items()))
        flags = ",".join(f"{k}:{v}" for k, v in sorted(self.flags.items())) or "-"
        return [
            f"groups\t{self.n_groups}",
            f"size_histogram\t{hist}",
            f"multi_homed_entities\t{self.multi_homed}",
            f"triples\t{self.n_triples}",
            f"covered_triples\t{self.covered_triples}",
            f"triple_loss\t{self.triple_loss}",
            f"flags\t{flags}",
        ]


def _components(store: TripleStore) -> list[list[int]]:
    ids = store.entity_ids
    pos = {e: i for i, e in enumerate(ids)}
    rows = [pos[t.head] for t in store.triples]
    cols = [pos[t.tail] for t in store.triples]
    n = len(ids)
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    comps: dict[int, list[int]] = {}
    for e, lab in zip(ids, labels):
        comps.setdefault(int(lab), []).append(e)
    # ordered by smallest member id so output does not depend on scipy labelling
    return sorted(comps.values(), key=lambda c: c[0])


def _ball(store: TripleStore, entity: int, hops: int, max_group: int):
    """Largest neighbourhood radius <= hops that fits ``max_group``.

    Returns (radius, distances). Radius 1 is the floor even when it overflows.
    """
    dist = store.distances(entity, hops)
    radius = hops
    while radius > 1 and sum(1 for d in dist.values() if d <= radius) > max_group:
        radius -= 1
    return radius, {e: d for e, d in dist.items() if d <= radius}


def partition(store: TripleStore, config: PartitionConfig = PartitionConfig()) -> list[EntityGroup]:
    if len(store) == 0:
        raise ValueError("cannot partition an empty store")
    groups: list[EntityGroup] = []

    # phase 1a: components that already fit are grouped whole; undersized ones packed
    large: list[int] = []
    pack: set[int] = set()
    for comp in _components(store):
        if len(comp) > config.max_group:
            large.extend(comp)
        elif len(comp) >= config.min_group:
            groups.append(EntityGroup(set(comp)))
        else:
            if len(pack) + len(comp) > config.max_group:
                groups.append(EntityGroup(pack, OK if len(pack) >= config.min_group else RESIDUAL))
                pack = set()
            pack |= set(comp)
    if pack:
        groups.append(EntityGroup(pack, OK if len(pack) >= config.min_group else RESIDUAL))

    # phase 1b: L-hop neighbourhood groups inside large components
    rng = np.random.default_rng(config.seed)
    order = [large[i] for i in rng.permutation(len(large))] if large else []
    ungrouped = set(large)
    for e in order:
        if e not in ungrouped:
            continue
        radius, dist = _ball(store, e, config.hops, config.max_group)
        if len(dist) < config.min_group:
            continue
        flag = OVERFLOW if len(dist) > config.max_group else OK
        groups.append(EntityGroup(set(dist), flag))
        ungrouped -= {n for n, d in dist.items() if d <= radius - 1}

    # phase 2: fine-tune leftovers into the smallest touching group
    membership: dict[int, list[int]] = {}
    for gi, g in enumerate(groups):
        for n in g.entities:
            membership.setdefault(n, []).append(gi)
    residual: set[int] = set()
    for e in order:
        if e not in ungrouped:
            continue
        cands = set(membership.get(e, ()))
        if not cands:
            for n in store.adjacency[e]:
                cands.update(membership.get(n, ()))
        if not cands:
            residual.add(e)
            continue
        gi = min(cands, key=lambda i: (len(groups[i]), i))
        g = groups[gi]
        for n in [e, *sorted(store.adjacency[e])]:
            if n in g.entities:
                continue
            if n != e and len(g) >= config.max_group:
                break
            if n == e and len(g) >= config.max_group:
                g.flag = OVERFLOW
            g.entities.add(n)
            membership.setdefault(n, []).append(gi)
    if residual:
        groups.append(EntityGroup(residual, RESIDUAL))
    return groups


def build_subgraph(store: TripleStore, group, group_id: int = 0) -> Subgraph:
    """Triples with both endpoints inside ``group``."""
    entities = frozenset(group.entities if isinstance(group, EntityGroup) else group)
    missing = [e for e in entities if e not in store.adjacency]
    if missing:
        raise UnknownEntityError(missing[0])
    triples = [t for e in entities for t in store.by_head.get(e, ()) if t.tail in entities]
    return Subgraph(group_id, entities,
                    TripleStore.from_ids(sorted(triples), store.entities, store.relations))


def build_subgraphs(store: TripleStore, groups: list[EntityGroup]) -> list[Subgraph]:
    return [build_subgraph(store, g, i) for i, g in enumerate(groups)]


def rule_related_triples(subgraph, rule: Rule) -> set[Triple]:
    """Subgraph triples whose relation appears in the rule body."""
    store: TripleStore = getattr(subgraph, "store", subgraph)
    out: set[Triple] = set()
    for label in set(rule.body):
        rid = store.relations.id(label)
        if rid is not None:
            out |= store.pairs(rid)
    return out


def partition_stats(store: TripleStore, groups: list[EntityGroup],
                    subgraphs: list[Subgraph] | None = None) -> PartitionStats:
    if subgraphs is None:
        subgraphs = build_subgraphs(store, groups)
    covered: set[Triple] = set()
    for sg in subgraphs:
        covered |= sg.store.triples
    counts = Counter(e for g in groups for e in g.entities)
    return PartitionStats(
        n_groups=len(groups),
        size_histogram=dict(sorted(Counter(len(g) for g in groups).items())),
        multi_homed=sum(1 for c in counts.values() if c > 1),
        n_triples=len(store),
        covered_triples=len(covered),
        triple_loss=len(store) - len(covered),
        flags=dict(Counter(g.flag for g in groups if g.flag)),
    )


def write_manifest(path, store: TripleStore, groups: list[EntityGroup],
                   stats: PartitionStats | None = None) -> None:
    """One ``group_id<TAB>e1,e2,...`` line per group, then a ``#`` stats block."""
    stats = stats or partition_stats(store, groups)
    label = store.entities.label
    with open(path, "w", encoding="utf-8") as fh:
        for gi, g in enumerate(groups):
            fh.write(f"{gi}\t{','.join(label(e) for e in g.sorted())}\n")
        for line in stats.lines():
            fh.write(f"# {line}\n")


def read_manifest(path, store: TripleStore) -> list[EntityGroup]:
    groups = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            _, members = line.split("\t", 1)
            ids = set()
            for label in members.split(","):
                eid = store.entities.id(label)
                if eid is None:
                    raise UnknownEntityError(label)
                ids.add(eid)
            groups.append(EntityGroup(ids))
    return groups
