"""In-memory triple store with interned symbols and join indices.

Entities and relations are interned to dense integers when loaded. All joins
run on integers; labels only appear at I/O boundaries.
"""
from __future__ import annotations

from collections import defaultdict, deque
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

INVERSE_PREFIX = "inv_"

LabeledTriple = tuple[str, str, str]


class GraphParseError(ValueError):
    """Malformed line in a triple file."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class AugmentationConflictError(ValueError):
    """Inverse augmentation requested on a store that already has inverses."""


class UnknownEntityError(KeyError):
    pass


def is_inverse(relation: str) -> bool:
    return relation.startswith(INVERSE_PREFIX)


def inverse_of(relation: str) -> str:
    """``r -> inv_r`` and ``inv_r -> r``."""
    if is_inverse(relation):
        return relation[len(INVERSE_PREFIX):]
    return INVERSE_PREFIX + relation


def base_of(relation: str) -> str:
    return relation[len(INVERSE_PREFIX):] if is_inverse(relation) else relation


class SymbolTable:
    """Bijective label <-> dense id mapping."""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}
        for label in labels:
            self.intern(label)

    def intern(self, label: str) -> int:
        idx = self._ids.get(label)
        if idx is None:
            idx = len(self._labels)
            self._ids[label] = idx
            self._labels.append(label)
        return idx

    def id(self, label: str) -> int | None:
        return self._ids.get(label)

    def label(self, idx: int) -> str:
        return self._labels[idx]

    def copy(self) -> "SymbolTable":
        return SymbolTable(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class TripleStore:
    """A set of triples plus the indices the joins need.

    Symbol tables may be shared with other stores (subgraphs share the
    parent's tables so ids stay comparable). A store is treated as immutable
    once built; use :meth:`from_labeled` or :func:`load_graph` to make one.
    """

    def __init__(self, entities: SymbolTable | None = None,
                 relations: SymbolTable | None = None):
        self.entities = entities if entities is not None else SymbolTable()
        self.relations = relations if relations is not None else SymbolTable()
        self.triples: set[Triple] = set()
        self.by_relation: dict[int, set[Triple]] = defaultdict(set)
        self.by_head: dict[int, set[Triple]] = defaultdict(set)
        self.tails: dict[tuple[int, int], set[int]] = defaultdict(set)
        self.heads: dict[tuple[int, int], set[int]] = defaultdict(set)
        self.adjacency: dict[int, set[int]] = defaultdict(set)

    @classmethod
    def from_labeled(cls, triples: Iterable[LabeledTriple]) -> "TripleStore":
        store = cls()
        for h, r, t in triples:
            store._add_labeled(h, r, t)
        return store

    @classmethod
    def from_ids(cls, triples: Iterable[Triple], entities: SymbolTable,
                 relations: SymbolTable) -> "TripleStore":
        store = cls(entities, relations)
        for triple in triples:
            store._add(Triple(*triple))
        return store

    def _add_labeled(self, h: str, r: str, t: str) -> None:
        self._add(Triple(self.entities.intern(h), self.relations.intern(r),
                         self.entities.intern(t)))

    def _add(self, triple: Triple) -> None:
        if triple in self.triples:
            return
        h, r, t = triple
        self.triples.add(triple)
        self.by_relation[r].add(triple)
        self.by_head[h].add(triple)
        self.tails[(h, r)].add(t)
        self.heads[(t, r)].add(h)
        self.adjacency[h].add(t)
        self.adjacency[t].add(h)

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    @property
    def entity_ids(self) -> list[int]:
        """Ids of entities that occur in at least one triple, ascending."""
        return sorted(self.adjacency)

    @property
    def relation_ids(self) -> list[int]:
        return sorted(r for r, ts in self.by_relation.items() if ts)

    @property
    def num_entities(self) -> int:
        return len(self.adjacency)

    @property
    def num_relations(self) -> int:
        return len(self.relation_ids)

    def relation_labels(self) -> list[str]:
        return sorted(self.relations.label(r) for r in self.relation_ids)

    def pairs(self, relation: int) -> set[Triple]:
        return self.by_relation.get(relation, set())

    def has(self, triple: Triple) -> bool:
        return triple in self.triples

    def contains(self, h: str, r: str, t: str) -> bool:
        """Label-level membership; unknown labels are simply absent."""
        hid, rid, tid = self.entities.id(h), self.relations.id(r), self.entities.id(t)
        if hid is None or rid is None or tid is None:
            return False
        return Triple(hid, rid, tid) in self.triples

    def label(self, triple: Triple) -> LabeledTriple:
        return (self.entities.label(triple.head), self.relations.label(triple.relation),
                self.entities.label(triple.tail))

    def labeled(self) -> set[LabeledTriple]:
        return {self.label(t) for t in self.triples}

    def khop(self, entity: int, hops: int) -> set[int]:
        """Entities within ``hops`` undirected steps of ``entity``, itself included."""
        if hops < 0:
            raise ValueError("hop count must be >= 0")
        if entity not in self.adjacency:
            raise UnknownEntityError(entity)
        seen = {entity}
        frontier = [entity]
        for _ in range(hops):
            nxt = []
            for e in frontier:
                for n in self.adjacency[e]:
                    if n not in seen:
                        seen.add(n)
                        nxt.append(n)
            if not nxt:
                break
            frontier = nxt
        return seen

    def khop_neighbors(self, entity: str, hops: int) -> set[str]:
        eid = self.entities.id(entity)
        if eid is None or eid not in self.adjacency:
            raise UnknownEntityError(entity)
        return {self.entities.label(e) for e in self.khop(eid, hops)}

    def distances(self, entity: int, max_hops: int) -> dict[int, int]:
        """BFS distances from ``entity`` up to ``max_hops``."""
        dist = {entity: 0}
        queue = deque([entity])
        while queue:
            e = queue.popleft()
            if dist[e] == max_hops:
                continue
            for n in self.adjacency[e]:
                if n not in dist:
                    dist[n] = dist[e] + 1
                    queue.append(n)
        return dist


def read_triples(path) -> list[LabeledTriple]:
    """Parse a ``head<TAB>relation<TAB>tail`` file, skipping blanks and ``#`` comments."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise GraphParseError(path, lineno,
                                      f"expected 3 tab-separated fields, got {len(fields)}")
            h, r, t = (f.strip() for f in fields)
            if not (h and r and t):
                raise GraphParseError(path, lineno, "empty field")
            out.append((h, r, t))
    return out


def load_graph(path) -> TripleStore:
    return TripleStore.from_labeled(read_triples(path))


def write_triples(path, triples: Iterable[LabeledTriple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in sorted(triples):
            fh.write(f"{h}\t{r}\t{t}\n")


def add_inverses(store: TripleStore) -> TripleStore:
    """Return a new store with ``(t, inv_r, h)`` added for every ``(h, r, t)``."""
    clashing = [store.relations.label(r) for r in store.relation_ids
                if is_inverse(store.relations.label(r))]
    if clashing:
        raise AugmentationConflictError(
            f"store already contains inverse relations: {', '.join(sorted(clashing))}")
    out = TripleStore(store.entities.copy(), store.relations.copy())
    inv = {r: out.relations.intern(inverse_of(store.relations.label(r)))
           for r in store.relation_ids}
    for triple in sorted(store.triples):
        out._add(triple)
    for h, r, t in sorted(store.triples):
        out._add(Triple(t, inv[r], h))
    return out


def load_dataset(directory) -> tuple[TripleStore, TripleStore]:
    """Load ``train.txt`` and ``test.txt`` from a dataset directory."""
    directory = Path(directory)
    return load_graph(directory / "train.txt"), load_graph(directory / "test.txt")
