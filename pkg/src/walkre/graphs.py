"""Labeled dependency graphs, relationship candidates, and their annotations.

A sentence is a directed labeled graph whose vertices carry token features
(word, lemma, fine POS, coarse POS, capitalization pattern).  A candidate is
an unordered pair of entity mentions in one sentence, annotated with two
per-element predicates: ``is_entity`` (true exactly at the two candidate
vertices) and ``in_sp`` (true on one fixed shortest path between them,
computed on the undirected view of the edge set).
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, replace

from .errors import UnsupportedArityError

CAPS_CATEGORIES = ("AllLower", "Capitalized", "AllCaps", "Mixed", "Other")

FEATURE_SLOTS = ("word", "lemma", "pos", "gpos", "caps")


def caps_category(word: str) -> str:
    """Classify the capitalization pattern of a token.

    Words without alphabetic characters fall into "Other"; single uppercase
    letters count as "AllCaps".
    """
    if not any(ch.isalpha() for ch in word):
        return "Other"
    if word.islower():
        return "AllLower"
    if word.isupper():
        return "AllCaps"
    if word[0].isupper() and word[1:].islower():
        return "Capitalized"
    return "Mixed"


@dataclass(frozen=True)
class TokenFeatures:
    """The five feature slots attached to one vertex."""

    word: str
    lemma: str
    pos: str
    gpos: str
    caps: str

    def as_tuple(self) -> tuple[str, str, str, str, str]:
        return (self.word, self.lemma, self.pos, self.gpos, self.caps)


@dataclass(frozen=True)
class Edge:
    head: int
    dependent: int
    label: str


@dataclass(frozen=True)
class EntityMention:
    entity_id: str
    vertex: int


@dataclass(frozen=True)
class SentenceGraph:
    """One sentence as a labeled directed graph.

    ``vertices`` keeps explicit indices so that malformed inputs (gaps,
    duplicates) survive construction and can be reported by
    :func:`validate_sentence`.  All operations besides validation assume a
    valid graph whose vertex list is sorted by index.

    ``pair_labels`` holds gold entity-id pairs with a 0/1 relationship label;
    it is empty for unlabeled data.
    """

    doc_id: str
    sent_id: str
    vertices: tuple[tuple[int, TokenFeatures], ...]
    edges: tuple[Edge, ...]
    entity_mentions: tuple[EntityMention, ...]
    pair_labels: tuple[tuple[str, str, int], ...] = ()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def features(self) -> tuple[TokenFeatures, ...]:
        return tuple(f for _, f in self.vertices)


@dataclass(frozen=True)
class Split:
    split_id: int
    train_docs: tuple[str, ...]
    test_docs: tuple[str, ...]


@dataclass(frozen=True)
class Corpus:
    documents: tuple[tuple[str, tuple[SentenceGraph, ...]], ...]
    splits: tuple[Split, ...] | None = None

    def doc_ids(self) -> tuple[str, ...]:
        return tuple(doc_id for doc_id, _ in self.documents)

    def sentences_for(self, doc_id: str) -> tuple[SentenceGraph, ...]:
        for did, sentences in self.documents:
            if did == doc_id:
                return sentences
        raise KeyError(doc_id)

    def all_sentences(self) -> tuple[SentenceGraph, ...]:
        return tuple(s for _, sentences in self.documents for s in sentences)


@dataclass(frozen=True)
class Candidate:
    """An entity pair in one sentence plus its per-element annotations.

    ``in_sp_*`` flags mark one fixed shortest path between ``e1`` and ``e2``;
    if the two entities are disconnected only the entity vertices are flagged
    and ``sp_disconnected`` is set.  ``label`` is 1/0 for labeled data, None
    otherwise.
    """

    graph: SentenceGraph
    e1: int
    e2: int
    e1_id: str
    e2_id: str
    is_entity: tuple[bool, ...]
    in_sp_vertex: tuple[bool, ...]
    in_sp_edge: tuple[bool, ...]
    sp_disconnected: bool = False
    label: int | None = None

    @property
    def identifier(self) -> str:
        return f"{self.graph.doc_id}/{self.graph.sent_id}/{self.e1_id}/{self.e2_id}"


def _undirected_adjacency(n: int, edges: tuple[Edge, ...]) -> list[list[int]]:
    seen = [set() for _ in range(n)]
    for e in edges:
        seen[e.head].add(e.dependent)
        seen[e.dependent].add(e.head)
    return [sorted(s) for s in seen]


def _bfs_path(adj: list[list[int]], start: int, goal: int) -> list[int] | None:
    """Shortest path by BFS; neighbors explored in ascending index order."""
    if start == goal:
        return [start]
    parent: dict[int, int] = {start: start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                if v == goal:
                    path = [v]
                    while path[-1] != start:
                        path.append(parent[path[-1]])
                    path.reverse()
                    return path
                queue.append(v)
    return None


def annotate_shortest_path(candidate: Candidate) -> Candidate:
    """Recompute the in_sp flags of a candidate.

    The path is found by BFS on the undirected view of the edge set with unit
    weights; among equal-length paths the one reached first in ascending
    vertex-index order wins.  For each path step exactly one edge (the first
    matching entry in edge-list order, either direction) is flagged.
    Disconnection is a valid outcome, recorded via ``sp_disconnected``.
    """
    graph = candidate.graph
    n = graph.n_vertices
    adj = _undirected_adjacency(n, graph.edges)
    path = _bfs_path(adj, candidate.e1, candidate.e2)

    vertex_flags = [False] * n
    edge_flags = [False] * len(graph.edges)
    if path is None:
        vertex_flags[candidate.e1] = True
        vertex_flags[candidate.e2] = True
        return replace(
            candidate,
            in_sp_vertex=tuple(vertex_flags),
            in_sp_edge=tuple(edge_flags),
            sp_disconnected=True,
        )

    for v in path:
        vertex_flags[v] = True
    for u, w in zip(path, path[1:]):
        for idx, e in enumerate(graph.edges):
            if {e.head, e.dependent} == {u, w}:
                edge_flags[idx] = True
                break
    return replace(
        candidate,
        in_sp_vertex=tuple(vertex_flags),
        in_sp_edge=tuple(edge_flags),
        sp_disconnected=False,
    )


def generate_candidates(sentence: SentenceGraph, arity: int = 2) -> list[Candidate]:
    """All unordered entity-mention pairs of a sentence, fully annotated.

    Mentions are paired in ascending (vertex, entity_id) order; pairs whose
    mentions share a vertex are skipped.  When the sentence carries
    ``pair_labels``, each candidate gets the listed label (unlisted pairs
    default to 0); otherwise labels stay None.
    """
    if arity != 2:
        raise UnsupportedArityError(
            f"only binary relationships are supported, got arity={arity}"
        )
    labels: dict[tuple[str, str], int] | None = None
    if sentence.pair_labels:
        labels = {}
        for a, b, value in sentence.pair_labels:
            key = (a, b) if a <= b else (b, a)
            if key in labels and labels[key] != value:
                raise ValueError(
                    f"conflicting labels for pair {key} in "
                    f"{sentence.doc_id}/{sentence.sent_id}"
                )
            labels[key] = value

    mentions = sorted(sentence.entity_mentions, key=lambda m: (m.vertex, m.entity_id))
    n = sentence.n_vertices
    candidates = []
    for m1, m2 in itertools.combinations(mentions, 2):
        if m1.vertex == m2.vertex:
            continue
        is_entity = [False] * n
        is_entity[m1.vertex] = True
        is_entity[m2.vertex] = True
        label = None
        if labels is not None:
            key = (m1.entity_id, m2.entity_id)
            if key[0] > key[1]:
                key = (key[1], key[0])
            label = labels.get(key, 0)
        candidate = Candidate(
            graph=sentence,
            e1=m1.vertex,
            e2=m2.vertex,
            e1_id=m1.entity_id,
            e2_id=m2.entity_id,
            is_entity=tuple(is_entity),
            in_sp_vertex=(False,) * n,
            in_sp_edge=(False,) * len(sentence.edges),
            label=label,
        )
        candidates.append(annotate_shortest_path(candidate))
    return candidates


def _check_identifier(kind: str, value: str, out: list[str]) -> None:
    if not value or "/" in value or any(ch.isspace() for ch in value):
        out.append(f"{kind} {value!r} must be non-empty without '/' or whitespace")


def validate_sentence(sentence: SentenceGraph) -> list[str]:
    """Return one description per violated invariant (empty list if valid)."""
    violations: list[str] = []
    _check_identifier("doc_id", sentence.doc_id, violations)
    _check_identifier("sent_id", sentence.sent_id, violations)

    n = sentence.n_vertices
    indices = [i for i, _ in sentence.vertices]
    seen: set[int] = set()
    for i in indices:
        if i in seen:
            violations.append(f"duplicate vertex index {i}")
        seen.add(i)
    if seen != set(range(n)):
        missing = sorted(set(range(n)) - seen)
        extra = sorted(seen - set(range(n)))
        violations.append(
            f"vertex indices not contiguous 0..{n - 1} (missing {missing}, unexpected {extra})"
        )

    for i, feats in sentence.vertices:
        for slot in FEATURE_SLOTS:
            if not getattr(feats, slot):
                violations.append(f"vertex {i} has empty feature slot '{slot}'")
        if feats.caps not in CAPS_CATEGORIES:
            violations.append(f"vertex {i} has unknown caps category {feats.caps!r}")
        elif feats.word and feats.caps != caps_category(feats.word):
            violations.append(
                f"vertex {i} caps {feats.caps!r} not derivable from word {feats.word!r}"
            )

    seen_edges: set[tuple[int, int, str]] = set()
    for e in sentence.edges:
        if not (0 <= e.head < n) or not (0 <= e.dependent < n):
            violations.append(
                f"edge endpoint out of range: ({e.head}, {e.dependent}) with {n} vertices"
            )
            continue
        if e.head == e.dependent:
            violations.append(f"self-loop at vertex {e.head}")
        triple = (e.head, e.dependent, e.label)
        if triple in seen_edges:
            violations.append(f"duplicate edge {triple}")
        seen_edges.add(triple)

    mention_ids = set()
    for m in sentence.entity_mentions:
        _check_identifier("entity id", m.entity_id, violations)
        mention_ids.add(m.entity_id)
        if not (0 <= m.vertex < n):
            violations.append(
                f"entity mention {m.entity_id} references invalid vertex {m.vertex}"
            )
    for a, b, value in sentence.pair_labels:
        for eid in (a, b):
            if eid not in mention_ids:
                violations.append(f"pair label references unknown entity {eid!r}")
        if value not in (0, 1):
            violations.append(f"pair label for ({a}, {b}) must be 0 or 1, got {value!r}")
    return violations
