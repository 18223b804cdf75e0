"""Corpus ingestion and serialization.

The on-disk corpus is line-oriented JSON, one sentence per line:

    {"doc_id": str, "sent_id": str,
     "tokens": [{"i": int, "word": str, "lemma": str, "pos": str, "gpos": str}],
     "edges": [{"head": int, "dep": int, "label": str}],
     "entities": [{"id": str, "token": int}],
     "pairs": [{"e1": str, "e2": str, "label": 0|1}]}

``caps`` is derived at ingestion and never stored.  ``pairs`` is optional.
Split files hold one JSON object per line:
``{"split": int, "train_docs": [...], "test_docs": [...]}``.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .errors import IngestError
from .graphs import (
    Candidate,
    Corpus,
    Edge,
    EntityMention,
    SentenceGraph,
    Split,
    TokenFeatures,
    caps_category,
    generate_candidates,
)

BLINDED_TOKEN = "ENTITY"


def sentence_from_json(
    obj: dict,
    entity_blinding: bool = False,
    symmetrize_edges: bool = False,
) -> SentenceGraph:
    """Build a SentenceGraph from one parsed corpus line.

    With ``entity_blinding`` the word and lemma of every entity-mention vertex
    are replaced by a fixed placeholder before the caps feature is derived.
    With ``symmetrize_edges`` each edge gets a reversed twin whose label is
    suffixed with ``-rev``.
    """
    for key in ("doc_id", "sent_id", "tokens", "edges", "entities"):
        if key not in obj:
            raise IngestError(f"missing {key!r}")

    entity_vertices = {int(ent["token"]) for ent in obj["entities"]}
    vertices = []
    for tok in sorted(obj["tokens"], key=lambda t: int(t["i"])):
        word = str(tok["word"])
        lemma = str(tok["lemma"])
        if entity_blinding and int(tok["i"]) in entity_vertices:
            word = BLINDED_TOKEN
            lemma = BLINDED_TOKEN
        vertices.append(
            (
                int(tok["i"]),
                TokenFeatures(
                    word=word,
                    lemma=lemma,
                    pos=str(tok["pos"]),
                    gpos=str(tok["gpos"]),
                    caps=caps_category(word),
                ),
            )
        )

    edges = [Edge(int(e["head"]), int(e["dep"]), str(e["label"])) for e in obj["edges"]]
    if symmetrize_edges:
        edges.extend(Edge(e.dependent, e.head, e.label + "-rev") for e in list(edges))

    mentions = tuple(
        EntityMention(str(ent["id"]), int(ent["token"])) for ent in obj["entities"]
    )
    pair_labels = tuple(
        (str(p["e1"]), str(p["e2"]), int(p["label"])) for p in obj.get("pairs", ())
    )
    return SentenceGraph(
        doc_id=str(obj["doc_id"]),
        sent_id=str(obj["sent_id"]),
        vertices=tuple(vertices),
        edges=tuple(edges),
        entity_mentions=mentions,
        pair_labels=pair_labels,
    )


def sentence_to_json(sentence: SentenceGraph) -> dict:
    obj = {
        "doc_id": sentence.doc_id,
        "sent_id": sentence.sent_id,
        "tokens": [
            {"i": i, "word": f.word, "lemma": f.lemma, "pos": f.pos, "gpos": f.gpos}
            for i, f in sentence.vertices
        ],
        "edges": [
            {"head": e.head, "dep": e.dependent, "label": e.label}
            for e in sentence.edges
        ],
        "entities": [
            {"id": m.entity_id, "token": m.vertex} for m in sentence.entity_mentions
        ],
    }
    if sentence.pair_labels:
        obj["pairs"] = [
            {"e1": a, "e2": b, "label": v} for a, b, v in sentence.pair_labels
        ]
    return obj


def load_sentences(
    path: str | Path,
    entity_blinding: bool = False,
    symmetrize_edges: bool = False,
) -> list[SentenceGraph]:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
            try:
                sentences.append(
                    sentence_from_json(
                        obj,
                        entity_blinding=entity_blinding,
                        symmetrize_edges=symmetrize_edges,
                    )
                )
            except (IngestError, KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"line {lineno}: {exc}") from exc
    return sentences


def group_documents(
    sentences: Iterable[SentenceGraph],
) -> tuple[tuple[str, tuple[SentenceGraph, ...]], ...]:
    """Group sentences by doc_id, preserving first-seen document order."""
    order: list[str] = []
    grouped: dict[str, list[SentenceGraph]] = {}
    for s in sentences:
        if s.doc_id not in grouped:
            grouped[s.doc_id] = []
            order.append(s.doc_id)
        grouped[s.doc_id].append(s)
    return tuple((doc_id, tuple(grouped[doc_id])) for doc_id in order)


def load_corpus(
    path: str | Path,
    splits_path: str | Path | None = None,
    entity_blinding: bool = False,
    symmetrize_edges: bool = False,
) -> Corpus:
    sentences = load_sentences(
        path, entity_blinding=entity_blinding, symmetrize_edges=symmetrize_edges
    )
    splits = load_splits(splits_path) if splits_path is not None else None
    return Corpus(documents=group_documents(sentences), splits=splits)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for _, sentences in corpus.documents:
            for s in sentences:
                fh.write(json.dumps(sentence_to_json(s)) + "\n")


def load_splits(path: str | Path) -> tuple[Split, ...]:
    splits = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                splits.append(
                    Split(
                        split_id=int(obj["split"]),
                        train_docs=tuple(str(d) for d in obj["train_docs"]),
                        test_docs=tuple(str(d) for d in obj["test_docs"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"line {lineno}: invalid split record: {exc}") from exc
    return tuple(splits)


def save_splits(splits: Iterable[Split], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in splits:
            fh.write(
                json.dumps(
                    {
                        "split": s.split_id,
                        "train_docs": list(s.train_docs),
                        "test_docs": list(s.test_docs),
                    }
                )
                + "\n"
            )


def corpus_candidates(corpus: Corpus, doc_ids: Iterable[str] | None = None) -> list[Candidate]:
    """All candidates of the given documents (whole corpus by default), in
    document order, sentence order, then mention-pair order."""
    wanted = None if doc_ids is None else list(doc_ids)
    candidates: list[Candidate] = []
    if wanted is None:
        for _, sentences in corpus.documents:
            for s in sentences:
                candidates.extend(generate_candidates(s))
    else:
        for doc_id in wanted:
            for s in corpus.sentences_for(doc_id):
                candidates.extend(generate_candidates(s))
    return candidates
