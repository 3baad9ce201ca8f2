"""Corpus, embedding, and manifest file handling.

File formats (all UTF-8):
  corpus      JSONL, one paper per line:
              {"id", "title", "abstract", "year", "task", "refs", "is_reference_only"}
  embeddings  JSONL, one vector per line, one file per space:
              {"id", "space", "vector": [...]}
  manifest    single JSON document tying a corpus to its embedding files and
              the registry of synthetic variant documents.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from axiobench.util import InputError, atomic_write, dumps_canonical, read_json, read_jsonl

SPACE_ABSTRACT = "abstract-embed"
SPACE_TITLE = "title-embed"
SPACES = (SPACE_ABSTRACT, SPACE_TITLE)

KIND_ORIGINAL = "original"
KIND_SELF_COPY = "self_copy"
KIND_REPHRASE = "rephrase"
KIND_COVERAGE = "coverage_chunk_host"
KINDS = (KIND_ORIGINAL, KIND_SELF_COPY, KIND_REPHRASE, KIND_COVERAGE)

_MIN_YEAR = 1900


@dataclass(frozen=True)
class TaskSpec:
    """A benchmark task: its domain and the designated distant task used
    for cross-domain comparisons.  The distant task must live in a
    different domain."""

    task: str
    domain: str
    distant_task: str
    distant_domain: str

    def __post_init__(self) -> None:
        if self.domain == self.distant_domain:
            raise InputError(
                f"task {self.task!r}: distant task {self.distant_task!r} must "
                f"come from a different domain (both are {self.domain!r})"
            )


@dataclass(frozen=True)
class Paper:
    id: str
    title: str
    abstract: str
    year: int
    task: str
    refs: tuple[str, ...]
    is_reference_only: bool = False

    def __post_init__(self) -> None:
        if not self.id:
            raise InputError("paper id must be non-empty")
        if not isinstance(self.year, int):
            raise InputError(f"paper {self.id!r}: year must be an integer")
        this_year = datetime.date.today().year
        if not (_MIN_YEAR < self.year <= this_year):
            raise InputError(
                f"paper {self.id!r}: year {self.year} outside ({_MIN_YEAR}, {this_year}]"
            )
        if not self.task:
            raise InputError(f"paper {self.id!r}: task must be non-empty")
        if self.id in self.refs:
            raise InputError(f"paper {self.id!r} lists itself as a reference")


class Corpus:
    """An id-keyed collection of papers with per-task indexes."""

    def __init__(self, papers: Sequence[Paper]):
        self._papers: dict[str, Paper] = {}
        self._order: list[str] = []
        for p in papers:
            if p.id in self._papers:
                raise InputError(f"duplicate paper id {p.id!r}")
            self._papers[p.id] = p
            self._order.append(p.id)
        by_task: dict[str, list[str]] = {}
        for pid, p in self._papers.items():
            by_task.setdefault(p.task, []).append(pid)
        self._by_task = {t: tuple(sorted(ids)) for t, ids in by_task.items()}

    def __len__(self) -> int:
        return len(self._papers)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self._papers

    def __iter__(self) -> Iterator[Paper]:
        return (self._papers[pid] for pid in self._order)

    def get(self, paper_id: str) -> Paper:
        try:
            return self._papers[paper_id]
        except KeyError:
            raise InputError(f"unknown paper id {paper_id!r}") from None

    @property
    def tasks(self) -> tuple[str, ...]:
        return tuple(sorted(self._by_task))

    def task_paper_ids(self, task: str) -> tuple[str, ...]:
        """Ids of papers in a task, sorted (independent of file order)."""
        return self._by_task.get(task, ())


def load_corpus(path: str | Path) -> Corpus:
    papers: list[Paper] = []
    for lineno, rec in read_jsonl(path):
        try:
            papers.append(
                Paper(
                    id=str(rec["id"]),
                    title=str(rec.get("title", "")),
                    abstract=str(rec.get("abstract", "")),
                    year=rec["year"],
                    task=str(rec["task"]),
                    refs=tuple(str(r) for r in rec.get("refs", ())),
                    is_reference_only=bool(rec.get("is_reference_only", False)),
                )
            )
        except KeyError as exc:
            raise InputError(f"{path}: line {lineno}: missing field {exc.args[0]!r}") from None
        except InputError as exc:
            raise InputError(f"{path}: line {lineno}: {exc}") from None
    if not papers:
        raise InputError(f"{path}: corpus is empty")
    return Corpus(papers)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    lines = []
    for p in corpus:
        lines.append(
            dumps_canonical(
                {
                    "id": p.id,
                    "title": p.title,
                    "abstract": p.abstract,
                    "year": p.year,
                    "task": p.task,
                    "refs": list(p.refs),
                    "is_reference_only": p.is_reference_only,
                }
            )
        )
    atomic_write(path, "".join(line + "\n" for line in lines))


class EmbeddingSet:
    """All vectors for one embedding space; every vector shares one
    dimensionality and no vector is all-zero."""

    def __init__(self, space: str, vectors: Mapping[str, np.ndarray]):
        self.space = space
        self.dim = 0
        self._vectors: dict[str, np.ndarray] = {}
        for vid, vec in vectors.items():
            self.add(vid, vec)

    def add(self, vector_id: str, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.ndim != 1:
            raise InputError(f"{self.space}: vector for {vector_id!r} is not one-dimensional")
        if vector_id in self._vectors:
            raise InputError(f"{self.space}: duplicate vector id {vector_id!r}")
        if not np.any(vec):
            raise InputError(f"{self.space}: zero vector for id {vector_id!r}")
        if not np.all(np.isfinite(vec)):
            raise InputError(f"{self.space}: non-finite vector for id {vector_id!r}")
        if self.dim == 0:
            self.dim = vec.shape[0]
        elif vec.shape[0] != self.dim:
            raise InputError(
                f"{self.space}: vector for {vector_id!r} has dimension "
                f"{vec.shape[0]}, expected {self.dim}"
            )
        self._vectors[vector_id] = vec

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, vector_id: str) -> bool:
        return vector_id in self._vectors

    def get(self, vector_id: str) -> np.ndarray:
        try:
            return self._vectors[vector_id]
        except KeyError:
            raise InputError(f"{self.space}: no vector for id {vector_id!r}") from None

    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._vectors))


def load_embeddings(path: str | Path, space: str | None = None) -> EmbeddingSet:
    result: EmbeddingSet | None = None
    for lineno, rec in read_jsonl(path):
        try:
            vid = str(rec["id"])
            rec_space = str(rec["space"])
            vec = np.asarray(rec["vector"], dtype=np.float64)
        except KeyError as exc:
            raise InputError(f"{path}: line {lineno}: missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError):
            raise InputError(f"{path}: line {lineno}: vector is not a list of numbers") from None
        if space is not None and rec_space != space:
            raise InputError(
                f"{path}: line {lineno}: space {rec_space!r} does not match expected {space!r}"
            )
        if result is None:
            result = EmbeddingSet(rec_space, {})
        elif rec_space != result.space:
            raise InputError(
                f"{path}: line {lineno}: mixed spaces {result.space!r} and {rec_space!r}"
            )
        try:
            result.add(vid, vec)
        except InputError as exc:
            raise InputError(f"{path}: line {lineno}: {exc}") from None
    if result is None:
        raise InputError(f"{path}: embedding file is empty")
    return result


def save_embeddings(embeddings: EmbeddingSet, path: str | Path) -> None:
    lines = []
    for vid in embeddings.ids():
        vec = embeddings.get(vid)
        lines.append(
            dumps_canonical({"id": vid, "space": embeddings.space, "vector": vec.tolist()})
        )
    atomic_write(path, "".join(line + "\n" for line in lines))


@dataclass(frozen=True)
class RegistryEntry:
    """One document the benchmark needs embedded: either an original
    paper or a synthetic variant derived from one."""

    variant_id: str
    kind: str
    base_id: str
    text: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InputError(f"variant {self.variant_id!r}: unknown kind {self.kind!r}")


@dataclass
class Manifest:
    corpus_path: str
    spaces: dict[str, str] = field(default_factory=dict)
    registry: dict[str, RegistryEntry] = field(default_factory=dict)

    def add_entry(self, entry: RegistryEntry) -> None:
        existing = self.registry.get(entry.variant_id)
        if existing is not None and existing != entry:
            raise InputError(f"conflicting registry entries for {entry.variant_id!r}")
        self.registry[entry.variant_id] = entry


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    doc = {
        "corpus": manifest.corpus_path,
        "spaces": dict(sorted(manifest.spaces.items())),
        "registry": [
            {
                "variant_id": e.variant_id,
                "kind": e.kind,
                "base_id": e.base_id,
                "text": e.text,
            }
            for _, e in sorted(manifest.registry.items())
        ],
    }
    atomic_write(path, json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=1) + "\n")


def load_manifest(path: str | Path) -> Manifest:
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise InputError(f"{path}: manifest must be a JSON object")
    try:
        manifest = Manifest(corpus_path=str(doc["corpus"]), spaces=dict(doc.get("spaces", {})))
        for rec in doc.get("registry", []):
            manifest.add_entry(
                RegistryEntry(
                    variant_id=str(rec["variant_id"]),
                    kind=str(rec["kind"]),
                    base_id=str(rec["base_id"]),
                    text=str(rec.get("text", "")),
                )
            )
    except KeyError as exc:
        raise InputError(f"{path}: registry entry missing field {exc.args[0]!r}") from None
    return manifest


def resolve_vector(
    manifest: Manifest, sets: Mapping[str, EmbeddingSet], space: str, variant_id: str
) -> np.ndarray | None:
    """Find the vector for a variant in a space, or None.

    Self-copy variants are textually identical to their base document, so
    they resolve to the base vector and never need an embedding of their
    own."""
    emb = sets.get(space)
    if emb is None:
        return None
    if variant_id in emb:
        return emb.get(variant_id)
    entry = manifest.registry.get(variant_id)
    if entry is not None and entry.kind == KIND_SELF_COPY and entry.base_id in emb:
        return emb.get(entry.base_id)
    return None


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking that every required (variant, space) pair is
    resolvable against the available embedding files."""

    required: int
    missing: tuple[tuple[str, str], ...]

    @property
    def ok(self) -> bool:
        return not self.missing


def validate_manifest(
    manifest: Manifest,
    required: Iterable[tuple[str, str]],
    sets: Mapping[str, EmbeddingSet],
) -> ValidationReport:
    pairs = sorted(set(required))
    missing = [
        (vid, space)
        for vid, space in pairs
        if resolve_vector(manifest, sets, space, vid) is None
    ]
    return ValidationReport(required=len(pairs), missing=tuple(missing))
