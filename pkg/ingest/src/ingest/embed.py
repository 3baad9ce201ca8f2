"""Embedding computation for both spaces.

The abstract space embeds the concatenation "title. abstract" of each
original paper, the filled text of each rephrase, and the modified
abstract of each coverage host.  Self copies are textually identical to
their base document, so they never get a vector of their own; the
engine resolves them through the base id.

The abstract encoder is pluggable.  "hash-v1" is a built-in
deterministic bag-of-words encoder that canonicalizes common research
prose synonyms and inflections before hashing, so a paraphrase lands
near its source without network access or model weights.  Any other
model id is served by an embeddings endpoint.

The title space comes from the subword title embedder, trained once per
run on every corpus title plus the rephrased focal titles, then applied
to the documents the evaluation run needs.  Coverage hosts modify
abstracts only and are never embedded in the title space.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from axiobench import InputError
from axiobench.bench import Plan, required_embeddings
from axiobench.corpus import (
    KIND_COVERAGE,
    KIND_ORIGINAL,
    KIND_REPHRASE,
    KIND_SELF_COPY,
    SPACE_ABSTRACT,
    SPACE_TITLE,
    Corpus,
    EmbeddingSet,
    Manifest,
    ValidationReport,
    validate_manifest,
)
from axiobench.textops import split_sentences, tokenize

from ingest.config import IngestConfig
from ingest.net import JsonClient
from ingest.titlevec import train_titles

log = logging.getLogger(__name__)

HASH_MODEL = "hash-v1"

_BATCH_SIZE = 64

# Synonym families the hash encoder collapses to one class.  Groups are
# matched on stemmed forms, so inflection variants fold in as well.
SYNONYM_GROUPS: tuple[tuple[str, ...], ...] = (
    ("method", "approach", "technique", "procedure", "strategy", "scheme"),
    ("propose", "present", "introduce", "describe", "offer"),
    ("show", "demonstrate", "reveal", "establish", "confirm"),
    ("improve", "enhance", "boost", "strengthen", "refine"),
    ("result", "outcome", "finding"),
    ("use", "employ", "utilize", "apply", "leverage", "adopt"),
    ("novel", "new", "original", "fresh"),
    ("important", "significant", "crucial", "central"),
    ("evaluate", "assess", "measure", "examine"),
    ("model", "system", "framework", "architecture"),
    ("performance", "accuracy", "effectiveness", "quality"),
    ("dataset", "corpus", "benchmark", "collection"),
    ("large", "big", "substantial", "extensive", "broad"),
    ("task", "problem", "challenge", "objective"),
    ("analysis", "study", "investigation", "exploration"),
    ("feature", "attribute", "characteristic", "property"),
    ("achieve", "attain", "reach", "obtain", "deliver"),
    ("robust", "reliable", "stable", "consistent"),
    ("reduce", "decrease", "lower", "shrink"),
    ("combine", "merge", "fuse", "integrate", "unify"),
    ("generate", "produce", "create", "construct", "build"),
    ("prior", "previous", "earlier", "past", "existing"),
    ("fast", "quick", "rapid", "efficient", "speedy"),
    ("learn", "train", "optimize", "fit"),
)

_SUFFIXES = ("ing", "ed", "es", "s", "ly")
_MIN_STEM = 3


def stem(token: str) -> str:
    """Strip one common inflection suffix, keeping at least three
    characters so short words survive unchanged."""
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= _MIN_STEM:
            return token[: -len(suffix)]
    return token


def _build_class_map() -> dict[str, str]:
    mapping: dict[str, str] = {}
    for group in SYNONYM_GROUPS:
        head = stem(group[0])
        for member in group:
            s = stem(member)
            if s in mapping and mapping[s] != head:
                raise InputError(f"synonym groups overlap on stem {s!r}")
            mapping[s] = head
    return mapping


_CLASS_MAP = _build_class_map()


def token_class(token: str) -> str:
    s = stem(token)
    return _CLASS_MAP.get(s, s)


class HashEncoder:
    """Deterministic bag-of-words encoder.

    Each token contributes a class direction (its synonym class, heavy
    weight) and a surface direction (the exact token, light weight), so
    texts that say the same thing with swapped synonyms stay close
    while genuinely different texts drift apart.  Directions come from
    seeded draws keyed by a stable hash of the term, so vectors are
    identical across runs and machines.
    """

    def __init__(self, dim: int = 256, class_weight: float = 1.0, surface_weight: float = 0.55):
        if dim < 8:
            raise InputError("hash encoder needs dim >= 8")
        self.dim = dim
        self.class_weight = class_weight
        self.surface_weight = surface_weight
        self._basis: dict[str, np.ndarray] = {}

    def _direction(self, term: str) -> np.ndarray:
        vec = self._basis.get(term)
        if vec is None:
            digest = hashlib.blake2b(term.encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            vec = rng.standard_normal(self.dim)
            self._basis[term] = vec
        return vec

    def encode(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            raise InputError(f"cannot embed text with no usable tokens: {text[:60]!r}")
        acc = np.zeros(self.dim)
        for token, count in sorted(Counter(tokens).items()):
            acc += (count * self.class_weight) * self._direction("c:" + token_class(token))
            acc += (count * self.surface_weight) * self._direction("s:" + token)
        norm = float(np.linalg.norm(acc))
        if norm == 0.0:
            raise InputError("degenerate embedding (zero vector)")
        return acc / norm

    def encode_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.encode(t) for t in texts]


class HttpEncoder:
    """Abstract-space encoder served by an embeddings endpoint."""

    def __init__(self, client: JsonClient, model: str):
        self.client = client
        self.model = model

    def encode_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for start in range(0, len(texts), _BATCH_SIZE):
            batch = list(texts[start:start + _BATCH_SIZE])
            doc = self.client.post("v1/embeddings", {"model": self.model, "input": batch})
            try:
                items = sorted(doc["data"], key=lambda d: d["index"])
                vectors = [np.asarray(d["embedding"], dtype=np.float64) for d in items]
            except (KeyError, TypeError):
                raise InputError("embeddings endpoint returned a malformed response") from None
            if len(vectors) != len(batch):
                raise InputError(
                    f"embeddings endpoint returned {len(vectors)} vectors for "
                    f"{len(batch)} inputs"
                )
            out.extend(vectors)
        return out

    def encode(self, text: str) -> np.ndarray:
        return self.encode_batch([text])[0]


def make_encoder(config: IngestConfig):
    if config.embed_endpoint:
        headers = {"Authorization": f"Bearer {config.embed_key}"} if config.embed_key else {}
        client = JsonClient(
            config.embed_endpoint,
            headers=headers,
            retries=config.retries,
            backoff=config.backoff,
            timeout=config.timeout,
        )
        return HttpEncoder(client, config.abstract_model)
    if config.abstract_model == HASH_MODEL:
        return HashEncoder(config.abstract_dim)
    raise InputError(
        f"abstract model {config.abstract_model!r} needs an embed_endpoint "
        f"(only {HASH_MODEL!r} runs locally)"
    )


def abstract_text(title: str, abstract: str) -> str:
    """The document text the abstract space embeds for an original
    paper: title and abstract joined into one passage."""
    t, a = title.strip(), abstract.strip()
    if t and a:
        return f"{t}. {a}"
    return t or a


def rephrase_title(text: str) -> str:
    """The title of a rephrased excerpt: its first sentence.  The
    rephrase rewrites title plus abstract as one passage, so the
    leading sentence plays the title's role in the title space."""
    return split_sentences(text)[0]


@dataclass(frozen=True)
class EmbedReport:
    validation: ValidationReport
    counts: Mapping[str, int]
    unembeddable: tuple[tuple[str, str], ...]

    @property
    def ok(self) -> bool:
        return self.validation.ok


def _abstract_text_for(entry_kind: str, vid: str, corpus: Corpus, manifest: Manifest) -> str:
    entry = manifest.registry[vid]
    if entry_kind == KIND_ORIGINAL:
        p = corpus.get(vid)
        return abstract_text(p.title, p.abstract)
    if entry_kind in (KIND_REPHRASE, KIND_COVERAGE):
        return entry.text
    raise InputError(f"no abstract text rule for kind {entry_kind!r}")


def _title_text_for(entry_kind: str, vid: str, corpus: Corpus, manifest: Manifest) -> str:
    if entry_kind == KIND_ORIGINAL:
        return corpus.get(vid).title
    if entry_kind == KIND_REPHRASE:
        text = manifest.registry[vid].text
        return rephrase_title(text) if text.strip() else ""
    raise InputError(f"no title text rule for kind {entry_kind!r}")


def embed_all(
    corpus: Corpus,
    plan: Plan,
    manifest: Manifest,
    config: IngestConfig,
    encoder=None,
) -> tuple[dict[str, EmbeddingSet], EmbedReport]:
    """Compute every embedding the evaluation run will resolve.

    Returns the embedding sets keyed by space plus a report whose
    validation section lists any (document, space) pair that is still
    unresolvable, blank rephrases being the expected cause.
    """
    if encoder is None:
        encoder = make_encoder(config)
    required = sorted(required_embeddings(corpus, plan))
    for vid, space in required:
        if vid not in manifest.registry:
            raise InputError(f"required document {vid!r} is missing from the manifest")

    unembeddable: list[tuple[str, str]] = []
    sets: dict[str, EmbeddingSet] = {}
    counts: dict[str, int] = {}

    abstract_ids = [vid for vid, space in required if space == SPACE_ABSTRACT]
    if abstract_ids:
        ids: list[str] = []
        texts: list[str] = []
        for vid in abstract_ids:
            kind = manifest.registry[vid].kind
            if kind == KIND_SELF_COPY:
                continue
            text = _abstract_text_for(kind, vid, corpus, manifest)
            if not text.strip():
                unembeddable.append((vid, SPACE_ABSTRACT))
                continue
            ids.append(vid)
            texts.append(text)
        emb = EmbeddingSet(SPACE_ABSTRACT, {})
        for vid, vec in zip(ids, encoder.encode_batch(texts)):
            emb.add(vid, vec)
        sets[SPACE_ABSTRACT] = emb
        counts[SPACE_ABSTRACT] = len(emb)

    title_ids = [vid for vid, space in required if space == SPACE_TITLE]
    if title_ids:
        model = train_titles(_training_titles(corpus, manifest), config.title)
        emb = EmbeddingSet(SPACE_TITLE, {})
        for vid in title_ids:
            kind = manifest.registry[vid].kind
            if kind == KIND_SELF_COPY:
                continue
            title = _title_text_for(kind, vid, corpus, manifest)
            if not title.strip() or not tokenize(title):
                unembeddable.append((vid, SPACE_TITLE))
                continue
            emb.add(vid, model.title_vector(title))
        sets[SPACE_TITLE] = emb
        counts[SPACE_TITLE] = len(emb)

    validation = validate_manifest(manifest, required, sets)
    if unembeddable:
        log.warning(
            "%d documents had no usable text for a required space", len(unembeddable)
        )
    return sets, EmbedReport(
        validation=validation,
        counts=counts,
        unembeddable=tuple(sorted(unembeddable)),
    )


def _training_titles(corpus: Corpus, manifest: Manifest) -> list[str]:
    """Training stream for the title space: every corpus title in file
    order, then the rephrased focal titles in registry order."""
    titles = [p.title for p in corpus if p.title.strip()]
    for vid in sorted(manifest.registry):
        entry = manifest.registry[vid]
        if entry.kind == KIND_REPHRASE and entry.text.strip():
            first = rephrase_title(entry.text)
            if first.strip():
                titles.append(first)
    return titles
