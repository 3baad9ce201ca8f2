"""Text utilities: tokenization, sentence splitting, TF-IDF matching,
ROUGE overlap scores, and small statistics helpers.

Everything here is deterministic and dependency-free apart from numpy.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from axiobench.util import InputError

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[0-9a-z]+")

# Trailing strings that end with a period but do not end a sentence.
_ABBREVIATIONS = (
    "e.g.",
    "i.e.",
    "et al.",
    "cf.",
    "vs.",
    "Fig.",
    "Figs.",
    "Eq.",
    "Sec.",
    "Tab.",
    "No.",
    "resp.",
)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop tokens shorter
    than two characters."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


def split_sentences(text: str) -> list[str]:
    """Split text into sentences.

    A boundary is a terminator in ``.!?`` followed by whitespace and then
    an uppercase letter or a digit.  Terminators that complete a known
    abbreviation (``e.g.``, ``Fig.``, ...) never end a sentence.
    """
    if not text or not text.strip():
        raise InputError("cannot split empty text into sentences")
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in ".!?":
            j = i + 1
            if j < n and text[j].isspace():
                k = j
                while k < n and text[k].isspace():
                    k += 1
                nxt = text[k] if k < n else ""
                if (nxt.isupper() or nxt.isdigit()) and not _ends_with_abbreviation(text, i):
                    piece = text[start:i + 1].strip()
                    if piece:
                        sentences.append(piece)
                    start = k
                    i = k
                    continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _ends_with_abbreviation(text: str, dot_index: int) -> bool:
    if text[dot_index] != ".":
        return False
    head = text[:dot_index + 1]
    return any(head.endswith(abbr) for abbr in _ABBREVIATIONS)


@dataclass(frozen=True)
class TfidfModel:
    """Smoothed TF-IDF over a fixed document collection.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1, so every idf is >= 1.
    Document vectors are L2-normalized sparse maps term-index -> weight.
    """

    ids: tuple[str, ...]
    vocab: Mapping[str, int]
    idf: np.ndarray
    vectors: Mapping[str, Mapping[int, float]]


def tfidf_fit(docs: Sequence[str], ids: Sequence[str] | None = None) -> TfidfModel:
    if ids is None:
        ids = [str(i) for i in range(len(docs))]
    if len(ids) != len(docs):
        raise InputError(f"got {len(docs)} documents but {len(ids)} ids")
    if len(set(ids)) != len(ids):
        dupes = sorted({d for d in ids if list(ids).count(d) > 1})
        raise InputError(f"duplicate document id {dupes[0]!r}")
    tokenized = [tokenize(d) for d in docs]
    vocab: dict[str, int] = {}
    for toks in tokenized:
        for t in sorted(set(toks)):
            if t not in vocab:
                vocab[t] = len(vocab)
    df = np.zeros(len(vocab), dtype=np.float64)
    for toks in tokenized:
        for t in set(toks):
            df[vocab[t]] += 1.0
    n_docs = float(len(docs))
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    vectors: dict[str, dict[int, float]] = {}
    for doc_id, toks in zip(ids, tokenized):
        vectors[doc_id] = _weigh(Counter(toks), vocab, idf)
    return TfidfModel(ids=tuple(ids), vocab=vocab, idf=idf, vectors=vectors)


def _weigh(tf: Counter, vocab: Mapping[str, int], idf: np.ndarray) -> dict[int, float]:
    vec = {vocab[t]: c * idf[vocab[t]] for t, c in tf.items() if t in vocab}
    norm = math.sqrt(sum(w * w for w in vec.values()))
    if norm == 0.0:
        return {}
    return {k: w / norm for k, w in vec.items()}


def tfidf_vector(model: TfidfModel, text: str) -> dict[int, float]:
    """Project arbitrary text into the model's space (unknown terms are
    dropped).  Returns an L2-normalized sparse vector, possibly empty."""
    return _weigh(Counter(tokenize(text)), model.vocab, model.idf)


def _sparse_dot(a: Mapping[int, float], b: Mapping[int, float]) -> float:
    if len(b) < len(a):
        a, b = b, a
    return sum(w * b[k] for k, w in a.items() if k in b)


def tfidf_nearest(model: TfidfModel, query_text: str, candidate_ids: Sequence[str]) -> str:
    """Return the candidate document most cosine-similar to the query.

    Zero-vector candidates are not comparable and are ignored; ties are
    broken toward the lexicographically smallest id.
    """
    if not candidate_ids:
        raise InputError("no candidate documents given")
    for cid in candidate_ids:
        if cid not in model.vectors:
            raise InputError(f"candidate id {cid!r} is not in the fitted collection")
    query = tfidf_vector(model, query_text)
    best_id: str | None = None
    best_sim = -1.0
    for cid in sorted(set(candidate_ids)):
        vec = model.vectors[cid]
        if not vec:
            continue
        sim = _sparse_dot(query, vec)
        if sim > best_sim:
            best_sim = sim
            best_id = cid
    if best_id is None:
        raise InputError("no comparable candidates (every candidate has a zero vector)")
    return best_id


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: str, reference: str, n: int) -> float:
    """ROUGE-N F1 with clipped n-gram counts."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    cand = _ngrams(tokenize(candidate), n)
    ref = _ngrams(tokenize(reference), n)
    total_c = sum(cand.values())
    total_r = sum(ref.values())
    if total_c == 0 or total_r == 0:
        log.warning("rouge_%d: a side has no %d-grams, returning 0.0", n, n)
        return 0.0
    overlap = sum(min(c, ref[g]) for g, c in cand.items())
    return _f1(overlap / total_c, overlap / total_r)


def rouge_l(candidate: str, reference: str) -> float:
    """ROUGE-L F1 from the token-level longest common subsequence."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        log.warning("rouge_l: a side has no tokens, returning 0.0")
        return 0.0
    lcs = _lcs_length(cand, ref)
    return _f1(lcs / len(cand), lcs / len(ref))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two dense vectors; rejects zero vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise InputError(f"shape mismatch: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        raise InputError("cosine similarity undefined for a zero vector")
    return float(np.dot(u, v)) / (nu * nv)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation; errors on mismatched lengths, fewer than two
    points, or a constant series."""
    if len(xs) != len(ys):
        raise InputError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise InputError("pearson needs at least two points")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(np.dot(dx, dx)))
    sy = math.sqrt(float(np.dot(dy, dy)))
    if sx == 0.0 or sy == 0.0:
        raise InputError("pearson undefined for a constant series")
    return float(np.dot(dx, dy)) / (sx * sy)


def zscore(values: Sequence[float], mean: float, std: float) -> list[float]:
    """Standardize values against a given (population) mean and std."""
    if std == 0.0:
        raise InputError("degenerate scale: standard deviation is zero")
    return [(float(v) - mean) / std for v in values]
