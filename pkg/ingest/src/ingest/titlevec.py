"""Subword skip-gram title embedder.

Titles are short, so the vocabulary keeps every word by default
(min_count 1) and each word is backed by hashed character n-grams of
its boundary-padded form; a word never seen in training still gets a
vector from its n-grams alone.  Training is skip-gram with negative
sampling in plain numpy: single threaded, updates applied in a fixed
order, all randomness from one seeded generator, so a fixed seed and
input order reproduce the matrices bit for bit.

This is a small-corpus trainer.  It is sized for a few thousand short
titles per run, not for general text corpora.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from typing import Sequence

import numpy as np

from axiobench import InputError
from axiobench.textops import tokenize

from ingest.config import TitleTrainConfig

log = logging.getLogger(__name__)

_MIN_LR_FRACTION = 1e-4


def subwords(word: str, min_n: int, max_n: int) -> list[str]:
    """Character n-grams of the boundary-padded word, shortest first."""
    padded = f"<{word}>"
    grams = []
    for n in range(min_n, max_n + 1):
        grams.extend(padded[i:i + n] for i in range(len(padded) - n + 1))
    return grams


def _bucket(gram: str, buckets: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % buckets


class TitleModel:
    """A trained title space: vocabulary rows plus hashed n-gram rows."""

    def __init__(self, config: TitleTrainConfig, vocab: dict[str, int], input_mat: np.ndarray):
        self.config = config
        self.vocab = vocab
        self.input_mat = input_mat

    def _word_rows(self, word: str) -> np.ndarray:
        rows = []
        if word in self.vocab:
            rows.append(self.vocab[word])
        offset = len(self.vocab)
        rows.extend(
            offset + _bucket(g, self.config.buckets)
            for g in subwords(word, self.config.min_n, self.config.max_n)
        )
        return np.asarray(rows, dtype=np.int64)

    def word_vector(self, word: str) -> np.ndarray:
        return self.input_mat[self._word_rows(word)].mean(axis=0)

    def title_vector(self, title: str) -> np.ndarray:
        """Mean of the normalized word vectors of the title's tokens."""
        tokens = tokenize(title)
        if not tokens:
            raise InputError(f"cannot embed title with no usable tokens: {title!r}")
        vecs = []
        for tok in tokens:
            v = self.word_vector(tok)
            norm = float(np.linalg.norm(v))
            if norm == 0.0:
                raise InputError(f"degenerate vector for title token {tok!r}")
            vecs.append(v / norm)
        return np.mean(vecs, axis=0)


def train_titles(titles: Sequence[str], config: TitleTrainConfig) -> TitleModel:
    """Train the title space on tokenized titles, in the given order."""
    sentences = [tokenize(t) for t in titles]
    counts: Counter[str] = Counter(w for s in sentences for w in s)
    vocab_words = sorted(w for w, c in counts.items() if c >= config.min_count)
    if not vocab_words:
        raise InputError("title trainer: vocabulary is empty")
    vocab = {w: i for i, w in enumerate(vocab_words)}
    indexed = [
        np.asarray([vocab[w] for w in s if w in vocab], dtype=np.int64)
        for s in sentences
    ]
    indexed = [s for s in indexed if s.size]
    if not indexed:
        raise InputError("title trainer: no trainable titles")

    rng = np.random.default_rng(config.seed)
    n_rows = len(vocab) + config.buckets
    bound = 0.5 / config.dim
    input_mat = rng.uniform(-bound, bound, size=(n_rows, config.dim))
    output_mat = np.zeros((len(vocab), config.dim))
    model = TitleModel(config, vocab, input_mat)
    sub_rows = [model._word_rows(w) for w in vocab_words]

    # Negative sampling follows the unigram distribution raised to 0.75.
    weights = np.array([counts[w] for w in vocab_words], dtype=np.float64) ** 0.75
    cum = np.cumsum(weights)
    total_steps = config.epochs * sum(s.size for s in indexed)
    processed = 0

    for _ in range(config.epochs):
        for sent in indexed:
            n = sent.size
            for pos in range(n):
                center = int(sent[pos])
                lr = config.lr * max(_MIN_LR_FRACTION, 1.0 - processed / total_steps)
                processed += 1
                b = int(rng.integers(1, config.window + 1))
                lo, hi = max(0, pos - b), min(n, pos + b + 1)
                if hi - lo <= 1:
                    continue
                rows = sub_rows[center]
                for ctx_pos in range(lo, hi):
                    if ctx_pos == pos:
                        continue
                    target = int(sent[ctx_pos])
                    hidden = input_mat[rows].mean(axis=0)
                    grad = np.zeros(config.dim)
                    negatives = np.searchsorted(
                        cum, rng.random(config.negatives) * cum[-1]
                    )
                    for out_row, label in [(target, 1.0)] + [
                        (int(neg), 0.0) for neg in negatives if int(neg) != target
                    ]:
                        score = 1.0 / (1.0 + np.exp(-float(hidden @ output_mat[out_row])))
                        g = lr * (label - score)
                        grad += g * output_mat[out_row]
                        output_mat[out_row] += g * hidden
                    np.add.at(input_mat, rows, grad / rows.size)

    log.info(
        "title space trained: %d words, %d titles, dim %d",
        len(vocab),
        len(indexed),
        config.dim,
    )
    return model
