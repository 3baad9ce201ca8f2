"""Rephrase generation for the paraphrase-invariance check.

Each focal paper gets exactly one rephrase of its title plus abstract,
requested from a chat-completions endpoint.  The filled text is written
back into the manifest registry so the embedding stage can treat a
rephrase like any other document.  A quality report records ROUGE
overlap and embedding cosine between each source and its rephrase.

Failure handling is graceful by design: an endpoint that keeps erroring,
an empty response, or a response that merely echoes the input leaves
the registry entry blank.  The engine then skips that focal's rephrase
check instead of scoring a bogus comparison.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from axiobench.corpus import KIND_REPHRASE, Corpus, Manifest, RegistryEntry
from axiobench.textops import cosine_similarity, rouge_l, rouge_n

from ingest.config import IngestConfig
from ingest.embed import abstract_text
from ingest.net import HttpError, JsonClient

log = logging.getLogger(__name__)

REPHRASE_PROMPT = (
    "You are given a research paper excerpt. Your task is deep paraphrase — not "
    "surface substitution.\n"
    "\n"
    "Process:\n"
    "1. Internalize the full meaning: key claims, methods, results, and reasoning.\n"
    "2. Set aside the original text mentally.\n"
    "3. Rewrite from scratch in your own voice, as a knowledgeable author.\n"
    "\n"
    "Requirements:\n"
    "- Actively restructure sentences and paragraphs\n"
    "- Use entirely different vocabulary and syntax\n"
    "- No phrase over 4 words should match the original\n"
    "- Flip voice (active <-> passive) where natural\n"
    "- Technical proper nouns may remain unchanged\n"
    "\n"
    "Output only the rewritten text."
)

# A response with total unigram overlap is an echo, not a paraphrase;
# it gets retried and, if the model keeps echoing, dropped.
_ECHO_THRESHOLD = 1.0 - 1e-12


@dataclass(frozen=True)
class RephraseOutcome:
    variant_id: str
    base_id: str
    attempts: int
    failed: bool
    reason: str = ""
    rouge1: float | None = None
    rouge2: float | None = None
    rouge_l: float | None = None
    cosine: float | None = None


@dataclass(frozen=True)
class RephraseReport:
    model: str
    encoder: str
    outcomes: tuple[RephraseOutcome, ...]
    skipped_existing: int

    @property
    def succeeded(self) -> tuple[RephraseOutcome, ...]:
        return tuple(o for o in self.outcomes if not o.failed)

    def mean(self, field_name: str) -> float | None:
        values = [getattr(o, field_name) for o in self.succeeded]
        if not values:
            return None
        return float(np.mean(values))

    def to_doc(self) -> dict:
        return {
            "model": self.model,
            "encoder": self.encoder,
            "total": len(self.outcomes) + self.skipped_existing,
            "filled": len(self.succeeded),
            "skipped_existing": self.skipped_existing,
            "failed": [
                {"variant_id": o.variant_id, "reason": o.reason, "attempts": o.attempts}
                for o in self.outcomes
                if o.failed
            ],
            "means": {
                "rouge1": self.mean("rouge1"),
                "rouge2": self.mean("rouge2"),
                "rouge_l": self.mean("rouge_l"),
                "cosine": self.mean("cosine"),
            },
            "outcomes": [
                {
                    "variant_id": o.variant_id,
                    "base_id": o.base_id,
                    "attempts": o.attempts,
                    "failed": o.failed,
                    "reason": o.reason,
                    "rouge1": o.rouge1,
                    "rouge2": o.rouge2,
                    "rouge_l": o.rouge_l,
                    "cosine": o.cosine,
                }
                for o in self.outcomes
            ],
        }


def make_chat_client(config: IngestConfig) -> JsonClient:
    headers = {"Authorization": f"Bearer {config.chat_key}"} if config.chat_key else {}
    return JsonClient(
        config.chat_endpoint,
        headers=headers,
        retries=config.retries,
        backoff=config.backoff,
        timeout=config.timeout,
    )


def request_rephrase(client: JsonClient, model: str, excerpt: str) -> str:
    """One chat call; returns the raw completion text."""
    payload = {
        "model": model,
        "messages": [
            {"role": "system", "content": REPHRASE_PROMPT},
            {"role": "user", "content": excerpt},
        ],
    }
    doc = client.post("v1/chat/completions", payload)
    try:
        return str(doc["choices"][0]["message"]["content"])
    except (KeyError, IndexError, TypeError):
        raise HttpError("chat response has no message content") from None


def excerpt_for(title: str, abstract: str) -> str:
    """The text handed to the model: title as its own sentence, then the
    abstract."""
    t = title.strip()
    if t and t[-1] not in ".!?":
        t += "."
    parts = [p for p in (t, abstract.strip()) if p]
    return "\n\n".join(parts)


def generate_rephrases(
    manifest: Manifest,
    corpus: Corpus,
    config: IngestConfig,
    encoder: Callable[[str], np.ndarray],
    client: JsonClient | None = None,
) -> RephraseReport:
    """Fill every blank rephrase entry in the manifest registry.

    Entries that already carry text are left alone, so rerunning after a
    partial failure only retries the gaps.  The manifest is mutated in
    place; the caller decides when to save it.
    """
    if client is None:
        if not config.chat_endpoint:
            raise HttpError("no chat endpoint configured")
        client = make_chat_client(config)

    outcomes: list[RephraseOutcome] = []
    skipped = 0
    for vid in sorted(manifest.registry):
        entry = manifest.registry[vid]
        if entry.kind != KIND_REPHRASE:
            continue
        if entry.text.strip():
            skipped += 1
            continue
        base = corpus.get(entry.base_id)
        outcome, text = _rephrase_one(client, config, entry, base.title, base.abstract, encoder)
        if not outcome.failed:
            manifest.registry[vid] = RegistryEntry(
                variant_id=entry.variant_id,
                kind=entry.kind,
                base_id=entry.base_id,
                text=text,
            )
        outcomes.append(outcome)

    report = RephraseReport(
        model=config.chat_model,
        encoder=config.abstract_model,
        outcomes=tuple(outcomes),
        skipped_existing=skipped,
    )
    failed = [o for o in outcomes if o.failed]
    if failed:
        log.warning(
            "%d of %d rephrases failed; their check will be skipped downstream",
            len(failed),
            len(outcomes),
        )
    return report


def _rephrase_one(
    client: JsonClient,
    config: IngestConfig,
    entry: RegistryEntry,
    title: str,
    abstract: str,
    encoder: Callable[[str], np.ndarray],
) -> tuple[RephraseOutcome, str]:
    excerpt = excerpt_for(title, abstract)
    source = abstract_text(title, abstract)
    reason = "no attempts"
    attempts = 0
    for attempts in range(1, config.retries + 2):
        try:
            text = request_rephrase(client, config.chat_model, excerpt)
        except HttpError as exc:
            reason = f"endpoint: {exc}"
            log.warning("rephrase %r attempt %d failed: %s", entry.variant_id, attempts, exc)
            continue
        if not text.strip():
            reason = "empty response"
            continue
        r1 = rouge_n(text, source, 1)
        if r1 >= _ECHO_THRESHOLD:
            reason = "echo of the source"
            continue
        outcome = RephraseOutcome(
            variant_id=entry.variant_id,
            base_id=entry.base_id,
            attempts=attempts,
            failed=False,
            rouge1=r1,
            rouge2=rouge_n(text, source, 2),
            rouge_l=rouge_l(text, source),
            cosine=cosine_similarity(encoder(source), encoder(text)),
        )
        return outcome, text
    outcome = RephraseOutcome(
        variant_id=entry.variant_id,
        base_id=entry.base_id,
        attempts=attempts,
        failed=True,
        reason=reason,
    )
    return outcome, ""
