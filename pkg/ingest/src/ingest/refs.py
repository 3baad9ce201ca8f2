"""Reference retrieval and attachment.

References are fetched for focal papers only, from a paginated HTTP API
shaped like the Semantic Scholar graph endpoint
(``paper/arXiv:{id}/references``).  Fetched references become
reference-only corpus papers so the engine can pull them into the focal
pool by publication year; references already present in the archive are
linked by id instead of duplicated.

A focal paper whose references cannot be retrieved is logged and kept:
its reference-dependent checks will be skipped downstream, which is the
honest outcome, while every other check still runs.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from axiobench import InputError
from axiobench.corpus import Paper

from ingest.config import IngestConfig
from ingest.net import HttpError, JsonClient

log = logging.getLogger(__name__)

_PAGE_SIZE = 100
_MAX_PAGES = 50
_FIELDS = "title,abstract,year,externalIds"

# After this many focal fetches in a row fail outright, the endpoint is
# considered down and the build aborts instead of logging its way
# through every remaining focal.
_MAX_CONSECUTIVE_FAILURES = 5


@dataclass(frozen=True)
class Reference:
    """One fetched reference, keyed the way the corpus will know it."""

    ref_id: str
    title: str
    abstract: str
    year: int | None


@dataclass
class RefsStats:
    focals: int = 0
    failed_focals: int = 0
    new_papers: int = 0
    linked_existing: int = 0
    dropped: int = 0
    total_refs: int = 0


def make_client(config: IngestConfig) -> JsonClient:
    headers = {"x-api-key": config.refs_key} if config.refs_key else {}
    return JsonClient(
        config.refs_endpoint,
        headers=headers,
        interval=config.refs_interval,
        retries=config.retries,
        backoff=config.backoff,
        timeout=config.timeout,
    )


def fetch_references(client: JsonClient, paper_id: str) -> list[Reference]:
    """All references of one paper, following pagination.

    Raises HttpError when the service keeps failing; returns an empty
    list when the service does not know the paper at all.
    """
    refs: list[Reference] = []
    offset = 0
    for _ in range(_MAX_PAGES):
        try:
            page = client.get(
                f"paper/arXiv:{paper_id}/references",
                {"fields": _FIELDS, "offset": offset, "limit": _PAGE_SIZE},
            )
        except HttpError as exc:
            if exc.status == 404:
                log.warning("references: %r unknown to the reference service", paper_id)
                return []
            raise
        if not isinstance(page, dict):
            raise HttpError(f"references for {paper_id!r}: malformed page")
        for item in page.get("data", []):
            ref = _parse_reference(item)
            if ref is not None:
                refs.append(ref)
        nxt = page.get("next")
        if nxt is None:
            return refs
        offset = int(nxt)
    log.warning("references: pagination for %r cut off after %d pages", paper_id, _MAX_PAGES)
    return refs


def _parse_reference(item: object) -> Reference | None:
    if not isinstance(item, dict):
        return None
    cited = item.get("citedPaper")
    if not isinstance(cited, dict):
        return None
    external = cited.get("externalIds") or {}
    arxiv = str(external.get("ArXiv") or "").strip()
    if arxiv:
        ref_id = arxiv
    elif cited.get("paperId"):
        ref_id = f"s2:{cited['paperId']}"
    else:
        return None
    year = cited.get("year")
    return Reference(
        ref_id=ref_id,
        title=str(cited.get("title") or ""),
        abstract=str(cited.get("abstract") or ""),
        year=year if isinstance(year, int) else None,
    )


def attach_references(
    papers: Sequence[Paper],
    focals: Mapping[str, Sequence[str]],
    client: JsonClient,
    stats: RefsStats | None = None,
) -> list[Paper]:
    """Fetch references for every focal and fold them into the corpus.

    Returns the full paper list: archive papers (focals now carrying
    their reference ids) followed by newly created reference-only
    papers.  A reference without an id, a publication year, or any text
    cannot take part in pool construction and is dropped with a log
    line; the focal itself is always kept.
    """
    stats = stats if stats is not None else RefsStats()
    by_id = {p.id: p for p in papers}
    new_refs: dict[str, Paper] = {}
    focal_refs: dict[str, tuple[str, ...]] = {}
    consecutive_failures = 0

    for task in sorted(focals):
        for focal_id in focals[task]:
            focal = by_id.get(focal_id)
            if focal is None:
                raise InputError(f"focal {focal_id!r} is not in the corpus")
            stats.focals += 1
            try:
                fetched = fetch_references(client, focal_id)
            except HttpError as exc:
                consecutive_failures += 1
                stats.failed_focals += 1
                log.warning("keeping focal %r without references: %s", focal_id, exc)
                if consecutive_failures >= _MAX_CONSECUTIVE_FAILURES:
                    raise InputError(
                        f"reference endpoint failed {consecutive_failures} focals in "
                        f"a row, aborting (last: {exc})"
                    ) from None
                continue
            consecutive_failures = 0
            kept: set[str] = set()
            for ref in fetched:
                stats.total_refs += 1
                if ref.ref_id == focal_id:
                    stats.dropped += 1
                    continue
                if ref.ref_id in by_id or ref.ref_id in new_refs:
                    kept.add(ref.ref_id)
                    stats.linked_existing += 1
                    continue
                if ref.year is None:
                    stats.dropped += 1
                    log.warning("reference %r of %r has no year, dropped", ref.ref_id, focal_id)
                    continue
                if not ref.title.strip() and not ref.abstract.strip():
                    stats.dropped += 1
                    log.warning("reference %r of %r has no text, dropped", ref.ref_id, focal_id)
                    continue
                try:
                    new_refs[ref.ref_id] = Paper(
                        id=ref.ref_id,
                        title=ref.title,
                        abstract=ref.abstract,
                        year=ref.year,
                        task=focal.task,
                        refs=(),
                        is_reference_only=True,
                    )
                except InputError as exc:
                    stats.dropped += 1
                    log.warning("reference %r of %r rejected: %s", ref.ref_id, focal_id, exc)
                    continue
                kept.add(ref.ref_id)
                stats.new_papers += 1
            focal_refs[focal_id] = tuple(sorted(kept))

    result = [
        dataclasses.replace(p, refs=focal_refs[p.id]) if p.id in focal_refs else p
        for p in papers
    ]
    result.extend(new_refs[rid] for rid in sorted(new_refs))
    return result
