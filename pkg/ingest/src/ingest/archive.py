"""Archive reading and task selection.

The archive is a JSONL dump of tagged papers: one object per line with
an arXiv id, title, abstract, a list of task tags, and a date.  Task
tags are normalized (case, surrounding and repeated whitespace) and
then passed through a manually curated merge map that collapses naming
variants of the same task.  The map is applied to every tag before any
task filtering happens, so a variant spelling can never cause a paper
to be dropped from its task.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from axiobench import InputError
from axiobench.corpus import Paper
from axiobench.util import read_json, read_jsonl

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArchiveRecord:
    id: str
    title: str
    abstract: str
    year: int
    tasks: tuple[str, ...]


@dataclass
class ArchiveStats:
    read: int = 0
    kept: int = 0
    no_id: int = 0
    bad_year: int = 0
    duplicates: int = 0
    multi_task: int = 0
    off_task: int = 0


def normalize_task(name: str) -> str:
    """Canonical form of a task tag: lowercased, single spaces."""
    return " ".join(name.strip().lower().split())


def load_merge_map(path: str | Path) -> dict[str, str]:
    """Load the task merge map: {variant: canonical}.

    Both sides are normalized.  Chained entries (a value that is itself
    a key) are rejected so applying the map once is always enough.
    """
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise InputError(f"{path}: merge map must be a JSON object")
    merged: dict[str, str] = {}
    for variant, canonical in doc.items():
        if not isinstance(canonical, str):
            raise InputError(f"{path}: value for {variant!r} must be a string")
        v, c = normalize_task(variant), normalize_task(canonical)
        if v == c:
            continue
        if v in merged and merged[v] != c:
            raise InputError(f"{path}: conflicting targets for {v!r}")
        merged[v] = c
    chained = sorted(c for c in merged.values() if c in merged)
    if chained:
        raise InputError(f"{path}: merge targets are themselves merged: {chained}")
    return merged


def apply_merge(tag: str, merge_map: Mapping[str, str]) -> str:
    t = normalize_task(tag)
    return merge_map.get(t, t)


def read_archive(
    path: str | Path, merge_map: Mapping[str, str], stats: ArchiveStats | None = None
) -> Iterator[ArchiveRecord]:
    """Yield archive records with merged task tags.

    Records without a usable id or publication year are logged and
    skipped; they cannot become corpus papers or have references
    fetched.
    """
    stats = stats if stats is not None else ArchiveStats()
    for lineno, rec in read_jsonl(path):
        stats.read += 1
        rid = str(rec.get("arxiv_id") or rec.get("id") or "").strip()
        if not rid:
            stats.no_id += 1
            log.warning("%s: line %d: record has no id, skipped", path, lineno)
            continue
        year = _parse_year(rec)
        if year is None:
            stats.bad_year += 1
            log.warning("%s: line %d: no usable year for %r, skipped", path, lineno, rid)
            continue
        tags = rec.get("tasks", [])
        if not isinstance(tags, list):
            raise InputError(f"{path}: line {lineno}: 'tasks' must be a list")
        merged = tuple(dict.fromkeys(apply_merge(str(t), merge_map) for t in tags))
        yield ArchiveRecord(
            id=rid,
            title=str(rec.get("title", "")),
            abstract=str(rec.get("abstract", "")),
            year=year,
            tasks=merged,
        )


def _parse_year(rec: Mapping) -> int | None:
    year = rec.get("year")
    if isinstance(year, int):
        return year
    date = str(rec.get("date", "")).strip()
    if len(date) >= 4 and date[:4].isdigit():
        return int(date[:4])
    return None


def select_papers(
    records: Iterable[ArchiveRecord],
    wanted_tasks: Sequence[str],
    stats: ArchiveStats | None = None,
) -> list[Paper]:
    """Turn archive records into corpus papers for the wanted tasks.

    A paper tagged with several wanted tasks is assigned to the
    alphabetically first one and counted, so reruns are stable and the
    overlap is visible in the log.  Records whose paper constructor
    rejects them (implausible year, self references) are logged and
    skipped rather than failing the whole build.
    """
    stats = stats if stats is not None else ArchiveStats()
    wanted = {normalize_task(t) for t in wanted_tasks}
    papers: list[Paper] = []
    seen: set[str] = set()
    for rec in records:
        matches = sorted(set(rec.tasks) & wanted)
        if not matches:
            stats.off_task += 1
            continue
        if rec.id in seen:
            stats.duplicates += 1
            log.warning("duplicate archive id %r, keeping the first record", rec.id)
            continue
        if len(matches) > 1:
            stats.multi_task += 1
            log.info("paper %r tagged with %s, assigned to %r", rec.id, matches, matches[0])
        try:
            paper = Paper(
                id=rec.id,
                title=rec.title,
                abstract=rec.abstract,
                year=rec.year,
                task=matches[0],
                refs=(),
            )
        except InputError as exc:
            stats.bad_year += 1
            log.warning("skipping archive record %r: %s", rec.id, exc)
            continue
        seen.add(rec.id)
        papers.append(paper)
        stats.kept += 1
    return papers
