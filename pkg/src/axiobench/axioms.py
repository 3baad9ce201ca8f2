"""Axiom checks: pool construction, eligibility gates, and the pool
variants each check compares.

Every check is one or more strict inequalities between scores of pool
variants; equality always fails.  Variants never contain the focal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from axiobench.corpus import (
    KIND_COVERAGE,
    KIND_REPHRASE,
    KIND_SELF_COPY,
    Corpus,
    Paper,
    RegistryEntry,
    TaskSpec,
)
from axiobench.textops import split_sentences, tfidf_fit, tfidf_nearest
from axiobench.util import InputError

# Variant keys.
V_BASE = "base"
V_SELF_COPY = "self_copy"
V_REPHRASE = "rephrase"
V_COV1 = "cov1"
V_COV2 = "cov2"
V_COV4 = "cov4"
V_DISTANT = "distant"
V_MINUS_CITED = "minus_cited"
V_CITED_ONLY = "cited_only"
V_OLDEST = "oldest"
V_NEWEST = "newest"

SKIP_INSUFFICIENT_REFERENCES = "insufficient_references"
SKIP_POOL_TOO_SMALL = "pool_too_small"
SKIP_INSUFFICIENT_NEWER = "insufficient_newer"
SKIP_METRIC_EXCLUDED = "metric_excluded"
SKIP_MISSING_EMBEDDING = "missing_embedding"
SKIP_EMPTY_ABSTRACT = "empty_abstract"

MIN_CITED_IN_POOL = 20
OLDEST_POOL_FLOOR = 500
SLICE_SIZE = 300
COVERAGE_CHUNK_SIZES = (1, 2, 4)


@dataclass(frozen=True)
class CheckSpec:
    """comparisons is a tuple of (lesser, greater) variant keys; the
    check passes when every strict inequality holds."""

    check_id: str
    comparisons: tuple[tuple[str, str], ...]

    @property
    def variant_keys(self) -> tuple[str, ...]:
        seen: list[str] = []
        for a, b in self.comparisons:
            for key in (a, b):
                if key not in seen:
                    seen.append(key)
        return tuple(seen)


CHECKS: dict[str, CheckSpec] = {
    "Ax1": CheckSpec("Ax1", ((V_SELF_COPY, V_BASE),)),
    "Ax2": CheckSpec("Ax2", ((V_REPHRASE, V_BASE),)),
    "Ax3_grad": CheckSpec("Ax3_grad", ((V_COV4, V_COV2), (V_COV2, V_COV1))),
    "Ax3_ltbase": CheckSpec("Ax3_ltbase", ((V_COV1, V_BASE),)),
    "Ax4": CheckSpec("Ax4", ((V_BASE, V_DISTANT),)),
    "Ax5": CheckSpec("Ax5", ((V_BASE, V_MINUS_CITED),)),
    "Ax6": CheckSpec("Ax6", ((V_CITED_ONLY, V_MINUS_CITED),)),
    "Ax7": CheckSpec("Ax7", ((V_BASE, V_OLDEST),)),
    "Ax8": CheckSpec("Ax8", ((V_NEWEST, V_BASE),)),
}

CHECK_IDS = tuple(CHECKS)

COVERAGE_CHECKS = ("Ax3_grad", "Ax3_ltbase")


def run_check(spec: CheckSpec, scores: Mapping[str, float]) -> bool:
    """Evaluate the strict inequalities; the caller is responsible for
    only passing complete, finite score maps."""
    for a, b in spec.comparisons:
        for key in (a, b):
            if key not in scores:
                raise InputError(f"{spec.check_id}: missing score for variant {key!r}")
            if not math.isfinite(scores[key]):
                raise InputError(f"{spec.check_id}: non-finite score for variant {key!r}")
    return all(scores[a] < scores[b] for a, b in spec.comparisons)


@dataclass(frozen=True)
class Pool:
    focal_id: str
    task: str
    members: tuple[str, ...]


def build_base_pool(corpus: Corpus, focal_id: str) -> Pool:
    """Same-task papers published before the focal, plus the focal's
    references published before the focal, deduplicated.  Reference-only
    papers join through the reference side only."""
    focal = corpus.get(focal_id)
    members: set[str] = set()
    for pid in corpus.task_paper_ids(focal.task):
        p = corpus.get(pid)
        if pid != focal_id and not p.is_reference_only and p.year < focal.year:
            members.add(pid)
    for rid in focal.refs:
        if rid in corpus and rid != focal_id and corpus.get(rid).year < focal.year:
            members.add(rid)
    return Pool(focal_id=focal_id, task=focal.task, members=tuple(sorted(members)))


def distant_pool(corpus: Corpus, focal: Paper, distant_task: str) -> tuple[str, ...]:
    members = [
        pid
        for pid in corpus.task_paper_ids(distant_task)
        if not corpus.get(pid).is_reference_only and corpus.get(pid).year < focal.year
    ]
    return tuple(sorted(members))


def self_copy_id(focal_id: str) -> str:
    return f"selfcopy::{focal_id}"


def rephrase_id(focal_id: str) -> str:
    return f"rephrase::{focal_id}"


def coverage_id(chunk_size: int, focal_id: str, host_id: str) -> str:
    return f"cov{chunk_size}::{focal_id}::{host_id}"


@dataclass(frozen=True)
class CheckPlan:
    check_id: str
    status: str  # "evaluate" | "skip"
    reason: str | None = None


@dataclass(frozen=True)
class FocalPlan:
    focal_id: str
    task: str
    domain: str
    pool: Pool
    checks: tuple[CheckPlan, ...]
    variant_members: Mapping[str, tuple[str, ...]]
    registry_entries: tuple[RegistryEntry, ...] = field(default_factory=tuple)

    def check_plan(self, check_id: str) -> CheckPlan:
        for cp in self.checks:
            if cp.check_id == check_id:
                return cp
        raise InputError(f"no plan for check {check_id!r}")


def plan_focal(
    corpus: Corpus,
    task_specs: Mapping[str, TaskSpec],
    focal_id: str,
    checks: Sequence[str] = CHECK_IDS,
    include_coverage: bool = True,
) -> FocalPlan:
    """Work out, for one focal, which checks can run and exactly which
    pool variant each check compares.  Pure function of its inputs; the
    planner, the validator, and the evaluator all share it."""
    focal = corpus.get(focal_id)
    if focal.task not in task_specs:
        raise InputError(f"focal {focal_id!r}: no task spec for task {focal.task!r}")
    spec = task_specs[focal.task]
    pool = build_base_pool(corpus, focal_id)

    variant_members: dict[str, tuple[str, ...]] = {V_BASE: pool.members}
    registry: list[RegistryEntry] = []
    plans: list[CheckPlan] = []

    def evaluate(check_id: str) -> None:
        plans.append(CheckPlan(check_id, "evaluate"))

    def skip(check_id: str, reason: str) -> None:
        plans.append(CheckPlan(check_id, "skip", reason))

    coverage_state: dict | None = None

    for check_id in checks:
        if check_id not in CHECKS:
            raise InputError(f"unknown check {check_id!r}")
        if not pool.members:
            skip(check_id, SKIP_POOL_TOO_SMALL)
            continue

        if check_id == "Ax1":
            vid = self_copy_id(focal_id)
            variant_members[V_SELF_COPY] = tuple(sorted(pool.members + (vid,)))
            registry.append(RegistryEntry(vid, KIND_SELF_COPY, focal_id, ""))
            evaluate(check_id)
        elif check_id == "Ax2":
            vid = rephrase_id(focal_id)
            variant_members[V_REPHRASE] = tuple(sorted(pool.members + (vid,)))
            registry.append(RegistryEntry(vid, KIND_REPHRASE, focal_id, ""))
            evaluate(check_id)
        elif check_id in COVERAGE_CHECKS:
            if not include_coverage:
                skip(check_id, SKIP_METRIC_EXCLUDED)
                continue
            if coverage_state is None:
                coverage_state = _plan_coverage(corpus, focal, pool)
            if coverage_state["reason"] is not None:
                skip(check_id, coverage_state["reason"])
                continue
            for size in COVERAGE_CHUNK_SIZES:
                key = f"cov{size}"
                if key not in variant_members:
                    variant_members[key] = coverage_state["members"][size]
            registry.extend(
                e for e in coverage_state["entries"] if e not in registry
            )
            evaluate(check_id)
        elif check_id == "Ax4":
            distant = distant_pool(corpus, focal, spec.distant_task)
            if not distant:
                skip(check_id, SKIP_POOL_TOO_SMALL)
                continue
            variant_members[V_DISTANT] = distant
            evaluate(check_id)
        elif check_id in ("Ax5", "Ax6"):
            cited = sorted(set(focal.refs) & set(pool.members))
            if len(cited) < MIN_CITED_IN_POOL:
                skip(check_id, SKIP_INSUFFICIENT_REFERENCES)
                continue
            minus = tuple(pid for pid in pool.members if pid not in set(cited))
            if not minus:
                skip(check_id, SKIP_POOL_TOO_SMALL)
                continue
            variant_members[V_MINUS_CITED] = minus
            variant_members[V_CITED_ONLY] = tuple(cited)
            evaluate(check_id)
        elif check_id == "Ax7":
            if len(pool.members) <= OLDEST_POOL_FLOOR:
                skip(check_id, SKIP_POOL_TOO_SMALL)
                continue
            by_age = sorted(pool.members, key=lambda pid: (corpus.get(pid).year, pid))
            variant_members[V_OLDEST] = tuple(sorted(by_age[:SLICE_SIZE]))
            evaluate(check_id)
        elif check_id == "Ax8":
            newer = [
                pid
                for pid in corpus.task_paper_ids(focal.task)
                if pid != focal_id
                and not corpus.get(pid).is_reference_only
                and corpus.get(pid).year > focal.year
            ]
            if len(newer) <= SLICE_SIZE:
                skip(check_id, SKIP_INSUFFICIENT_NEWER)
                continue
            by_recency = sorted(newer, key=lambda pid: (-corpus.get(pid).year, pid))
            variant_members[V_NEWEST] = tuple(sorted(by_recency[:SLICE_SIZE]))
            evaluate(check_id)
        else:  # pragma: no cover - CHECKS and the dispatch are in sync
            raise InputError(f"unhandled check {check_id!r}")

    needed = {V_BASE}
    for cp in plans:
        if cp.status == "evaluate":
            needed.update(CHECKS[cp.check_id].variant_keys)
    variant_members = {k: v for k, v in variant_members.items() if k in needed}

    return FocalPlan(
        focal_id=focal_id,
        task=focal.task,
        domain=spec.domain,
        pool=pool,
        checks=tuple(plans),
        variant_members=variant_members,
        registry_entries=tuple(registry),
    )


def _plan_coverage(corpus: Corpus, focal: Paper, pool: Pool) -> dict:
    """Assign each chunk of the focal abstract to its most TF-IDF-similar
    pool abstract and build the synthetic host documents."""
    if not focal.abstract.strip():
        return {"reason": SKIP_EMPTY_ABSTRACT, "members": {}, "entries": []}
    candidates = [
        pid for pid in pool.members
        if "::" not in pid and corpus.get(pid).abstract.strip()
    ]
    if not candidates:
        return {"reason": SKIP_POOL_TOO_SMALL, "members": {}, "entries": []}
    sentences = split_sentences(focal.abstract)
    model = tfidf_fit([corpus.get(pid).abstract for pid in candidates], candidates)

    members: dict[int, tuple[str, ...]] = {}
    entries: list[RegistryEntry] = []
    for size in COVERAGE_CHUNK_SIZES:
        chunks = [
            " ".join(sentences[i:i + size]) for i in range(0, len(sentences), size)
        ]
        host_chunks: dict[str, list[str]] = {}
        for chunk in chunks:
            host = tfidf_nearest(model, chunk, candidates)
            host_chunks.setdefault(host, []).append(chunk)
        replaced = set(host_chunks)
        variant = [pid for pid in pool.members if pid not in replaced]
        for host, got in sorted(host_chunks.items()):
            vid = coverage_id(size, focal.id, host)
            variant.append(vid)
            text = corpus.get(host).abstract + " " + " ".join(got)
            entries.append(RegistryEntry(vid, KIND_COVERAGE, host, text))
        members[size] = tuple(sorted(variant))
    return {"reason": None, "members": members, "entries": entries}
