"""Benchmark orchestration: focal sampling, plan and manifest emission,
evaluation, and aggregation into pass-rate tables.

Planning is a pure function of (corpus, config), so the planner, the
manifest validator, and the evaluator always agree about pools, gates,
and variant membership.  Evaluation is deterministic: identical inputs
produce byte-identical result files regardless of worker count.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import multiprocessing
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from axiobench.axioms import (
    CHECK_IDS,
    CHECKS,
    COVERAGE_CHECKS,
    FocalPlan,
    SKIP_MISSING_EMBEDDING,
    SKIP_METRIC_EXCLUDED,
    SKIP_POOL_TOO_SMALL,
    build_base_pool,
    plan_focal,
    run_check,
)
from axiobench.corpus import (
    Corpus,
    EmbeddingSet,
    KIND_ORIGINAL,
    Manifest,
    RegistryEntry,
    TaskSpec,
    ValidationReport,
    load_corpus,
    load_embeddings,
    load_manifest,
    resolve_vector,
    validate_manifest,
)
from axiobench.metrics import (
    METRIC_FTLOF,
    METRIC_RND,
    METRIC_SEMNOVEL,
    METRIC_YIN,
    METRICS,
    MetricConfig,
    SpaceVectors,
    metric_space,
    min_pool_size,
    score_ftlof,
    score_rnd,
    score_semnovel,
    score_yin,
)
from axiobench.util import (
    InputError,
    atomic_write,
    dumps_canonical,
    read_json,
    read_jsonl,
    stable_seed,
)

log = logging.getLogger(__name__)

STATUS_PASS = "pass"
STATUS_FAIL = "fail"
STATUS_SKIP = "skip"
STATUS_SCORED = "scored"
BASE_ROW = "base"

EMPTY_CELL = "—"


@dataclass(frozen=True)
class RunConfig:
    tasks: tuple[TaskSpec, ...]
    metrics: tuple[str, ...] = METRICS
    checks: tuple[str, ...] = CHECK_IDS
    focals_per_task: int = 100
    seed: int = 0
    min_pool: int = 50
    workers: int = 1
    metric_config: MetricConfig = MetricConfig()

    def __post_init__(self) -> None:
        if not self.tasks:
            raise InputError("run config needs at least one task")
        names = [t.task for t in self.tasks]
        if len(set(names)) != len(names):
            raise InputError("duplicate task names in run config")
        for m in self.metrics:
            metric_space(m)
        if len(set(self.metrics)) != len(self.metrics):
            raise InputError("duplicate metrics in run config")
        for c in self.checks:
            if c not in CHECKS:
                raise InputError(f"unknown check {c!r}")
        if self.focals_per_task < 1:
            raise InputError("focals_per_task must be >= 1")
        if self.min_pool < 1:
            raise InputError("min_pool must be >= 1")

    @property
    def task_specs(self) -> dict[str, TaskSpec]:
        return {t.task: t for t in self.tasks}

    @property
    def needed_spaces(self) -> tuple[str, ...]:
        return tuple(sorted({metric_space(m) for m in self.metrics}))

    @property
    def include_coverage(self) -> bool:
        wants_ax3 = any(c in COVERAGE_CHECKS for c in self.checks)
        has_text_metric = any(m != METRIC_FTLOF for m in self.metrics)
        return wants_ax3 and has_text_metric

    def to_dict(self) -> dict:
        return {
            "tasks": [dataclasses.asdict(t) for t in self.tasks],
            "metrics": list(self.metrics),
            "checks": list(self.checks),
            "focals_per_task": self.focals_per_task,
            "seed": self.seed,
            "min_pool": self.min_pool,
            "workers": self.workers,
            "metric_config": dataclasses.asdict(self.metric_config),
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "RunConfig":
        mc = doc.get("metric_config", {})
        tsne_doc = dict(mc.get("tsne", {}))
        from axiobench.tsne import TsneConfig

        return RunConfig(
            tasks=tuple(TaskSpec(**t) for t in doc["tasks"]),
            metrics=tuple(doc.get("metrics", METRICS)),
            checks=tuple(doc.get("checks", CHECK_IDS)),
            focals_per_task=int(doc.get("focals_per_task", 100)),
            seed=int(doc.get("seed", 0)),
            min_pool=int(doc.get("min_pool", 50)),
            workers=int(doc.get("workers", 1)),
            metric_config=MetricConfig(
                k_rnd=int(mc.get("k_rnd", 10)),
                q_yin=float(mc.get("q_yin", 0.0)),
                lof_k=int(mc.get("lof_k", 20)),
                tsne=TsneConfig(**tsne_doc) if tsne_doc else TsneConfig(),
            ),
        )


def sample_focals(
    corpus: Corpus, task: str, count: int, seed: int, min_pool: int = 50
) -> tuple[str, ...]:
    """Uniform sample without replacement of eligible focal papers.
    Eligible: a task paper (not reference-only) with a non-empty abstract
    whose base pool reaches min_pool."""
    eligible = []
    for pid in corpus.task_paper_ids(task):
        p = corpus.get(pid)
        if p.is_reference_only or not p.abstract.strip():
            continue
        if len(build_base_pool(corpus, pid).members) >= min_pool:
            eligible.append(pid)
    if len(eligible) < count:
        raise InputError(
            f"task {task!r}: only {len(eligible)} eligible focal papers, need {count}"
        )
    rng = random.Random(stable_seed(seed, "focals", task))
    return tuple(sorted(rng.sample(eligible, count)))


@dataclass(frozen=True)
class Plan:
    config: RunConfig
    focals: Mapping[str, tuple[str, ...]]


def build_plan(
    corpus: Corpus, config: RunConfig, focals: Mapping[str, Sequence[str]] | None = None
) -> Plan:
    chosen: dict[str, tuple[str, ...]] = {}
    for spec in config.tasks:
        if focals is not None:
            if spec.task not in focals:
                raise InputError(f"no focals given for task {spec.task!r}")
            ids = tuple(sorted(focals[spec.task]))
            for fid in ids:
                if corpus.get(fid).task != spec.task:
                    raise InputError(f"focal {fid!r} does not belong to task {spec.task!r}")
        else:
            ids = sample_focals(
                corpus, spec.task, config.focals_per_task, config.seed, config.min_pool
            )
        chosen[spec.task] = ids
    return Plan(config=config, focals=chosen)


def save_plan(plan: Plan, path: str | Path) -> None:
    doc = {
        "config": plan.config.to_dict(),
        "focals": {t: list(ids) for t, ids in sorted(plan.focals.items())},
    }
    atomic_write(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_plan(path: str | Path) -> Plan:
    doc = read_json(path)
    try:
        config = RunConfig.from_dict(doc["config"])
        focals = {t: tuple(ids) for t, ids in doc["focals"].items()}
    except KeyError as exc:
        raise InputError(f"{path}: plan missing field {exc.args[0]!r}") from None
    return Plan(config=config, focals=focals)


def focal_plan_for(corpus: Corpus, config: RunConfig, focal_id: str) -> FocalPlan:
    return plan_focal(
        corpus,
        config.task_specs,
        focal_id,
        checks=config.checks,
        include_coverage=config.include_coverage,
    )


def build_manifest(
    corpus: Corpus,
    plan: Plan,
    corpus_path: str,
    space_paths: Mapping[str, str],
) -> Manifest:
    """Emit the embedding work order: every original document any variant
    needs, plus the synthetic documents (rephrase requests carry blank
    text for the embedding side to fill; coverage hosts carry their full
    synthetic text)."""
    for space in plan.config.needed_spaces:
        if space not in space_paths:
            raise InputError(f"no embedding path given for space {space!r}")
    manifest = Manifest(
        corpus_path=corpus_path,
        spaces={s: space_paths[s] for s in plan.config.needed_spaces},
    )
    originals: set[str] = set()
    for task in sorted(plan.focals):
        for focal_id in plan.focals[task]:
            fp = focal_plan_for(corpus, plan.config, focal_id)
            originals.add(focal_id)
            synthetic = {e.variant_id for e in fp.registry_entries}
            for entry in fp.registry_entries:
                manifest.add_entry(entry)
            for members in fp.variant_members.values():
                originals.update(m for m in members if m not in synthetic)
    for pid in sorted(originals):
        manifest.add_entry(RegistryEntry(pid, KIND_ORIGINAL, pid, ""))
    return manifest


def required_embeddings(corpus: Corpus, plan: Plan) -> set[tuple[str, str]]:
    """Every (variant_id, space) pair evaluation will try to resolve.

    Originals are only expected in spaces their text supports (no
    abstract vector without an abstract, no title vector without a
    title); coverage hosts live in the abstract space only."""
    from axiobench.corpus import SPACE_ABSTRACT, SPACE_TITLE

    spaces = plan.config.needed_spaces
    required: set[tuple[str, str]] = set()
    for task in sorted(plan.focals):
        for focal_id in plan.focals[task]:
            fp = focal_plan_for(corpus, plan.config, focal_id)
            synthetic = {e.variant_id: e.kind for e in fp.registry_entries}
            ids: set[str] = {focal_id}
            for members in fp.variant_members.values():
                ids.update(members)
            for vid in ids:
                kind = synthetic.get(vid, KIND_ORIGINAL)
                for space in spaces:
                    if kind == KIND_ORIGINAL:
                        paper = corpus.get(vid)
                        if space == SPACE_ABSTRACT and not paper.abstract.strip():
                            continue
                        if space == SPACE_TITLE and not paper.title.strip():
                            continue
                    elif kind == "coverage_chunk_host" and space == SPACE_TITLE:
                        continue
                    required.add((vid, space))
    return required


def validate_run(
    corpus: Corpus, plan: Plan, manifest: Manifest, sets: Mapping[str, EmbeddingSet]
) -> ValidationReport:
    return validate_manifest(manifest, required_embeddings(corpus, plan), sets)


@dataclass(frozen=True)
class Row:
    task: str
    domain: str
    focal: str
    metric: str
    check: str
    status: str
    reason: str | None = None
    scores: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "task": self.task,
            "domain": self.domain,
            "focal": self.focal,
            "metric": self.metric,
            "check": self.check,
            "status": self.status,
            "scores": {k: float(v) for k, v in sorted(self.scores.items())},
        }
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc

    @staticmethod
    def from_dict(doc: Mapping) -> "Row":
        return Row(
            task=doc["task"],
            domain=doc["domain"],
            focal=doc["focal"],
            metric=doc["metric"],
            check=doc["check"],
            status=doc["status"],
            reason=doc.get("reason"),
            scores=dict(doc.get("scores", {})),
        )


def save_results(rows: Sequence[Row], path: str | Path) -> None:
    atomic_write(path, "".join(dumps_canonical(r.to_dict()) + "\n" for r in rows))


def load_results(path: str | Path) -> list[Row]:
    return [Row.from_dict(rec) for _, rec in read_jsonl(path)]


class EvalState:
    """Everything a worker needs to score focals."""

    def __init__(
        self,
        corpus: Corpus,
        manifest: Manifest,
        sets: Mapping[str, EmbeddingSet],
        config: RunConfig,
    ):
        self.corpus = corpus
        self.manifest = manifest
        self.config = config
        self.synthetic_ids = {
            vid for vid, e in manifest.registry.items() if e.kind != KIND_ORIGINAL
        }
        self.vectors: dict[str, SpaceVectors] = {}
        for space in config.needed_spaces:
            emb = sets.get(space)
            if emb is None:
                raise InputError(f"no embeddings loaded for space {space!r}")
            sv = SpaceVectors(space)
            for vid in emb.ids():
                sv.put(vid, emb.get(vid))
            for vid in manifest.registry:
                if vid not in sv:
                    vec = resolve_vector(manifest, {space: emb}, space, vid)
                    if vec is not None:
                        sv.put(vid, vec)
            self.vectors[space] = sv


def evaluate(
    corpus: Corpus,
    manifest: Manifest,
    sets: Mapping[str, EmbeddingSet],
    plan: Plan,
) -> list[Row]:
    state = EvalState(corpus, manifest, sets, plan.config)
    rows: list[Row] = []
    for spec in plan.config.tasks:
        for focal_id in plan.focals[spec.task]:
            rows.extend(evaluate_focal(state, focal_id))
    return rows


def evaluate_focal(state: EvalState, focal_id: str) -> list[Row]:
    config = state.config
    mc = config.metric_config
    fp = focal_plan_for(state.corpus, config, focal_id)
    rows: list[Row] = []

    for metric in config.metrics:
        sv = state.vectors[metric_space(metric)]
        cache: dict[str, tuple[float | None, str | None]] = {}
        aux_r: dict[str, float] = {}

        def variant_score(key: str) -> tuple[float | None, str | None]:
            if key in cache:
                return cache[key]
            if focal_id not in sv:
                result: tuple[float | None, str | None] = (None, SKIP_MISSING_EMBEDDING)
            else:
                members_all = fp.variant_members[key]
                missing_synth = [
                    m for m in members_all if m in state.synthetic_ids and m not in sv
                ]
                if missing_synth:
                    result = (None, SKIP_MISSING_EMBEDDING)
                else:
                    members = [m for m in members_all if m in sv]
                    if len(members) < max(min_pool_size(metric, mc), 1):
                        result = (None, SKIP_POOL_TOO_SMALL)
                    else:
                        result = (_score(metric, sv, focal_id, members, mc, config, key, aux_r), None)
            cache[key] = result
            return result

        base_score, base_reason = variant_score(BASE_ROW)
        if base_reason is None:
            base_scores = {BASE_ROW: float(base_score)}
            if BASE_ROW in aux_r:
                base_scores[BASE_ROW + "_r"] = aux_r[BASE_ROW]
            rows.append(
                Row(fp.task, fp.domain, focal_id, metric, BASE_ROW, STATUS_SCORED, None, base_scores)
            )
        else:
            rows.append(
                Row(fp.task, fp.domain, focal_id, metric, BASE_ROW, STATUS_SKIP, base_reason)
            )

        for cp in fp.checks:
            check_id = cp.check_id
            if cp.status == "skip":
                rows.append(Row(fp.task, fp.domain, focal_id, metric, check_id, STATUS_SKIP, cp.reason))
                continue
            if metric == METRIC_FTLOF and check_id in COVERAGE_CHECKS:
                rows.append(
                    Row(fp.task, fp.domain, focal_id, metric, check_id, STATUS_SKIP, SKIP_METRIC_EXCLUDED)
                )
                continue
            spec = CHECKS[check_id]
            scores: dict[str, float] = {}
            reason: str | None = None
            for key in spec.variant_keys:
                s, r = variant_score(key)
                if s is None:
                    reason = r
                    break
                scores[key] = float(s)
            if reason is not None:
                rows.append(Row(fp.task, fp.domain, focal_id, metric, check_id, STATUS_SKIP, reason))
                continue
            status = STATUS_PASS if run_check(spec, scores) else STATUS_FAIL
            recorded = dict(scores)
            for key in spec.variant_keys:
                if key in aux_r:
                    recorded[key + "_r"] = aux_r[key]
            rows.append(Row(fp.task, fp.domain, focal_id, metric, check_id, status, None, recorded))
    return rows


def _score(
    metric: str,
    sv: SpaceVectors,
    focal_id: str,
    members: Sequence[str],
    mc: MetricConfig,
    config: RunConfig,
    key: str,
    aux_r: dict[str, float],
) -> float:
    if metric == METRIC_YIN:
        return score_yin(sv, focal_id, members, mc.q_yin)
    if metric == METRIC_RND:
        score, r = score_rnd(sv, focal_id, members, mc.k_rnd)
        aux_r[key] = r
        return score
    if metric == METRIC_SEMNOVEL:
        seed = stable_seed(config.seed, "tsne", focal_id, key)
        tsne_cfg = dataclasses.replace(mc.tsne, seed=seed)
        return score_semnovel(sv, focal_id, members, tsne_cfg)
    if metric == METRIC_FTLOF:
        return score_ftlof(sv, focal_id, members, mc.lof_k)
    raise InputError(f"unknown metric {metric!r}")


_WORKER_STATE: dict = {}


def _init_worker(corpus_path: str, manifest_path: str, plan_path: str) -> None:
    corpus, manifest, sets, plan = _load_run_inputs(corpus_path, manifest_path, plan_path)
    _WORKER_STATE["state"] = EvalState(corpus, manifest, sets, plan.config)


def _worker_eval(focal_id: str) -> list[dict]:
    state: EvalState = _WORKER_STATE["state"]
    return [r.to_dict() for r in evaluate_focal(state, focal_id)]


def _load_run_inputs(
    corpus_path: str, manifest_path: str, plan_path: str
) -> tuple[Corpus, Manifest, dict[str, EmbeddingSet], Plan]:
    plan = load_plan(plan_path)
    manifest = load_manifest(manifest_path)
    base = Path(manifest_path).parent
    corpus = load_corpus(corpus_path if corpus_path else base / manifest.corpus_path)
    sets = {}
    for space in plan.config.needed_spaces:
        if space not in manifest.spaces:
            raise InputError(f"manifest lists no embedding file for space {space!r}")
        sets[space] = load_embeddings(base / manifest.spaces[space], space)
    return corpus, manifest, sets, plan


def evaluate_paths(
    manifest_path: str, plan_path: str, workers: int = 1, corpus_path: str = ""
) -> list[Row]:
    corpus, manifest, sets, plan = _load_run_inputs(corpus_path, manifest_path, plan_path)
    if workers <= 1:
        return evaluate(corpus, manifest, sets, plan)
    focal_ids = [fid for spec in plan.config.tasks for fid in plan.focals[spec.task]]
    ctx = multiprocessing.get_context("spawn")
    rows: list[Row] = []
    with ctx.Pool(
        processes=workers,
        initializer=_init_worker,
        initargs=(str(corpus_path), str(manifest_path), str(plan_path)),
    ) as pool:
        for chunk in pool.map(_worker_eval, focal_ids, chunksize=1):
            rows.extend(Row.from_dict(d) for d in chunk)
    return rows


@dataclass(frozen=True)
class Aggregate:
    domains: tuple[str, ...]  # real domains sorted, then "All"
    metrics: tuple[str, ...]
    checks: tuple[str, ...]
    rates: Mapping[tuple[str, str, str], float | None]
    avgs: Mapping[tuple[str, str], float | None]


def aggregate(rows: Sequence[Row]) -> Aggregate:
    """Macro pass rates: per (task, metric, check) first, then unweighted
    means over tasks within a domain, then over domains for the "All"
    block.  Skips never enter a denominator."""
    counts: dict[tuple[str, str, str, str], list[int]] = {}
    domains_tasks: dict[str, set[str]] = {}
    metrics_seen: list[str] = []
    checks_seen: list[str] = []
    for row in rows:
        if row.check == BASE_ROW:
            continue
        domains_tasks.setdefault(row.domain, set()).add(row.task)
        if row.metric not in metrics_seen:
            metrics_seen.append(row.metric)
        if row.check not in checks_seen:
            checks_seen.append(row.check)
        if row.status not in (STATUS_PASS, STATUS_FAIL):
            continue
        cell = counts.setdefault((row.domain, row.task, row.metric, row.check), [0, 0])
        cell[0 if row.status == STATUS_PASS else 1] += 1

    domains = tuple(sorted(domains_tasks))
    rates: dict[tuple[str, str, str], float | None] = {}
    for domain in domains:
        for metric in metrics_seen:
            for check in checks_seen:
                task_rates = []
                for task in sorted(domains_tasks[domain]):
                    cell = counts.get((domain, task, metric, check))
                    if cell and (cell[0] + cell[1]) > 0:
                        task_rates.append(100.0 * cell[0] / (cell[0] + cell[1]))
                rates[(domain, metric, check)] = (
                    float(np.mean(task_rates)) if task_rates else None
                )
    for metric in metrics_seen:
        for check in checks_seen:
            vals = [
                rates[(d, metric, check)]
                for d in domains
                if rates[(d, metric, check)] is not None
            ]
            rates[("All", metric, check)] = float(np.mean(vals)) if vals else None

    avgs: dict[tuple[str, str], float | None] = {}
    for domain in domains + ("All",):
        for metric in metrics_seen:
            vals = [
                rates[(domain, metric, c)]
                for c in checks_seen
                if rates[(domain, metric, c)] is not None
            ]
            avgs[(domain, metric)] = float(np.mean(vals)) if vals else None

    return Aggregate(
        domains=domains + ("All",),
        metrics=tuple(metrics_seen),
        checks=tuple(checks_seen),
        rates=rates,
        avgs=avgs,
    )


def _fmt(value: float | None) -> str:
    return EMPTY_CELL if value is None else f"{value:.1f}"


def render_markdown(agg: Aggregate) -> str:
    out: list[str] = []
    for domain in agg.domains:
        out.append(f"## {domain}")
        out.append("")
        header = "| Metric | " + " | ".join(agg.checks) + " | Avg |"
        out.append(header)
        out.append("|" + " --- |" * (len(agg.checks) + 2))
        for metric in agg.metrics:
            cells = [_fmt(agg.rates[(domain, metric, c)]) for c in agg.checks]
            cells.append(_fmt(agg.avgs[(domain, metric)]))
            out.append(f"| {metric} | " + " | ".join(cells) + " |")
        out.append("")
    return "\n".join(out)


def render_csv(agg: Aggregate) -> str:
    lines = ["domain,metric,check,rate"]
    for domain in agg.domains:
        for metric in agg.metrics:
            for check in agg.checks:
                v = agg.rates[(domain, metric, check)]
                lines.append(f"{domain},{metric},{check},{'' if v is None else f'{v:.6f}'}")
            avg = agg.avgs[(domain, metric)]
            lines.append(f"{domain},{metric},Avg,{'' if avg is None else f'{avg:.6f}'}")
    return "\n".join(lines) + "\n"
