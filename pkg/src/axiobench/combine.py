"""Combining metrics: per-task z-normalization, weighted combined
checks, simplex grid search over weights, leave-one-domain-out
cross-validation, metric ablation, and base-score correlations.

A combined score is sum_m w_m * z_m over metrics with strictly positive
weight; zero-weight metrics are not components, so a row only counts for
a weight vector when every positive-weight metric scored it.  Coverage
checks force the title-space metric's weight to zero (a positive
rescaling of the remaining weights never flips a strict inequality, so
zeroing is the whole renormalization).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from axiobench.axioms import (
    CHECKS,
    COVERAGE_CHECKS,
    SKIP_METRIC_EXCLUDED,
    SKIP_MISSING_EMBEDDING,
    run_check,
)
from axiobench.bench import (
    BASE_ROW,
    Row,
    STATUS_FAIL,
    STATUS_PASS,
    STATUS_SCORED,
    STATUS_SKIP,
)
from axiobench.metrics import METRIC_FTLOF, METRICS
from axiobench.textops import pearson
from axiobench.util import InputError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormStat:
    mean: float
    std: float

    @property
    def degenerate(self) -> bool:
        return self.std == 0.0


def norm_stats(rows: Sequence[Row]) -> dict[tuple[str, str], NormStat]:
    """Population mean/std of base-pool scores per (task, metric), taken
    over the scored base rows of that task's focals."""
    values: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        if row.check == BASE_ROW and row.status == STATUS_SCORED:
            values.setdefault((row.task, row.metric), []).append(row.scores[BASE_ROW])
    stats = {}
    for key, vals in values.items():
        arr = np.asarray(vals, dtype=np.float64)
        stat = NormStat(mean=float(arr.mean()), std=float(arr.std()))
        if stat.degenerate:
            log.warning(
                "degenerate scale for task=%s metric=%s: all %d base scores equal %g; "
                "z-scores substitute 0.0",
                key[0], key[1], len(vals), stat.mean,
            )
        stats[key] = stat
    return stats


def zvalue(score: float, stat: NormStat) -> float:
    if stat.degenerate:
        return 0.0
    return (score - stat.mean) / stat.std


def combined_check(
    check_id: str,
    task: str,
    scores_by_metric: Mapping[str, Mapping[str, float] | None],
    weights: Mapping[str, float],
    stats: Mapping[tuple[str, str], NormStat],
) -> tuple[str, str | None]:
    """Decide one check from per-metric variant scores under a weight
    vector.  Returns (status, reason)."""
    spec = CHECKS[check_id]
    w = dict(weights)
    if check_id in COVERAGE_CHECKS and METRIC_FTLOF in w:
        w[METRIC_FTLOF] = 0.0
    components = [m for m, v in w.items() if v > 0.0]
    if not components:
        return STATUS_SKIP, SKIP_METRIC_EXCLUDED
    for m in components:
        scores = scores_by_metric.get(m)
        if scores is None or any(k not in scores for k in spec.variant_keys):
            return STATUS_SKIP, SKIP_MISSING_EMBEDDING
        if (task, m) not in stats:
            raise InputError(f"no normalization stats for task {task!r} metric {m!r}")
    combined = {
        key: sum(w[m] * zvalue(scores_by_metric[m][key], stats[(task, m)]) for m in components)
        for key in spec.variant_keys
    }
    return (STATUS_PASS if run_check(spec, combined) else STATUS_FAIL), None


def enumerate_simplex(m: int, step: float) -> np.ndarray:
    """All weight vectors of length m with entries in {0, step, 2*step,
    ... 1} summing to one, in ascending lexicographic order."""
    if m < 1:
        raise InputError("simplex needs at least one coordinate")
    if not (0.0 < step <= 1.0):
        raise InputError(f"step must be in (0, 1], got {step}")
    grid = 1.0 / step
    levels = round(grid)
    if abs(grid - levels) > 1e-9:
        raise InputError(f"1/step must be an integer, got 1/{step} = {grid}")

    out: list[tuple[float, ...]] = []

    def rec(prefix: list[int], remaining: int, slots: int) -> None:
        if slots == 1:
            out.append(tuple((c * step) for c in prefix + [remaining]))
            return
        for c in range(remaining + 1):
            rec(prefix + [c], remaining - c, slots - 1)

    rec([], levels, m)
    return np.asarray(out, dtype=np.float64)


@dataclass(frozen=True)
class _Group:
    domain: str
    task: str
    check: str
    deltas: np.ndarray      # (n_comparisons, n_metrics), 0.0 where a metric is absent
    available: np.ndarray   # (n_metrics,) bool


def build_groups(
    rows: Sequence[Row],
    metrics: Sequence[str],
    stats: Mapping[tuple[str, str], NormStat] | None = None,
) -> list[_Group]:
    if stats is None:
        stats = norm_stats(rows)
    per_focal: dict[tuple[str, str, str], dict] = {}
    for row in rows:
        if row.check == BASE_ROW or row.metric not in metrics:
            continue
        if row.status not in (STATUS_PASS, STATUS_FAIL):
            continue
        key = (row.task, row.focal, row.check)
        entry = per_focal.setdefault(key, {"domain": row.domain, "metrics": {}})
        entry["metrics"][row.metric] = row.scores

    groups: list[_Group] = []
    n_m = len(metrics)
    for (task, focal, check), entry in sorted(per_focal.items()):
        spec = CHECKS[check]
        deltas = np.zeros((len(spec.comparisons), n_m), dtype=np.float64)
        available = np.zeros(n_m, dtype=bool)
        for mi, metric in enumerate(metrics):
            scores = entry["metrics"].get(metric)
            if scores is None or (task, metric) not in stats:
                continue
            stat = stats[(task, metric)]
            available[mi] = True
            for ci, (a, b) in enumerate(spec.comparisons):
                deltas[ci, mi] = zvalue(scores[a], stat) - zvalue(scores[b], stat)
        if available.any():
            groups.append(_Group(entry["domain"], task, check, deltas, available))
    return groups


def _sweep_counts(
    groups: Sequence[_Group], W: np.ndarray, metrics: Sequence[str]
) -> dict[tuple[str, str, str], tuple[np.ndarray, np.ndarray]]:
    """Per (domain, task, check): pass and contribution counts for every
    weight vector."""
    n_v = W.shape[0]
    ftlof_col = metrics.index(METRIC_FTLOF) if METRIC_FTLOF in metrics else None
    W_cov = W.copy()
    if ftlof_col is not None:
        W_cov[:, ftlof_col] = 0.0
    any_cov_weight = (
        W_cov.sum(axis=1) > 0.0 if ftlof_col is not None else np.ones(n_v, dtype=bool)
    )

    acc: dict[tuple[str, str, str], tuple[np.ndarray, np.ndarray]] = {}
    for g in groups:
        coverage = g.check in COVERAGE_CHECKS
        Wg = W_cov if (coverage and ftlof_col is not None) else W

        unavailable = ~g.available
        if coverage and ftlof_col is not None:
            unavailable = unavailable.copy()
            unavailable[ftlof_col] = False
        if unavailable.any():
            contrib = np.all(W[:, unavailable] == 0.0, axis=1)
        else:
            contrib = np.ones(n_v, dtype=bool)
        if coverage and ftlof_col is not None:
            contrib = contrib & any_cov_weight

        passes = np.ones(n_v, dtype=bool)
        for delta in g.deltas:
            passes &= (Wg @ delta) < 0.0

        key = (g.domain, g.task, g.check)
        if key not in acc:
            acc[key] = (np.zeros(n_v, dtype=np.int64), np.zeros(n_v, dtype=np.int64))
        acc[key][0][passes & contrib] += 1
        acc[key][1][contrib] += 1
    return acc


def _check_rate_vectors(
    counts: Mapping[tuple[str, str, str], tuple[np.ndarray, np.ndarray]],
    domains: Sequence[str],
) -> dict[str, np.ndarray]:
    """Macro rate per check: task rates averaged within each domain, then
    across domains; entries are NaN where nothing contributed."""
    by_check: dict[str, dict[str, dict[str, tuple[np.ndarray, np.ndarray]]]] = {}
    for (domain, task, check), (p, t) in counts.items():
        if domain not in domains:
            continue
        by_check.setdefault(check, {}).setdefault(domain, {})[task] = (p, t)

    rates: dict[str, np.ndarray] = {}
    for check, by_domain in by_check.items():
        domain_means = []
        for domain, by_task in by_domain.items():
            task_rates = []
            for task, (p, t) in by_task.items():
                with np.errstate(divide="ignore", invalid="ignore"):
                    r = np.where(t > 0, 100.0 * p / np.maximum(t, 1), np.nan)
                task_rates.append(r)
            domain_means.append(_nanmean(task_rates))
        rates[check] = _nanmean(domain_means)
    return rates


def _nanmean(arrays: Sequence[np.ndarray]) -> np.ndarray:
    stack = np.stack(arrays)
    valid = ~np.isnan(stack)
    counts = valid.sum(axis=0)
    sums = np.where(valid, stack, 0.0).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def _objective(check_rates: Mapping[str, np.ndarray]) -> np.ndarray:
    return _nanmean(list(check_rates.values()))


@dataclass(frozen=True)
class GridSearchResult:
    weights: dict[str, float]
    objective: float
    check_rates: dict[str, float]


def _result_at(
    index: int, W: np.ndarray, metrics: Sequence[str], check_rates: Mapping[str, np.ndarray]
) -> GridSearchResult:
    obj = _objective(check_rates)
    return GridSearchResult(
        weights={m: float(W[index, mi]) for mi, m in enumerate(metrics)},
        objective=float(obj[index]),
        check_rates={c: float(v[index]) for c, v in check_rates.items()},
    )


def _domains_of(rows: Sequence[Row]) -> tuple[str, ...]:
    return tuple(sorted({r.domain for r in rows if r.check != BASE_ROW}))


def _metrics_of(rows: Sequence[Row]) -> tuple[str, ...]:
    present = {r.metric for r in rows}
    ordered = [m for m in METRICS if m in present]
    ordered.extend(sorted(present - set(ordered)))
    return tuple(ordered)


def grid_search_global(
    rows: Sequence[Row],
    metrics: Sequence[str] | None = None,
    step: float = 0.05,
    domains: Sequence[str] | None = None,
    groups: Sequence[_Group] | None = None,
) -> GridSearchResult:
    """Best simplex weight vector by mean macro pass rate across checks;
    ties go to the earliest vector in enumeration order."""
    metrics = tuple(metrics if metrics is not None else _metrics_of(rows))
    if groups is None:
        groups = build_groups(rows, metrics)
    if domains is None:
        domains = sorted({g.domain for g in groups})
    W = enumerate_simplex(len(metrics), step)
    counts = _sweep_counts(groups, W, metrics)
    check_rates = _check_rate_vectors(counts, domains)
    if not check_rates:
        raise InputError("no evaluable rows to search over")
    obj = _objective(check_rates)
    if np.all(np.isnan(obj)):
        raise InputError("objective undefined for every weight vector")
    best = int(np.nanargmax(obj))
    return _result_at(best, W, metrics, check_rates)


def grid_search_per_axiom(
    rows: Sequence[Row],
    metrics: Sequence[str] | None = None,
    step: float = 0.05,
    domains: Sequence[str] | None = None,
    groups: Sequence[_Group] | None = None,
) -> dict[str, GridSearchResult]:
    """Independent weight search per check, maximizing that check's own
    cross-domain macro rate."""
    metrics = tuple(metrics if metrics is not None else _metrics_of(rows))
    if groups is None:
        groups = build_groups(rows, metrics)
    if domains is None:
        domains = sorted({g.domain for g in groups})
    W = enumerate_simplex(len(metrics), step)
    counts = _sweep_counts(groups, W, metrics)
    check_rates = _check_rate_vectors(counts, domains)
    results: dict[str, GridSearchResult] = {}
    for check, vec in sorted(check_rates.items()):
        if np.all(np.isnan(vec)):
            continue
        best = int(np.nanargmax(vec))
        results[check] = GridSearchResult(
            weights={m: float(W[best, mi]) for mi, m in enumerate(metrics)},
            objective=float(vec[best]),
            check_rates={check: float(vec[best])},
        )
    return results


def evaluate_weights(
    rows: Sequence[Row],
    weights: Mapping[str, float],
    metrics: Sequence[str] | None = None,
    domains: Sequence[str] | None = None,
    groups: Sequence[_Group] | None = None,
) -> dict[str, float | None]:
    """Per-check macro rates of one weight vector (None where nothing
    contributed)."""
    metrics = tuple(metrics if metrics is not None else _metrics_of(rows))
    if groups is None:
        groups = build_groups(rows, metrics)
    if domains is None:
        domains = sorted({g.domain for g in groups})
    W = np.asarray([[float(weights.get(m, 0.0)) for m in metrics]])
    counts = _sweep_counts(groups, W, metrics)
    check_rates = _check_rate_vectors(counts, domains)
    return {
        c: (None if np.isnan(v[0]) else float(v[0])) for c, v in sorted(check_rates.items())
    }


@dataclass(frozen=True)
class CvFold:
    held_out: str
    weights: dict[str, float] | None
    per_check_weights: dict[str, dict[str, float]] | None
    train_objective: float | None
    test_by_check: dict[str, float | None]
    test_avg: float | None


@dataclass(frozen=True)
class CvResult:
    mode: str
    step: float
    metrics: tuple[str, ...]
    folds: tuple[CvFold, ...]
    overall_avg: float | None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "step": self.step,
            "metrics": list(self.metrics),
            "folds": [
                {
                    "held_out": f.held_out,
                    "weights": f.weights,
                    "per_check_weights": f.per_check_weights,
                    "train_objective": f.train_objective,
                    "test_by_check": f.test_by_check,
                    "test_avg": f.test_avg,
                }
                for f in self.folds
            ],
            "overall_avg": self.overall_avg,
        }


def cross_validate(
    rows: Sequence[Row],
    mode: str = "global",
    metrics: Sequence[str] | None = None,
    step: float = 0.05,
) -> CvResult:
    """Leave-one-domain-out: search weights on the remaining domains,
    report per-check macro rates on the held-out domain."""
    if mode not in ("global", "per_axiom"):
        raise InputError(f"unknown cross-validation mode {mode!r}")
    metrics = tuple(metrics if metrics is not None else _metrics_of(rows))
    domains = _domains_of(rows)
    if len(domains) < 2:
        raise InputError("cross-validation needs at least two domains")
    groups = build_groups(rows, metrics)

    folds: list[CvFold] = []
    for held_out in domains:
        train = [d for d in domains if d != held_out]
        if mode == "global":
            g = grid_search_global(rows, metrics, step, domains=train, groups=groups)
            test = evaluate_weights(rows, g.weights, metrics, domains=[held_out], groups=groups)
            folds.append(
                CvFold(
                    held_out=held_out,
                    weights=g.weights,
                    per_check_weights=None,
                    train_objective=g.objective,
                    test_by_check=test,
                    test_avg=_mean_present(test.values()),
                )
            )
        else:
            per = grid_search_per_axiom(rows, metrics, step, domains=train, groups=groups)
            test_by_check: dict[str, float | None] = {}
            for check, result in per.items():
                rates = evaluate_weights(
                    rows, result.weights, metrics, domains=[held_out], groups=groups
                )
                test_by_check[check] = rates.get(check)
            folds.append(
                CvFold(
                    held_out=held_out,
                    weights=None,
                    per_check_weights={c: r.weights for c, r in per.items()},
                    train_objective=_mean_present(
                        [r.objective for r in per.values()]
                    ),
                    test_by_check=test_by_check,
                    test_avg=_mean_present(test_by_check.values()),
                )
            )
    overall = _mean_present([f.test_avg for f in folds])
    return CvResult(
        mode=mode, step=step, metrics=metrics, folds=tuple(folds), overall_avg=overall
    )


def _mean_present(values) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def ablate_metrics(
    rows: Sequence[Row], metrics: Sequence[str] | None = None, step: float = 0.05
) -> dict[str, CvResult]:
    """Global-mode cross-validation with each metric dropped in turn."""
    metrics = tuple(metrics if metrics is not None else _metrics_of(rows))
    results: dict[str, CvResult] = {}
    for dropped in metrics:
        remaining = tuple(m for m in metrics if m != dropped)
        if not remaining:
            continue
        results[dropped] = cross_validate(rows, "global", remaining, step)
    return results


@dataclass(frozen=True)
class CorrelationMatrix:
    metrics: tuple[str, ...]
    values: tuple[tuple[float | None, ...], ...]

    def to_dict(self) -> dict:
        return {
            "metrics": list(self.metrics),
            "values": [list(row) for row in self.values],
        }


def correlate_base_scores(
    rows: Sequence[Row], metrics: Sequence[str] | None = None
) -> CorrelationMatrix:
    """Pearson correlations between metrics' base-pool scores over the
    focals both metrics scored."""
    metrics = tuple(metrics if metrics is not None else _metrics_of(rows))
    per_metric: dict[str, dict[tuple[str, str], float]] = {m: {} for m in metrics}
    for row in rows:
        if row.check == BASE_ROW and row.status == STATUS_SCORED and row.metric in per_metric:
            per_metric[row.metric][(row.task, row.focal)] = row.scores[BASE_ROW]

    values = []
    for a in metrics:
        row_vals: list[float | None] = []
        for b in metrics:
            if a == b:
                row_vals.append(1.0)
                continue
            shared = sorted(set(per_metric[a]) & set(per_metric[b]))
            if len(shared) < 2:
                row_vals.append(None)
                continue
            try:
                row_vals.append(
                    pearson(
                        [per_metric[a][k] for k in shared],
                        [per_metric[b][k] for k in shared],
                    )
                )
            except InputError:
                row_vals.append(None)
        values.append(tuple(row_vals))
    return CorrelationMatrix(metrics=metrics, values=tuple(values))


def combine_results(
    rows: Sequence[Row], metrics: Sequence[str] | None = None, step: float = 0.05
) -> dict:
    """Everything the combine stage reports, as one JSON-able document."""
    metrics = tuple(metrics if metrics is not None else _metrics_of(rows))
    doc = {
        "step": step,
        "metrics": list(metrics),
        "global": cross_validate(rows, "global", metrics, step).to_dict(),
        "per_axiom": cross_validate(rows, "per_axiom", metrics, step).to_dict(),
        "correlations": correlate_base_scores(rows, metrics).to_dict(),
    }
    if len(metrics) > 1:
        doc["ablation"] = {
            dropped: {"overall_avg": cv.overall_avg, "mode": cv.mode}
            for dropped, cv in ablate_metrics(rows, metrics, step).items()
        }
    return doc
