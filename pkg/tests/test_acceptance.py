"""Release gate: every acceptance criterion as one test that prints one
verdict line.

Run with ``pytest tests/test_acceptance.py -s`` to watch the lines appear
as the criteria finish; without ``-s`` pytest shows them for failing
criteria only.  The full-data criterion needs real benchmark results and
skips unless AXIOBENCH_DATA_DIR points at a directory with results.jsonl.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from axiobench.axioms import (
    CHECK_IDS,
    CHECKS,
    COVERAGE_CHECKS,
    build_base_pool,
)
from axiobench.bench import (
    BASE_ROW,
    EMPTY_CELL,
    Row,
    RunConfig,
    STATUS_FAIL,
    STATUS_PASS,
    STATUS_SCORED,
    STATUS_SKIP,
    aggregate,
    build_manifest,
    build_plan,
    evaluate,
    evaluate_paths,
    load_plan,
    load_results,
    render_markdown,
    save_results,
)
from axiobench.combine import (
    combine_results,
    combined_check,
    correlate_base_scores,
    cross_validate,
    enumerate_simplex,
    grid_search_global,
    norm_stats,
)
from axiobench.corpus import SPACE_ABSTRACT, SPACE_TITLE, load_corpus, load_embeddings
from axiobench.metrics import (
    METRICS,
    MetricConfig,
    knn,
    lof,
    score_rnd,
    score_yin,
    semnovel_k,
)
from axiobench.synth import SYNTH_TASKS, SynthConfig, build_dataset, generate, plant_variant_embeddings
from axiobench.tsne import TsneConfig, run_tsne, tsne

from test_metrics import make_space, naive_lof, naive_rnd

DATA_ENV = "AXIOBENCH_DATA_DIR"


def verdict(name: str, problems: list[str], detail: str = "") -> None:
    """Print the one-line result for a criterion, then enforce it."""
    if problems:
        line = f"[FAIL] {name}: " + "; ".join(problems)
    else:
        line = f"[PASS] {name}" + (f"  ({detail})" if detail else "")
    print(line, flush=True)
    assert not problems, line


def check_rows(rows, metric, check):
    return [r for r in rows if r.metric == metric and r.check == check]


def test_planted_corpus(tmp_path):
    """Full-size synthetic run: the planted outcomes hold at 100% and the
    whole flow stays under a minute."""
    problems: list[str] = []
    t0 = time.perf_counter()
    paths = build_dataset(
        SynthConfig(), tmp_path / "planted", metrics=("yin", "rnd"), checks=("Ax1", "Ax2", "Ax4")
    )
    rows = evaluate_paths(str(paths["manifest"]), str(paths["plan"]))
    elapsed = time.perf_counter() - t0

    expected = 6 * 100  # tasks x focals per task
    for metric, check in (("yin", "Ax1"), ("yin", "Ax2"), ("yin", "Ax4"), ("rnd", "Ax4")):
        got = check_rows(rows, metric, check)
        if len(got) != expected:
            problems.append(f"{metric}/{check}: {len(got)} rows, expected {expected}")
        bad = [r for r in got if r.status != STATUS_PASS]
        if bad:
            problems.append(f"{metric}/{check}: {len(bad)} of {len(got)} not passing")
    sc = [r.scores.get("self_copy") for r in check_rows(rows, "yin", "Ax1")]
    if any(v != 0.0 for v in sc):
        problems.append("self-copy distance is not exactly 0.0 everywhere")

    # The distant pools must sit at cosine similarity <= 0.1 from every
    # focal, measured against the task's whole distant-task population.
    corpus = load_corpus(paths["corpus"])
    vectors = load_embeddings(paths["abstract"], SPACE_ABSTRACT)
    plan = load_plan(paths["plan"])
    worst = -1.0
    for spec in SYNTH_TASKS:
        focal_mat = np.stack([vectors.get(fid) for fid in plan.focals[spec.task]])
        distant_ids = [
            pid
            for pid in corpus.task_paper_ids(spec.distant_task)
            if not corpus.get(pid).is_reference_only and pid in vectors
        ]
        distant_mat = np.stack([vectors.get(pid) for pid in distant_ids])
        worst = max(worst, float((focal_mat @ distant_mat.T).max()))
    if worst > 0.1:
        problems.append(f"max focal-to-distant cosine {worst:.3f} > 0.1")
    if elapsed >= 60.0:
        problems.append(f"took {elapsed:.1f}s, budget 60s")
    verdict(
        "planted-corpus",
        problems,
        f"600/600 per check, distant cos <= {worst:.2f}, {elapsed:.1f}s",
    )


def test_density_oracles():
    """100 random pools: LOF within 1e-9 of the from-scratch oracle, the
    density rank and minimum-distance scores bit-equal to theirs."""
    problems: list[str] = []
    rng = np.random.default_rng(20260822)
    worst_lof = 0.0
    for trial in range(100):
        n = int(rng.integers(25, 51))
        d = int(rng.integers(2, 9))
        sv, ids = make_space(rng.standard_normal((n + 1, d)), prefix=f"t{trial}-")
        focal, pool = ids[-1], ids[:-1]

        X = np.stack([sv.get(p) for p in sorted(pool)] + [sv.get(focal)])
        gap = float(np.max(np.abs(lof(X, 20) - naive_lof(X, 20))))
        worst_lof = max(worst_lof, gap)
        if gap > 1e-9:
            problems.append(f"trial {trial}: LOF off by {gap:.2e}")
            break
        if score_rnd(sv, focal, pool, 10)[0] != naive_rnd(sv, focal, pool, 10):
            problems.append(f"trial {trial}: density rank differs from oracle")
            break
        dists = [1.0 - float(np.dot(sv.get(p), sv.get(focal))) for p in pool]
        want = min(0.0 if v < 1e-12 else v for v in dists)
        if score_yin(sv, focal, pool, 0.0) != want:
            problems.append(f"trial {trial}: minimum distance differs from oracle")
            break
    verdict("density-oracles", problems, f"100 pools, max LOF gap {worst_lof:.1e}")


def test_nearest_neighbor_identity():
    """The q=0 percentile score equals the 1-nearest-neighbor distance,
    bit for bit, on 1000 random pools."""
    problems: list[str] = []
    rng = np.random.default_rng(31)
    sv, ids = make_space(rng.standard_normal((400, 12)))
    for trial in range(1000):
        qi = int(rng.integers(0, len(ids)))
        others = ids[:qi] + ids[qi + 1:]
        n = int(rng.integers(1, 60))
        pool = [others[j] for j in rng.choice(len(others), size=n, replace=False)]
        nearest = knn(sv, sv.get(ids[qi]), pool, 1)
        if score_yin(sv, ids[qi], pool, 0.0) != nearest[0][1]:
            problems.append(f"trial {trial}: percentile != nearest neighbor")
            break
    verdict("nearest-neighbor-identity", problems, "1000 pools, exact")


def _planted_weight_rows() -> tuple[list[Row], dict[str, float]]:
    """Construct rows whose unique best weight vector is known.

    Base scores {0, 1, 2} give every (task, metric) the same scale, so a
    score difference of delta between a check's two variants contributes
    weight * delta / std to the combined margin.  Each planted focal
    targets one metric: the target's difference is -1 (pass direction)
    while every other metric pushes +beta, so the combined check passes
    exactly when the target weight exceeds theta = beta / (1 + beta).
    Thresholds sit halfway between grid points; counting passes per
    check makes the gains 13 x 1/39 for yin, 5 x 1/15 for the density
    rank, and 2 x 1/6 for the embedding-distance metric, so the greedy
    optimum (0.65, 0.25, 0.10, 0.00) is the unique grid maximizer.
    """
    task, domain = "t1", "D1"
    rows: list[Row] = []
    for metric in METRICS:
        for i, v in enumerate((0.0, 1.0, 2.0)):
            rows.append(
                Row(task, domain, f"cal-{i}", metric, BASE_ROW, STATUS_SCORED, None, {BASE_ROW: v})
            )
    targets = {"Ax1": ("yin", 13), "Ax2": ("rnd", 5), "Ax4": ("semnovel", 2)}
    for check, (target, count) in targets.items():
        lesser, greater = CHECKS[check].comparisons[0]
        for k in range(1, count + 1):
            theta = 0.05 * k - 0.025
            beta = theta / (1.0 - theta)
            for metric in METRICS:
                delta = -1.0 if metric == target else beta
                status = STATUS_PASS if delta < 0.0 else STATUS_FAIL
                rows.append(
                    Row(
                        task, domain, f"{check}-f{k:02d}", metric, check, status,
                        None, {greater: 1.0, lesser: 1.0 + delta},
                    )
                )
    return rows, {"yin": 0.65, "rnd": 0.25, "semnovel": 0.10, "ftlof": 0.0}


def test_weight_grid_recovery():
    """The 5%-step simplex over four metrics has 1771 vertices, and the
    sweep recovers a planted optimum that an exhaustive per-vertex
    recomputation confirms is unique."""
    problems: list[str] = []
    W = enumerate_simplex(4, 0.05)
    if W.shape != (1771, 4):
        problems.append(f"simplex shape {W.shape}, expected (1771, 4)")

    rows, expected = _planted_weight_rows()
    result = grid_search_global(rows, metrics=METRICS, step=0.05)
    for m in METRICS:
        if abs(result.weights[m] - expected[m]) > 1e-9:
            problems.append(f"weights {result.weights}, expected {expected}")
            break
    if result.objective != 100.0:
        problems.append(f"objective {result.objective}, expected 100.0")
    if any(result.check_rates.get(c) != 100.0 for c in ("Ax1", "Ax2", "Ax4")):
        problems.append(f"check rates {result.check_rates}, expected all 100.0")

    # Exhaustive oracle: decide every focal at every vertex through the
    # public single-focal path and rebuild the objective from counts.
    stats = norm_stats(rows)
    by_focal: dict[tuple[str, str], dict[str, dict]] = {}
    for r in rows:
        if r.check != BASE_ROW:
            by_focal.setdefault((r.check, r.focal), {})[r.metric] = dict(r.scores)
    objective = np.empty(len(W))
    for vi, w_vec in enumerate(W):
        weights = {m: float(w_vec[mi]) for mi, m in enumerate(METRICS)}
        rates = []
        for check in ("Ax1", "Ax2", "Ax4"):
            decided = passed = 0
            for (c, _focal), per_metric in by_focal.items():
                if c != check:
                    continue
                status, _ = combined_check(check, "t1", per_metric, weights, stats)
                if status in (STATUS_PASS, STATUS_FAIL):
                    decided += 1
                    passed += status == STATUS_PASS
            rates.append(100.0 * passed / decided)
        objective[vi] = float(np.mean(rates))
    peak = objective.max()
    argmax = np.flatnonzero(objective == peak)
    if len(argmax) != 1:
        problems.append(f"oracle optimum not unique: {len(argmax)} vertices at {peak:.2f}")
    else:
        oracle_w = {m: float(W[argmax[0], mi]) for mi, m in enumerate(METRICS)}
        if any(abs(oracle_w[m] - expected[m]) > 1e-9 for m in METRICS):
            problems.append(f"oracle optimum {oracle_w}, expected {expected}")
        if peak != 100.0:
            problems.append(f"oracle peak {peak}, expected 100.0")
    verdict(
        "weight-grid-recovery",
        problems,
        "1771 vertices, unique optimum (0.65, 0.25, 0.10, 0.00)",
    )


def test_neighborhood_size_rule():
    """2% of the pool with a floor of 10."""
    problems: list[str] = []
    for pool, want in ((1000, 20), (100, 10), (2000, 40)):
        got = semnovel_k(pool)
        if got != want:
            problems.append(f"K({pool}) = {got}, expected {want}")
    verdict("neighborhood-size-rule", problems, "K(1000)=20 K(100)=10 K(2000)=40")


def test_tsne_contract():
    """Determinism, divergence descent, cluster preservation, and the
    large-input time budget of the 2-d embedder."""
    problems: list[str] = []
    rng = np.random.default_rng(6)

    X = rng.standard_normal((80, 10))
    if run_tsne(X, TsneConfig()).coords.tobytes() != run_tsne(X, TsneConfig()).coords.tobytes():
        problems.append("same input and config produced different bytes")

    for trial in range(20):
        n = int(rng.integers(12, 60))
        d = int(rng.integers(3, 12))
        res = run_tsne(rng.standard_normal((n, d)), TsneConfig())
        if not np.isfinite(res.final_kl) or res.final_kl > res.initial_kl:
            problems.append(
                f"divergence rose on trial {trial}: {res.initial_kl:.4f} -> {res.final_kl:.4f}"
            )
            break

    crng = np.random.default_rng(7)
    a = crng.standard_normal((20, 10))
    b = crng.standard_normal((20, 10)) + 50.0
    Y = tsne(np.vstack([a, b]), TsneConfig(seed=1))
    within = max(
        np.linalg.norm(Y[:20, None] - Y[None, :20], axis=2).max(),
        np.linalg.norm(Y[20:, None] - Y[None, 20:], axis=2).max(),
    )
    between = np.linalg.norm(Y[:20, None] - Y[None, 20:], axis=2).min()
    if between <= within:
        problems.append(f"clusters merged in 2-d: between {between:.2f} <= within {within:.2f}")

    big = np.random.default_rng(15).standard_normal((1500, 16))
    t0 = time.perf_counter()
    big_res = run_tsne(big, TsneConfig())
    elapsed = time.perf_counter() - t0
    if elapsed >= 300.0:
        problems.append(f"n=1500 took {elapsed:.0f}s, budget 300s")
    if not np.isfinite(big_res.final_kl) or big_res.final_kl > big_res.initial_kl:
        problems.append("divergence rose on the n=1500 run")
    verdict("tsne-contract", problems, f"20 descents, n=1500 in {elapsed:.0f}s")


def test_determinism(tmp_path):
    """Generation, evaluation, and weight search are byte-stable across
    reruns and worker counts."""
    problems: list[str] = []
    cfg = SynthConfig(papers_per_task=60, focals_per_task=4, min_pool=20, seed=5)
    metrics = ("yin", "rnd")
    checks = ("Ax1", "Ax2", "Ax4", "Ax5", "Ax6")
    p1 = build_dataset(cfg, tmp_path / "r1", metrics=metrics, checks=checks)
    p2 = build_dataset(cfg, tmp_path / "r2", metrics=metrics, checks=checks)
    for name in sorted(p1):
        if Path(p1[name]).read_bytes() != Path(p2[name]).read_bytes():
            problems.append(f"{name} bytes differ between identical builds")

    def eval_run(workers: int) -> tuple[bytes, list[Row]]:
        rows = evaluate_paths(str(p1["manifest"]), str(p1["plan"]), workers=workers)
        out = tmp_path / f"rows-w{workers}.jsonl"
        save_results(rows, out)
        return out.read_bytes(), rows

    serial_a, rows_a = eval_run(1)
    serial_b, _ = eval_run(1)
    pooled, rows_c = eval_run(3)
    if serial_a != serial_b:
        problems.append("two serial evaluations differ")
    if serial_a != pooled:
        problems.append("worker evaluation differs from serial")

    doc_a = json.dumps(combine_results(rows_a, step=0.25), sort_keys=True)
    doc_b = json.dumps(combine_results(rows_c, step=0.25), sort_keys=True)
    if doc_a != doc_b:
        problems.append("weight-search report differs between runs")
    verdict("determinism", problems, "dataset, rows, and report byte-stable")


def _pick_focals(corpus) -> dict[str, list[str]]:
    """Per task: one early focal that decides the newest-slice check and
    one late focal that decides the oldest-slice check, both with enough
    in-pool references for the citation checks."""
    chosen: dict[str, list[str]] = {}
    for spec in SYNTH_TASKS:
        ordinary = [
            corpus.get(pid)
            for pid in corpus.task_paper_ids(spec.task)
            if not corpus.get(pid).is_reference_only
        ]
        years = np.array([p.year for p in ordinary])

        def fits(p, need_pool_over, need_newer_over):
            pool = build_base_pool(corpus, p.id).members
            if len(pool) <= need_pool_over:
                return False
            in_pool = set(p.refs) & set(pool)
            if len(in_pool) < 20:
                return False
            return int((years > p.year).sum()) > need_newer_over

        early = next(p for p in ordinary if fits(p, 50, 300))
        late = next(p for p in reversed(ordinary) if fits(p, 500, -1))
        chosen[spec.task] = [early.id, late.id]
    return chosen


def test_table_shapes():
    """A full four-metric, nine-check run fills every report cell except
    the excluded coverage column, and leave-one-domain-out per-check
    weight search produces all nine checks in all three folds."""
    problems: list[str] = []
    cfg = SynthConfig(papers_per_task=560, focals_per_task=1, seed=8)
    data = generate(cfg)
    config = RunConfig(
        tasks=SYNTH_TASKS,
        metrics=METRICS,
        checks=CHECK_IDS,
        seed=8,
        metric_config=MetricConfig(
            tsne=TsneConfig(iterations=50, exaggeration_iters=15, momentum_switch=15)
        ),
    )
    plan = build_plan(data.corpus, config, focals=_pick_focals(data.corpus))
    manifest = build_manifest(
        data.corpus, plan, "corpus.jsonl",
        {SPACE_ABSTRACT: "a.jsonl", SPACE_TITLE: "t.jsonl"},
    )
    abstract, title = plant_variant_embeddings(cfg, data, manifest)
    rows = evaluate(
        data.corpus, manifest, {SPACE_ABSTRACT: abstract, SPACE_TITLE: title}, plan
    )

    agg = aggregate(rows)
    if set(agg.checks) != set(CHECK_IDS) or len(agg.checks) != len(CHECK_IDS):
        problems.append(f"aggregate checks {agg.checks}")
    if agg.domains[-1] != "All" or len(agg.domains) != 4:
        problems.append(f"aggregate domains {agg.domains}")
    for domain in agg.domains:
        for metric in agg.metrics:
            for check in agg.checks:
                rate = agg.rates[(domain, metric, check)]
                expect_empty = metric == "ftlof" and check in COVERAGE_CHECKS
                if expect_empty and rate is not None:
                    problems.append(f"{domain}/{metric}/{check} filled, expected empty")
                if not expect_empty and rate is None:
                    problems.append(f"{domain}/{metric}/{check} empty")

    table = render_markdown(agg)
    for line in table.splitlines():
        if line.startswith("| ftlof "):
            if line.count(EMPTY_CELL) != len(COVERAGE_CHECKS):
                problems.append(f"ftlof row: {line!r}")
        elif line.startswith("|") and EMPTY_CELL in line:
            problems.append(f"unexpected empty cell: {line!r}")
    for check in CHECK_IDS:
        if check not in table:
            problems.append(f"{check} missing from table header")

    cv = cross_validate(rows, "per_axiom", step=0.25)
    if len(cv.folds) != 3:
        problems.append(f"{len(cv.folds)} folds, expected 3")
    for fold in cv.folds:
        if set(fold.per_check_weights) != set(CHECK_IDS):
            problems.append(f"fold {fold.held_out}: weights for {sorted(fold.per_check_weights)}")
        if set(fold.test_by_check) != set(CHECK_IDS):
            problems.append(f"fold {fold.held_out}: rates for {sorted(fold.test_by_check)}")
    verdict("table-shapes", problems, "36 filled cells per block, 3 folds x 9 checks")


def test_full_data():
    """Published-corpus tier: headline numbers from a real evaluation run.
    Needs AXIOBENCH_DATA_DIR; skipped otherwise."""
    root = os.environ.get(DATA_ENV)
    if not root:
        print(f"[SKIP] full-data (set {DATA_ENV} to a directory holding results.jsonl)", flush=True)
        pytest.skip(f"{DATA_ENV} not set")
    problems: list[str] = []
    rows = load_results(Path(root) / "results.jsonl")
    agg = aggregate(rows)

    def around(name, got, want, tol):
        if got is None or abs(got - want) > tol:
            problems.append(f"{name} = {got}, expected {want} +/- {tol}")

    around("yin avg", agg.avgs[("All", "yin")], 69.5, 3.0)
    around("rnd avg", agg.avgs[("All", "rnd")], 71.5, 3.0)
    around("global cv", cross_validate(rows, "global").overall_avg, 75.8, 3.0)
    around("per-check cv", cross_validate(rows, "per_axiom").overall_avg, 90.1, 3.0)

    corr = correlate_base_scores(rows)
    yi, ri = corr.metrics.index("yin"), corr.metrics.index("rnd")
    around("yin-rnd correlation", corr.values[yi][ri], 0.53, 0.1)

    ax8 = {m: agg.rates[("All", m, "Ax8")] for m in agg.metrics}
    best = max((v, m) for m, v in ax8.items() if v is not None)[1]
    if best != "semnovel":
        problems.append(f"best newest-slice metric {best}, expected semnovel")
    overall = {m: agg.avgs[("All", m)] for m in agg.metrics}
    weakest = min((v, m) for m, v in overall.items() if v is not None)[1]
    if weakest != "ftlof":
        problems.append(f"weakest metric {weakest}, expected ftlof")
    verdict("full-data", problems, "headline rates within tolerance")
