"""Command line interface.

Subcommands: synth | plan | eval | combine | report.

Exit codes: 0 success, 2 for bad inputs or arguments, 1 for unexpected
internal failures.  Warnings and progress go to stderr and are mirrored
into run.log next to the outputs.  AXIOBENCH_OUT provides the default
output directory when --out is omitted.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from axiobench.axioms import CHECK_IDS
from axiobench.bench import (
    RunConfig,
    aggregate,
    build_manifest,
    build_plan,
    evaluate_paths,
    load_results,
    render_csv,
    render_markdown,
    save_plan,
    save_results,
)
from axiobench.combine import combine_results
from axiobench.corpus import (
    SPACE_ABSTRACT,
    SPACE_TITLE,
    TaskSpec,
    load_corpus,
    save_manifest,
)
from axiobench.metrics import METRICS
from axiobench.synth import SynthConfig, build_dataset
from axiobench.util import InputError, atomic_write, read_json

# Named explicitly so `python -m axiobench.cli` logs the same way as the
# console script (__name__ is "__main__" in the former).
log = logging.getLogger("axiobench.cli")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args)
    try:
        return args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        return 2
    except Exception:
        log.exception("internal error")
        return 1


def _default_out() -> str | None:
    return os.environ.get("AXIOBENCH_OUT")


def _require_out(args: argparse.Namespace) -> Path:
    out = args.out or _default_out()
    if not out:
        raise InputError("no output location: pass --out or set AXIOBENCH_OUT")
    return Path(out)


def _out_file(args: argparse.Namespace, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    env = _default_out()
    if env:
        return Path(env) / default_name
    raise InputError("no output location: pass --out or set AXIOBENCH_OUT")


def _setup_logging(args: argparse.Namespace) -> None:
    root = logging.getLogger("axiobench")
    root.setLevel(logging.INFO)
    for h in list(root.handlers):
        root.removeHandler(h)
    fmt = logging.Formatter("%(levelname)s %(name)s: %(message)s")
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(fmt)
    root.addHandler(stream)
    log_dir: Path | None = None
    try:
        if getattr(args, "out", None):
            p = Path(args.out)
            log_dir = p if not p.suffix else p.parent
        elif _default_out():
            log_dir = Path(_default_out())
    except OSError:
        log_dir = None
    if log_dir is not None:
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
            fh = logging.FileHandler(log_dir / "run.log")
            fh.setFormatter(fmt)
            root.addHandler(fh)
        except OSError:
            log.warning("cannot open run.log under %s", log_dir)


def _split_csv(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axiobench",
        description="Axiomatic benchmark engine for scientific-novelty metrics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic oracle dataset")
    p_synth.add_argument("--out", help="output directory")
    p_synth.add_argument("--papers-per-task", type=int, default=200)
    p_synth.add_argument("--focals-per-task", type=int, default=100)
    p_synth.add_argument("--dim", type=int, default=32)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--min-pool", type=int, default=50)
    p_synth.add_argument("--metrics", type=_split_csv, default=METRICS)
    p_synth.add_argument("--checks", type=_split_csv, default=CHECK_IDS)
    p_synth.set_defaults(func=_cmd_synth)

    p_plan = sub.add_parser("plan", help="sample focals and emit plan + manifest")
    p_plan.add_argument("--corpus", required=True)
    p_plan.add_argument("--tasks-file", required=True, help="JSON list of task specs")
    p_plan.add_argument("--out", help="output directory")
    p_plan.add_argument("--focals-per-task", type=int, default=100)
    p_plan.add_argument("--seed", type=int, default=0)
    p_plan.add_argument("--min-pool", type=int, default=50)
    p_plan.add_argument("--metrics", type=_split_csv, default=METRICS)
    p_plan.add_argument("--checks", type=_split_csv, default=CHECK_IDS)
    p_plan.add_argument(
        "--abstract-embeddings", default="abstract-embed.jsonl",
        help="where the abstract-space vectors will live, relative to the manifest",
    )
    p_plan.add_argument(
        "--title-embeddings", default="title-embed.jsonl",
        help="where the title-space vectors will live, relative to the manifest",
    )
    p_plan.add_argument(
        "--focals-file", default="",
        help="JSON {task: [paper ids]} pinning the focals instead of sampling",
    )
    p_plan.set_defaults(func=_cmd_plan)

    p_eval = sub.add_parser("eval", help="score all planned checks")
    p_eval.add_argument("--plan", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--corpus", default="", help="override the manifest corpus path")
    p_eval.add_argument("--out", help="results file (JSONL)")
    p_eval.add_argument("--workers", type=int, default=1)
    p_eval.set_defaults(func=_cmd_eval)

    p_comb = sub.add_parser("combine", help="grid-search metric weights with CV")
    p_comb.add_argument("--results", required=True)
    p_comb.add_argument("--out", help="weights file (JSON)")
    p_comb.add_argument("--step", type=float, default=0.05)
    p_comb.add_argument("--metrics", type=_split_csv, default=None)
    p_comb.set_defaults(func=_cmd_combine)

    p_rep = sub.add_parser("report", help="aggregate results into tables")
    p_rep.add_argument("--results", required=True)
    p_rep.add_argument("--out", help="markdown report path")
    p_rep.add_argument("--csv", help="also write a CSV table here")
    p_rep.set_defaults(func=_cmd_report)

    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    out = _require_out(args)
    cfg = SynthConfig(
        papers_per_task=args.papers_per_task,
        focals_per_task=args.focals_per_task,
        dim=args.dim,
        seed=args.seed,
        min_pool=args.min_pool,
    )
    paths = build_dataset(cfg, out, metrics=args.metrics, checks=args.checks)
    log.info("synthetic dataset written to %s", out)
    for name, path in sorted(paths.items()):
        log.info("  %s: %s", name, path)
    return 0


def _load_task_specs(path: str) -> tuple[TaskSpec, ...]:
    doc = read_json(path)
    if not isinstance(doc, list) or not doc:
        raise InputError(f"{path}: expected a non-empty JSON list of task specs")
    specs = []
    for i, rec in enumerate(doc):
        try:
            specs.append(
                TaskSpec(
                    task=rec["task"],
                    domain=rec["domain"],
                    distant_task=rec["distant_task"],
                    distant_domain=rec["distant_domain"],
                )
            )
        except (KeyError, TypeError):
            raise InputError(f"{path}: entry {i} is not a valid task spec") from None
    return tuple(specs)


def _load_focals(path: str) -> dict[str, tuple[str, ...]] | None:
    if not path:
        return None
    doc = read_json(path)
    if not isinstance(doc, dict) or not all(
        isinstance(ids, list) and all(isinstance(i, str) for i in ids)
        for ids in doc.values()
    ):
        raise InputError(f"{path}: expected a JSON object mapping task to id lists")
    return {task: tuple(ids) for task, ids in doc.items()}


def _cmd_plan(args: argparse.Namespace) -> int:
    out = _require_out(args)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(args.corpus)
    config = RunConfig(
        tasks=_load_task_specs(args.tasks_file),
        metrics=args.metrics,
        checks=args.checks,
        focals_per_task=args.focals_per_task,
        seed=args.seed,
        min_pool=args.min_pool,
    )
    for spec in config.tasks:
        if not corpus.task_paper_ids(spec.task):
            raise InputError(f"corpus has no papers for task {spec.task!r}")
    plan = build_plan(corpus, config, _load_focals(args.focals_file))
    space_paths = {
        SPACE_ABSTRACT: args.abstract_embeddings,
        SPACE_TITLE: args.title_embeddings,
    }
    manifest = build_manifest(
        corpus,
        plan,
        os.path.relpath(os.path.abspath(args.corpus), out),
        {s: space_paths[s] for s in config.needed_spaces},
    )
    save_plan(plan, out / "plan.json")
    save_manifest(manifest, out / "manifest.json")
    log.info("plan written to %s", out / "plan.json")
    log.info(
        "manifest written to %s (%d registry entries)",
        out / "manifest.json",
        len(manifest.registry),
    )
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    out = _out_file(args, "results.jsonl")
    rows = evaluate_paths(
        args.manifest, args.plan, workers=args.workers, corpus_path=args.corpus
    )
    save_results(rows, out)
    n_skip = sum(1 for r in rows if r.status == "skip")
    log.info("wrote %d rows (%d skips) to %s", len(rows), n_skip, out)
    return 0


def _cmd_combine(args: argparse.Namespace) -> int:
    out = _out_file(args, "weights.json")
    rows = load_results(args.results)
    doc = combine_results(rows, metrics=args.metrics, step=args.step)
    atomic_write(out, json.dumps(doc, sort_keys=True, indent=1) + "\n")
    best = doc["global"]["folds"]
    log.info("combine wrote %s (%d folds)", out, len(best))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    out = _out_file(args, "report.md")
    rows = load_results(args.results)
    agg = aggregate(rows)
    atomic_write(out, render_markdown(agg) + "\n")
    log.info("report written to %s", out)
    if args.csv:
        atomic_write(args.csv, render_csv(agg))
        log.info("csv written to %s", args.csv)
    return 0


if __name__ == "__main__":
    sys.exit(main())
