"""Command line interface for the ingestion pipeline.

Subcommands: build-corpus | rephrase | embed.

The pipeline produces files the benchmark engine consumes directly: a
corpus in its JSONL format, a filled manifest, and one embedding file
per space.  build-corpus also writes the sampled focal ids to
focals.json; hand that file to the engine's plan step so the plan pins
exactly the papers whose references were fetched.

Exit codes: 0 success, 2 for bad inputs, unreachable services, or an
incomplete embedding run, 1 for unexpected internal failures.  Progress
and warnings go to stderr and are mirrored into run.log next to the
outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from axiobench.bench import load_plan, sample_focals
from axiobench.corpus import (
    Corpus,
    TaskSpec,
    load_corpus,
    load_manifest,
    save_corpus,
    save_embeddings,
    save_manifest,
)
from axiobench.util import InputError, atomic_write, read_json

from ingest.archive import ArchiveStats, load_merge_map, normalize_task, read_archive, select_papers
from ingest.config import load_config
from ingest.embed import embed_all, make_encoder
from ingest.net import HttpError
from ingest.refs import RefsStats, attach_references, make_client
from ingest.rephrase import generate_rephrases, make_chat_client

log = logging.getLogger("ingest.cli")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args)
    try:
        return args.func(args)
    except (InputError, HttpError) as exc:
        log.error("%s", exc)
        return 2
    except Exception:
        log.exception("internal error")
        return 1


def _setup_logging(args: argparse.Namespace) -> None:
    fmt = logging.Formatter("%(levelname)s %(name)s: %(message)s")
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(fmt)
    handlers: list[logging.Handler] = [stream]
    log_dir = _log_dir(args)
    if log_dir is not None:
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
            fh = logging.FileHandler(log_dir / "run.log")
            fh.setFormatter(fmt)
            handlers.append(fh)
        except OSError:
            log.warning("cannot open run.log under %s", log_dir)
    for name in ("ingest", "axiobench"):
        root = logging.getLogger(name)
        root.setLevel(logging.INFO)
        for h in list(root.handlers):
            root.removeHandler(h)
        for h in handlers:
            root.addHandler(h)


def _log_dir(args: argparse.Namespace) -> Path | None:
    if getattr(args, "out", None):
        return Path(args.out)
    if getattr(args, "manifest", None):
        return Path(args.manifest).parent
    return None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ingest",
        description="Corpus acquisition and embedding pipeline for the benchmark engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_corpus = sub.add_parser(
        "build-corpus", help="assemble the corpus from the archive and fetched references"
    )
    p_corpus.add_argument("--config", required=True, help="pipeline config (JSON)")
    p_corpus.add_argument("--tasks-file", required=True, help="JSON list of task specs")
    p_corpus.add_argument("--out", required=True, help="output directory")
    p_corpus.add_argument("--focals-per-task", type=int, default=100)
    p_corpus.add_argument("--seed", type=int, default=0)
    p_corpus.add_argument("--min-pool", type=int, default=50)
    p_corpus.set_defaults(func=_cmd_build_corpus)

    p_reph = sub.add_parser("rephrase", help="fill rephrase entries via the chat endpoint")
    p_reph.add_argument("--config", required=True)
    p_reph.add_argument("--manifest", required=True)
    p_reph.add_argument("--corpus", default="", help="override the manifest corpus path")
    p_reph.add_argument("--report", default="", help="quality report path")
    p_reph.set_defaults(func=_cmd_rephrase)

    p_embed = sub.add_parser("embed", help="compute both embedding spaces and validate")
    p_embed.add_argument("--config", required=True)
    p_embed.add_argument("--manifest", required=True)
    p_embed.add_argument("--plan", required=True)
    p_embed.add_argument("--corpus", default="", help="override the manifest corpus path")
    p_embed.set_defaults(func=_cmd_embed)

    return parser


def _load_task_specs(path: str) -> tuple[TaskSpec, ...]:
    doc = read_json(path)
    if not isinstance(doc, list) or not doc:
        raise InputError(f"{path}: expected a non-empty JSON list of task specs")
    specs = []
    for i, rec in enumerate(doc):
        try:
            spec = TaskSpec(
                task=rec["task"],
                domain=rec["domain"],
                distant_task=rec["distant_task"],
                distant_domain=rec["distant_domain"],
            )
        except (KeyError, TypeError):
            raise InputError(f"{path}: entry {i} is not a valid task spec") from None
        if spec.task != normalize_task(spec.task):
            raise InputError(
                f"{path}: task {spec.task!r} is not in normalized form "
                f"(use {normalize_task(spec.task)!r})"
            )
        specs.append(spec)
    return tuple(specs)


def _cmd_build_corpus(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    specs = _load_task_specs(args.tasks_file)
    wanted = [s.task for s in specs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    merge_map = load_merge_map(config.merge_map) if config.merge_map else {}
    stats = ArchiveStats()
    papers = select_papers(read_archive(config.archive, merge_map, stats), wanted, stats)
    log.info(
        "archive: %d records read, %d kept (%d off-task, %d without id, "
        "%d without year, %d duplicates, %d multi-task)",
        stats.read, stats.kept, stats.off_task, stats.no_id,
        stats.bad_year, stats.duplicates, stats.multi_task,
    )
    corpus = Corpus(papers)
    for spec in specs:
        if not corpus.task_paper_ids(spec.task):
            raise InputError(f"archive yields no papers for task {spec.task!r}")
        if not corpus.task_paper_ids(spec.distant_task):
            log.warning(
                "distant task %r has no papers; cross-domain checks will skip",
                spec.distant_task,
            )

    focals = {
        spec.task: sample_focals(
            corpus, spec.task, args.focals_per_task, args.seed, args.min_pool
        )
        for spec in specs
    }

    if config.refs_endpoint:
        refs_stats = RefsStats()
        papers = attach_references(papers, focals, make_client(config), refs_stats)
        log.info(
            "references: %d focals (%d failed), %d new papers, %d linked, %d dropped",
            refs_stats.focals, refs_stats.failed_focals, refs_stats.new_papers,
            refs_stats.linked_existing, refs_stats.dropped,
        )
    else:
        log.warning("no refs endpoint configured; corpus will carry no references")

    save_corpus(Corpus(papers), out / "corpus.jsonl")
    atomic_write(
        out / "focals.json",
        json.dumps({t: list(ids) for t, ids in sorted(focals.items())},
                   sort_keys=True, indent=1) + "\n",
    )
    log.info("corpus written to %s (%d papers)", out / "corpus.jsonl", len(papers))
    log.info("sampled focals written to %s", out / "focals.json")
    return 0


def _cmd_rephrase(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if not config.chat_endpoint:
        raise InputError("config has no chat_endpoint; rephrasing needs one")
    base = Path(args.manifest).parent
    manifest = load_manifest(args.manifest)
    corpus = load_corpus(args.corpus or base / manifest.corpus_path)
    encoder = make_encoder(config)
    report = generate_rephrases(
        manifest, corpus, config, encoder.encode, make_chat_client(config)
    )
    save_manifest(manifest, args.manifest)
    report_path = Path(args.report) if args.report else base / "rephrase-report.json"
    atomic_write(report_path, json.dumps(report.to_doc(), sort_keys=True, indent=1) + "\n")
    doc = report.to_doc()
    log.info(
        "rephrased %d of %d (means: rouge1 %s, cosine %s); report at %s",
        doc["filled"], doc["total"],
        _fmt_mean(doc["means"]["rouge1"]), _fmt_mean(doc["means"]["cosine"]),
        report_path,
    )
    return 0


def _fmt_mean(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def _cmd_embed(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    base = Path(args.manifest).parent
    manifest = load_manifest(args.manifest)
    plan = load_plan(args.plan)
    corpus = load_corpus(args.corpus or base / manifest.corpus_path)
    sets, report = embed_all(corpus, plan, manifest, config)
    for space, emb in sorted(sets.items()):
        if space not in manifest.spaces:
            raise InputError(f"manifest lists no file for space {space!r}")
        path = base / manifest.spaces[space]
        save_embeddings(emb, path)
        log.info("%s: %d vectors written to %s", space, len(emb), path)
    if not report.ok:
        for vid, space in report.validation.missing:
            log.error("unembedded: %s in %s", vid, space)
        log.error(
            "%d of %d required embeddings are missing",
            len(report.validation.missing), report.validation.required,
        )
        return 2
    log.info("all %d required embeddings resolve", report.validation.required)
    return 0


if __name__ == "__main__":
    sys.exit(main())
