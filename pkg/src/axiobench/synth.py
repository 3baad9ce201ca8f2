"""Synthetic oracle corpora with planted geometry.

The generator plants structure whose benchmark outcomes are provable:

  * Task clusters sit inside a 30-degree cap around one of six center
    directions (three orthogonal axes and their negatives).  Each task's
    designated distant task uses the antipodal center, so every focal is
    at cosine distance >= 1.18 (similarity <= 0.1, with margin) from the
    whole distant pool.
  * Ordinary papers within a task keep pairwise cosine distance >= 0.10.
  * Every sampled focal gets a family of 10 satellite papers at cosine
    distance 0.056..0.058, mutually >= 0.06 apart and >= 0.10 from every
    ordinary paper.  Satellites are reference-only papers cited by their
    focal, so a family appears in its own focal's candidate pool and
    nowhere else.  The focal's 10 nearest pool documents are therefore
    exactly its satellites (mean distance <= 0.058), while each satellite's
    own 10-neighbor mean is >= 0.064, making the focal strictly denser
    than all of its neighbors.
  * Rephrase vectors are built at cosine 0.95 to the focal, closer than
    any pool document (0.05 < 0.056) but farther than a self copy.

Consequences: the minimum-distance percentile passes the self-copy,
rephrase, and distant-pool checks with certainty, and the neighborhood
density metric passes the distant-pool check with certainty.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from axiobench.axioms import CHECK_IDS, build_base_pool
from axiobench.bench import (
    RunConfig,
    build_manifest,
    build_plan,
    sample_focals,
    save_plan,
)
from axiobench.corpus import (
    Corpus,
    EmbeddingSet,
    KIND_COVERAGE,
    KIND_REPHRASE,
    Manifest,
    Paper,
    SPACE_ABSTRACT,
    SPACE_TITLE,
    TaskSpec,
    save_corpus,
    save_embeddings,
    save_manifest,
)
from axiobench.metrics import METRICS
from axiobench.textops import tokenize
from axiobench.util import InputError, stable_seed

# Three orthogonal axes; each task's distant task is its antipode, and
# the pairing always crosses domains.
SYNTH_TASKS: tuple[TaskSpec, ...] = (
    TaskSpec("text-simplification", "NLP", "optical-flow", "CV"),
    TaskSpec("optical-flow", "CV", "text-simplification", "NLP"),
    TaskSpec("question-generation", "NLP", "drug-discovery", "Biomed"),
    TaskSpec("drug-discovery", "Biomed", "question-generation", "NLP"),
    TaskSpec("pose-estimation", "CV", "protein-folding", "Biomed"),
    TaskSpec("protein-folding", "Biomed", "pose-estimation", "CV"),
)

_TASK_AXES: dict[str, tuple[int, float]] = {
    "text-simplification": (0, 1.0),
    "optical-flow": (0, -1.0),
    "question-generation": (1, 1.0),
    "drug-discovery": (1, -1.0),
    "pose-estimation": (2, 1.0),
    "protein-folding": (2, -1.0),
}

_SHARED_WORDS = (
    "method approach results analysis model training evaluation dataset baseline "
    "experiments performance framework benchmark improvement study metric learning "
    "representation architecture objective comparison ablation setting"
).split()

_DOMAIN_WORDS = {
    "NLP": (
        "sentence token corpus parser grammar semantic syntax embedding language "
        "translation discourse lexical question answer summary paraphrase wording "
        "readability vocabulary phrase annotation"
    ).split(),
    "CV": (
        "pixel image frame motion camera depth segmentation detection tracking "
        "keypoint optical scene geometry pose occlusion texture resolution video "
        "landmark illumination contour"
    ).split(),
    "Biomed": (
        "protein molecule compound binding receptor assay pathway cell ligand "
        "structure folding residue sequence affinity docking enzyme clinical "
        "genomic target inhibitor"
    ).split(),
}


@dataclass(frozen=True)
class SynthConfig:
    papers_per_task: int = 200
    focals_per_task: int = 100
    dim: int = 32
    seed: int = 0
    first_year: int = 2006
    last_year: int = 2025
    refs_per_paper: int = 25
    min_pool: int = 50
    satellites: int = 10
    sat_lo: float = 0.056
    sat_hi: float = 0.058
    sibling_min: float = 0.06
    min_sep: float = 0.10
    cap_cos: float = 0.866
    rephrase_cos: float = 0.95

    def __post_init__(self) -> None:
        if self.papers_per_task < 2:
            raise InputError("papers_per_task must be >= 2")
        if self.focals_per_task < 1:
            raise InputError("focals_per_task must be >= 1")
        if self.dim < 8:
            raise InputError("dim must be >= 8 for the planted geometry to hold")
        if not (self.first_year < self.last_year):
            raise InputError("first_year must precede last_year")
        if not (0.0 < self.sat_lo < self.sat_hi < self.min_sep):
            raise InputError("satellite band must sit inside (0, min_sep)")


@dataclass
class SynthData:
    corpus: Corpus
    focals: dict[str, tuple[str, ...]]
    abstract_vectors: dict[str, np.ndarray]
    title_vectors: dict[str, np.ndarray]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / math.sqrt(float(np.dot(v, v)))


def _orthogonal_unit(rng: np.random.Generator, v: np.ndarray) -> np.ndarray:
    while True:
        g = rng.standard_normal(v.shape[0])
        g = g - float(np.dot(g, v)) * v
        norm = math.sqrt(float(np.dot(g, g)))
        if norm > 1e-6:
            return g / norm


def _at_cosine(rng: np.random.Generator, v: np.ndarray, cos_target: float) -> np.ndarray:
    e = _orthogonal_unit(rng, v)
    return cos_target * v + math.sqrt(max(0.0, 1.0 - cos_target * cos_target)) * e


def _centers(cfg: SynthConfig) -> np.ndarray:
    rng = np.random.default_rng(stable_seed(cfg.seed, "centers"))
    basis, _ = np.linalg.qr(rng.standard_normal((cfg.dim, 3)))
    return basis.T  # rows are orthonormal


def _sentence(rng: random.Random, words: Sequence[str], lo: int = 8, hi: int = 13) -> str:
    n = rng.randint(lo, hi)
    chosen = [rng.choice(words) for _ in range(n)]
    return chosen[0].capitalize() + " " + " ".join(chosen[1:]) + "."


def _make_text(rng: random.Random, domain: str) -> tuple[str, str]:
    words = _DOMAIN_WORDS[domain] + _SHARED_WORDS
    title = " ".join(rng.choice(words) for _ in range(rng.randint(4, 7))).capitalize()
    abstract = " ".join(_sentence(rng, words) for _ in range(rng.randint(4, 7)))
    return title, abstract


def generate(cfg: SynthConfig) -> SynthData:
    centers = _centers(cfg)
    tasks = sorted(t.task for t in SYNTH_TASKS)
    span = cfg.last_year - cfg.first_year + 1

    abstract_vectors: dict[str, np.ndarray] = {}
    title_vectors: dict[str, np.ndarray] = {}
    papers: list[Paper] = []
    task_matrix: dict[str, list[str]] = {t: [] for t in tasks}
    domain_of = {t.task: t.domain for t in SYNTH_TASKS}

    for task in tasks:
        axis, sign = _TASK_AXES[task]
        center = sign * centers[axis]
        rng = np.random.default_rng(stable_seed(cfg.seed, "vectors", task))
        rng_title = np.random.default_rng(stable_seed(cfg.seed, "title", task))
        accepted: list[np.ndarray] = []
        ids: list[str] = []
        for i in range(cfg.papers_per_task):
            vec = _sample_in_cap(rng, center, cfg, accepted)
            accepted.append(vec)
            pid = f"{task}-{i:04d}"
            ids.append(pid)
            year = cfg.first_year + (i * span) // cfg.papers_per_task
            text_rng = random.Random(stable_seed(cfg.seed, "text", pid))
            title, abstract = _make_text(text_rng, domain_of[task])
            refs_rng = random.Random(stable_seed(cfg.seed, "refs", pid))
            earlier = ids[:i]
            refs = tuple(
                sorted(refs_rng.sample(earlier, min(cfg.refs_per_paper, len(earlier))))
            )
            papers.append(Paper(pid, title, abstract, year, task, refs))
            abstract_vectors[pid] = vec
            title_vectors[pid] = _unit(center + 0.08 * rng_title.standard_normal(cfg.dim))
        task_matrix[task] = ids

    ordinary = Corpus(papers)
    focals = {
        task: sample_focals(ordinary, task, cfg.focals_per_task, cfg.seed, cfg.min_pool)
        for task in tasks
    }

    # Satellite families make every focal the densest point of its own
    # neighborhood.  Satellites are reference-only papers cited by their
    # focal, so they enter that focal's candidate pool through the
    # reference side and stay out of every other pool.
    ordinary_mat = np.stack([abstract_vectors[p.id] for p in papers])
    ordinary_idx = {p.id: i for i, p in enumerate(papers)}
    sat_papers: list[Paper] = []
    sat_ids_of: dict[str, list[str]] = {}
    for task in tasks:
        for focal_id in focals[task]:
            focal_paper = ordinary.get(focal_id)
            if focal_paper.year - 1 < cfg.first_year:
                raise InputError(f"focal {focal_id!r} is too early to host satellites")
            rng = np.random.default_rng(stable_seed(cfg.seed, "sat", focal_id))
            fvec = abstract_vectors[focal_id]
            siblings: list[np.ndarray] = []
            family = sat_ids_of.setdefault(focal_id, [])
            for j in range(cfg.satellites):
                vec = _sample_satellite(
                    rng, fvec, siblings, ordinary_mat, ordinary_idx[focal_id], cfg
                )
                siblings.append(vec)
                sid = f"sat-{focal_id}-{j}"
                family.append(sid)
                text_rng = random.Random(stable_seed(cfg.seed, "text", sid))
                title, abstract = _make_text(text_rng, domain_of[task])
                sat_papers.append(
                    Paper(
                        sid, title, abstract, focal_paper.year - 1, task, (),
                        is_reference_only=True,
                    )
                )
                abstract_vectors[sid] = vec
                title_vectors[sid] = _unit(
                    (_TASK_AXES[task][1] * centers[_TASK_AXES[task][0]])
                    + 0.08 * rng.standard_normal(cfg.dim)
                )

    final_papers = [
        replace(p, refs=tuple(sorted(set(p.refs) | set(sat_ids_of[p.id]))))
        if p.id in sat_ids_of
        else p
        for p in papers
    ]
    corpus = Corpus(final_papers + sat_papers)
    data = SynthData(corpus, focals, abstract_vectors, title_vectors)
    _verify_plant(cfg, data)
    return data


def _sample_in_cap(
    rng: np.random.Generator, center: np.ndarray, cfg: SynthConfig, accepted: list[np.ndarray]
) -> np.ndarray:
    block = np.stack(accepted) if accepted else None
    for _ in range(4000):
        vec = _unit(center + 0.08 * rng.standard_normal(cfg.dim))
        if float(np.dot(vec, center)) < cfg.cap_cos:
            continue
        if block is not None and float(np.max(block @ vec)) > 1.0 - cfg.min_sep:
            continue
        return vec
    raise InputError(
        "could not place a task paper inside the cluster cap; "
        "lower papers_per_task or min_sep"
    )


def _sample_satellite(
    rng: np.random.Generator,
    fvec: np.ndarray,
    siblings: list[np.ndarray],
    ordinary_mat: np.ndarray,
    focal_row: int,
    cfg: SynthConfig,
) -> np.ndarray:
    for _ in range(4000):
        delta = rng.uniform(cfg.sat_lo, cfg.sat_hi)
        vec = _unit(_at_cosine(rng, fvec, 1.0 - delta))
        d_focal = 1.0 - float(np.dot(vec, fvec))
        if not (cfg.sat_lo - 1e-12 <= d_focal <= cfg.sat_hi + 1e-12):
            continue
        if siblings and float(np.max(np.stack(siblings) @ vec)) > 1.0 - cfg.sibling_min:
            continue
        dots = ordinary_mat @ vec
        dots[focal_row] = -np.inf
        if float(dots.max()) > 1.0 - cfg.min_sep:
            continue
        return vec
    raise InputError("could not place a satellite; geometry constraints too tight")


def _verify_plant(cfg: SynthConfig, data: SynthData) -> None:
    """Numeric verification of the planted guarantees at build time."""
    distant_of = {t.task: t.distant_task for t in SYNTH_TASKS}
    members_by_task: dict[str, list[str]] = {}
    for p in data.corpus:
        members_by_task.setdefault(p.task, []).append(p.id)
    mats = {
        t: np.stack([data.abstract_vectors[pid] for pid in ids])
        for t, ids in members_by_task.items()
    }
    for task, focal_ids in data.focals.items():
        distant_mat = mats[distant_of[task]]
        for focal_id in focal_ids:
            fvec = data.abstract_vectors[focal_id]
            pool = build_base_pool(data.corpus, focal_id).members
            dists = 1.0 - np.stack([data.abstract_vectors[m] for m in pool]) @ fvec
            nearest = np.sort(dists)
            k = cfg.satellites
            if not (
                cfg.sat_lo - 1e-9 <= nearest[0]
                and nearest[k - 1] <= cfg.sat_hi + 1e-9
                and nearest[k] >= cfg.min_sep - 1e-9
            ):
                raise InputError(f"satellite plant violated for focal {focal_id!r}")
            if float(np.min(1.0 - distant_mat @ fvec)) < 0.9:
                raise InputError(f"distant separation violated for focal {focal_id!r}")


def plant_variant_embeddings(
    cfg: SynthConfig, data: SynthData, manifest: Manifest
) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Embed the registry: originals from the generator, rephrases at the
    planted cosine, coverage hosts as a token-weighted blend of host and
    focal.  Self copies resolve through their base vector."""
    abstract = EmbeddingSet(SPACE_ABSTRACT, {})
    title = EmbeddingSet(SPACE_TITLE, {})
    for vid, entry in sorted(manifest.registry.items()):
        if entry.kind == "original":
            abstract.add(vid, data.abstract_vectors[vid])
            title.add(vid, data.title_vectors[vid])
        elif entry.kind == KIND_REPHRASE:
            focal_id = entry.base_id
            rng_a = np.random.default_rng(
                stable_seed(cfg.seed, "rephrase", focal_id, SPACE_ABSTRACT)
            )
            rng_t = np.random.default_rng(
                stable_seed(cfg.seed, "rephrase", focal_id, SPACE_TITLE)
            )
            abstract.add(
                vid, _at_cosine(rng_a, data.abstract_vectors[focal_id], cfg.rephrase_cos)
            )
            title.add(
                vid, _at_cosine(rng_t, data.title_vectors[focal_id], cfg.rephrase_cos)
            )
        elif entry.kind == KIND_COVERAGE:
            host_id = entry.base_id
            focal_id = vid.split("::")[1]
            host_text = data.corpus.get(host_id).abstract
            appended = entry.text[len(host_text):]
            lam = len(tokenize(appended)) / max(1, len(tokenize(entry.text)))
            blend = (1.0 - lam) * data.abstract_vectors[host_id] + lam * data.abstract_vectors[
                focal_id
            ]
            abstract.add(vid, _unit(blend))
    return abstract, title


def build_dataset(
    cfg: SynthConfig,
    out_dir: str | Path,
    metrics: Sequence[str] = METRICS,
    checks: Sequence[str] = CHECK_IDS,
) -> dict[str, Path]:
    """Generate a corpus, plan, manifest, and embedding files under
    out_dir.  Returns the paths keyed by artifact name."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(cfg)

    run_config = RunConfig(
        tasks=SYNTH_TASKS,
        metrics=tuple(metrics),
        checks=tuple(checks),
        focals_per_task=cfg.focals_per_task,
        seed=cfg.seed,
        min_pool=cfg.min_pool,
    )
    plan = build_plan(data.corpus, run_config, focals=data.focals)
    space_files = {SPACE_ABSTRACT: "abstract-embed.jsonl", SPACE_TITLE: "title-embed.jsonl"}
    manifest = build_manifest(
        data.corpus,
        plan,
        "corpus.jsonl",
        {s: space_files[s] for s in run_config.needed_spaces},
    )
    abstract, title = plant_variant_embeddings(cfg, data, manifest)

    paths = {
        "corpus": out / "corpus.jsonl",
        "manifest": out / "manifest.json",
        "plan": out / "plan.json",
    }
    save_corpus(data.corpus, paths["corpus"])
    if SPACE_ABSTRACT in run_config.needed_spaces:
        paths["abstract"] = out / space_files[SPACE_ABSTRACT]
        save_embeddings(abstract, paths["abstract"])
    if SPACE_TITLE in run_config.needed_spaces:
        paths["title"] = out / space_files[SPACE_TITLE]
        save_embeddings(title, paths["title"])
    save_manifest(manifest, paths["manifest"])
    save_plan(plan, paths["plan"])
    return paths
