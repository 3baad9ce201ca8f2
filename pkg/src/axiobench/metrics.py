"""Novelty metrics over embedding spaces.

All four metrics are oriented the same way: higher score = more novel.

  yin       percentile (default 0th = minimum) of cosine distances from
            the focal document to the pool.
  rnd       relative neighborhood density: the fraction r of the focal's
            k nearest neighbors that are strictly sparser than the focal,
            reported as 1 - r.
  semnovel  sum of 2-d distances to the K nearest pool points after an
            exact t-SNE of pool + focal.
  ftlof     local outlier factor of the focal among title-space vectors.

Cosine distances are always computed through the scalar primitive
`cosine_distance` (one np.dot per pair over unit vectors), so exhaustive
recomputation with the same primitive reproduces every score bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from axiobench.corpus import SPACE_ABSTRACT, SPACE_TITLE
from axiobench.tsne import TsneConfig, run_tsne
from axiobench.util import InputError

METRIC_YIN = "yin"
METRIC_RND = "rnd"
METRIC_SEMNOVEL = "semnovel"
METRIC_FTLOF = "ftlof"
METRICS = (METRIC_YIN, METRIC_RND, METRIC_SEMNOVEL, METRIC_FTLOF)

_METRIC_SPACES = {
    METRIC_YIN: SPACE_ABSTRACT,
    METRIC_RND: SPACE_ABSTRACT,
    METRIC_SEMNOVEL: SPACE_ABSTRACT,
    METRIC_FTLOF: SPACE_TITLE,
}

_LOF_EPS = 1e-12
_DENSITY_EPS = 1e-12
# Distances below this are floating-point residue of a self-comparison.
_SNAP = 1e-12


@dataclass(frozen=True)
class MetricConfig:
    k_rnd: int = 10
    q_yin: float = 0.0
    lof_k: int = 20
    tsne: TsneConfig = TsneConfig()


def metric_space(metric: str) -> str:
    try:
        return _METRIC_SPACES[metric]
    except KeyError:
        raise InputError(f"unknown metric {metric!r}") from None


def min_pool_size(metric: str, config: MetricConfig) -> int:
    """Smallest pool a metric can score (the focal itself not counted)."""
    if metric == METRIC_YIN:
        return 1
    if metric == METRIC_RND:
        return config.k_rnd + 1
    if metric == METRIC_SEMNOVEL:
        return 3
    if metric == METRIC_FTLOF:
        return config.lof_k
    raise InputError(f"unknown metric {metric!r}")


class SpaceVectors:
    """Unit-normalized vectors for one space, keyed by document id."""

    def __init__(self, space: str):
        self.space = space
        self._unit: dict[str, np.ndarray] = {}

    def put(self, doc_id: str, vector: np.ndarray) -> None:
        v = np.asarray(vector, dtype=np.float64)
        norm = math.sqrt(float(np.dot(v, v)))
        if norm == 0.0 or not math.isfinite(norm):
            raise InputError(f"{self.space}: cannot normalize vector for {doc_id!r}")
        self._unit[doc_id] = v / norm

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._unit

    def __len__(self) -> int:
        return len(self._unit)

    def get(self, doc_id: str) -> np.ndarray:
        try:
            return self._unit[doc_id]
        except KeyError:
            raise InputError(f"{self.space}: no vector for {doc_id!r}") from None


def cosine_distance(u_hat: np.ndarray, v_hat: np.ndarray) -> float:
    """1 - cos over unit vectors.  Distances within 1e-12 of zero snap to
    exactly 0.0 so a document is at distance zero from its own copy."""
    d = 1.0 - float(np.dot(u_hat, v_hat))
    if d < _SNAP:
        return 0.0
    return d


def distance_row(vectors: SpaceVectors, query_hat: np.ndarray, pool_ids: Sequence[str]) -> np.ndarray:
    """Cosine distances from a query to each pool id, pool order kept.
    Deliberately a per-pair loop: one np.dot per entry, identical
    arithmetic to `cosine_distance`."""
    unit = vectors._unit
    dot = np.dot
    out = np.empty(len(pool_ids), dtype=np.float64)
    for i, pid in enumerate(pool_ids):
        out[i] = dot(unit[pid], query_hat)
    # 1 - x and the snap applied as ufuncs give the same float64 results
    # as doing both inside the loop, without the per-pair overhead.
    np.subtract(1.0, out, out=out)
    out[out < _SNAP] = 0.0
    return out


def knn(
    vectors: SpaceVectors, query_hat: np.ndarray, pool_ids: Sequence[str], k: int
) -> list[tuple[str, float]]:
    """The k nearest pool documents to a query vector, as (id, distance)
    sorted by distance with ties broken by id."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if k > len(pool_ids):
        raise InputError(f"k={k} exceeds pool size {len(pool_ids)}")
    dists = distance_row(vectors, query_hat, pool_ids)
    # lexsort(id, dist) orders by distance with ties broken by id: the
    # same total order as sorting (dist, id) tuples, minus the python
    # comparison overhead on large pools.
    order = np.lexsort((np.asarray(pool_ids), dists))
    return [(str(pool_ids[i]), float(dists[i])) for i in order[:k]]


def density(vectors: SpaceVectors, doc_id: str, pool_ids: Sequence[str], k: int) -> float:
    """Inverse mean distance to the k nearest pool documents, the
    document itself excluded."""
    others = [pid for pid in pool_ids if pid != doc_id]
    if k > len(others):
        raise InputError(
            f"density needs {k} neighbors but only {len(others)} pool documents remain"
        )
    nearest = knn(vectors, vectors.get(doc_id), others, k)
    mean_dist = float(np.mean(np.array([d for _, d in nearest])))
    return 1.0 / (_DENSITY_EPS + mean_dist)


def score_yin(
    vectors: SpaceVectors, focal_id: str, pool_ids: Sequence[str], q: float = 0.0
) -> float:
    """q-th percentile (linear interpolation) of focal-to-pool cosine
    distances.  q=0 is the minimum: the distance to the nearest pool
    document."""
    if not pool_ids:
        raise InputError("yin needs a non-empty pool")
    if not (0.0 <= q <= 100.0):
        raise InputError(f"percentile q must be in [0, 100], got {q}")
    dists = distance_row(vectors, vectors.get(focal_id), pool_ids)
    return float(np.percentile(dists, q))


def score_rnd(
    vectors: SpaceVectors, focal_id: str, pool_ids: Sequence[str], k: int = 10
) -> tuple[float, float]:
    """Relative neighborhood density.

    r = fraction of the focal's k nearest pool documents whose density
    (within the pool) is strictly below the focal's density over the
    pool.  Returns (1 - r, r).
    """
    if len(pool_ids) < k + 1:
        raise InputError(f"rnd with k={k} needs a pool of at least {k + 1}, got {len(pool_ids)}")
    focal_density = density_of_query(vectors, vectors.get(focal_id), pool_ids, k)
    neighbors = knn(vectors, vectors.get(focal_id), pool_ids, k)
    sparser = sum(
        1 for pid, _ in neighbors if density(vectors, pid, pool_ids, k) < focal_density
    )
    r = sparser / k
    return 1.0 - r, r


def density_of_query(
    vectors: SpaceVectors, query_hat: np.ndarray, pool_ids: Sequence[str], k: int
) -> float:
    """Density of an arbitrary query point over a pool (no self-exclusion;
    the query is not a pool member)."""
    if k > len(pool_ids):
        raise InputError(f"density needs {k} neighbors but pool has {len(pool_ids)}")
    nearest = knn(vectors, query_hat, pool_ids, k)
    mean_dist = float(np.mean(np.array([d for _, d in nearest])))
    return 1.0 / (_DENSITY_EPS + mean_dist)


def lof(points: np.ndarray, k: int) -> np.ndarray:
    """Local outlier factor for every row of points (Euclidean).

    Neighbor ties break toward the lower row index.  reach_k(a, b) =
    max(k-distance(b), d(a, b)); lrd is the inverse mean reachability;
    LOF(a) is the mean lrd ratio over a's k nearest neighbors.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("lof input must be a 2-d array")
    n = X.shape[0]
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if n < k + 1:
        raise InputError(f"lof with k={k} needs at least {k + 1} points, got {n}")

    sq = np.sum(X * X, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D2, 0.0, out=D2)
    D = np.sqrt(D2)
    np.fill_diagonal(D, np.inf)

    order = np.argsort(D, axis=1, kind="stable")
    nn = order[:, :k]
    rows = np.arange(n)[:, None]
    kdist = D[np.arange(n), order[:, k - 1]]

    reach = np.maximum(kdist[nn], D[rows, nn])
    lrd = 1.0 / (_LOF_EPS + reach.mean(axis=1))
    return lrd[nn].mean(axis=1) / lrd


def score_ftlof(
    vectors: SpaceVectors, focal_id: str, pool_ids: Sequence[str], k: int = 20
) -> float:
    """LOF of the focal among pool + focal title vectors."""
    if len(pool_ids) < k:
        raise InputError(f"ftlof with k={k} needs a pool of at least {k}, got {len(pool_ids)}")
    members = sorted(pool_ids)
    X = np.stack([vectors.get(pid) for pid in members] + [vectors.get(focal_id)])
    return float(lof(X, k)[-1])


def semnovel_k(pool_size: int) -> int:
    """Neighborhood size for the t-SNE distance sum: 2% of the pool,
    never below 10."""
    return max(10, int(0.02 * pool_size))


def score_semnovel(
    vectors: SpaceVectors,
    focal_id: str,
    pool_ids: Sequence[str],
    tsne_config: TsneConfig = TsneConfig(),
) -> float:
    """Embed pool + focal with exact t-SNE, then sum the focal's 2-d
    Euclidean distances to its K nearest pool points."""
    members = sorted(pool_ids)
    if len(members) < 3:
        raise InputError(f"semnovel needs a pool of at least 3, got {len(members)}")
    X = np.stack([vectors.get(pid) for pid in members] + [vectors.get(focal_id)])
    coords = run_tsne(X, tsne_config).coords
    deltas = coords[:-1] - coords[-1]
    dists = np.sqrt(np.sum(deltas * deltas, axis=1))
    K = min(semnovel_k(len(members)), len(members))
    ranked = sorted(zip(dists, members))
    return float(np.sum(np.array([d for d, _ in ranked[:K]])))
