"""Exact t-SNE (no tree approximation), deterministic for a fixed seed.

The embedding recipe is fixed: conditional Gaussian affinities found by
per-point bandwidth bisection, symmetrized and uniformly mixed; Student-t
low-dimensional kernel; gradient descent with early exaggeration and a
momentum switch, without per-parameter gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from axiobench.util import InputError

_EPS = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    dims: int = 2
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    perplexity_tol: float = 1e-5
    max_bisect: int = 50
    init_scale: float = 1e-4
    seed: int = 0


@dataclass(frozen=True)
class TsneResult:
    coords: np.ndarray
    initial_kl: float
    final_kl: float
    perplexity_used: float


def tsne(points: np.ndarray, config: TsneConfig = TsneConfig()) -> np.ndarray:
    """Embed points into config.dims dimensions; returns (n, dims)."""
    return run_tsne(points, config).coords


def run_tsne(points: np.ndarray, config: TsneConfig = TsneConfig()) -> TsneResult:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("t-SNE input must be a 2-d array (n points x features)")
    n = X.shape[0]
    if n < 4:
        raise InputError(f"t-SNE needs at least 4 points, got {n}")
    if not np.all(np.isfinite(X)):
        raise InputError("t-SNE input contains non-finite values")
    if config.iterations < 1:
        raise InputError("t-SNE needs at least one iteration")

    # The perplexity cannot exceed what n-1 neighbors support.
    perplexity = min(float(config.perplexity), float((n - 1) // 3))
    perplexity = max(perplexity, 1.0)

    P = _joint_probabilities(
        _pairwise_sq_dists(X), perplexity, config.perplexity_tol, config.max_bisect
    )

    rng = np.random.default_rng(config.seed)
    Y = rng.standard_normal((n, config.dims)) * config.init_scale
    update = np.zeros_like(Y)
    # Per-coordinate adaptive gains keep the fixed learning rate from
    # oscillating on small inputs: grow a gain while the gradient keeps
    # its direction, shrink it when the direction flips.
    gains = np.ones_like(Y)

    initial_kl = _kl_divergence(P, Y)
    for t in range(config.iterations):
        exaggerate = t < config.exaggeration_iters
        momentum = config.momentum_start if t < config.momentum_switch else config.momentum_final

        num, Z = _student_t_kernel(Y)
        Q_unnorm = num / Z
        P_eff = P * config.early_exaggeration if exaggerate else P
        W = (P_eff - Q_unnorm) * num
        grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)

        same_direction = (grad > 0.0) == (update > 0.0)
        gains = np.where(same_direction, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)

        update = momentum * update - config.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)

    final_kl = _kl_divergence(P, Y)
    return TsneResult(
        coords=Y, initial_kl=initial_kl, final_kl=final_kl, perplexity_used=perplexity
    )


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D2, 0.0, out=D2)
    np.fill_diagonal(D2, 0.0)
    return D2


def _joint_probabilities(
    D2: np.ndarray, perplexity: float, tol: float, max_bisect: int
) -> np.ndarray:
    """Symmetrized affinities; each conditional row is tuned by bisecting
    the Gaussian precision until its entropy matches log(perplexity)."""
    n = D2.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        d2 = np.delete(D2[i], i)
        beta = 1.0
        beta_min, beta_max = -np.inf, np.inf
        row = np.full(d2.shape, 1.0 / (n - 1))
        for _ in range(max_bisect):
            w = np.exp(-d2 * beta)
            total = w.sum()
            if total <= 0.0:
                entropy = 0.0
                row = np.zeros_like(d2)
            else:
                row = w / total
                entropy = np.log(total) + beta * float(np.dot(d2, w)) / total
            diff = entropy - target
            if abs(diff) < tol:
                break
            if diff > 0.0:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        P[i, np.arange(n) != i] = row
    P = (P + P.T) / (2.0 * n)
    return P


def _student_t_kernel(Y: np.ndarray) -> tuple[np.ndarray, float]:
    D2 = _pairwise_sq_dists(Y)
    num = 1.0 / (1.0 + D2)
    np.fill_diagonal(num, 0.0)
    return num, max(num.sum(), _EPS)


def _kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    num, Z = _student_t_kernel(Y)
    Q = num / Z
    mask = ~np.eye(P.shape[0], dtype=bool)
    p = np.maximum(P[mask], _EPS)
    q = np.maximum(Q[mask], _EPS)
    return float(np.sum(P[mask] * np.log(p / q)))
