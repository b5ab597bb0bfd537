"""From-scratch t-SNE over the transposed embedding matrix.

The d features of an n x d dataset become the m = d points to embed; each
point is its n-sample column. Affinities are perplexity-calibrated Gaussian
conditionals symmetrized into a joint distribution, and the 2D map minimizes
KL(P||Q) by momentum gradient descent with Student-t low-dimensional
affinities.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import BandwidthSearchFailed, InvalidInput, NumericalDivergence
from .types import EmbeddingMatrix

_PROB_FLOOR = 1e-12
_ENTROPY_TOL = 1e-5
_MAX_BISECTIONS = 200


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    n_iter: int = 1000
    learning_rate: float = 200.0
    early_exaggeration_factor: float = 12.0
    early_exaggeration_iters: int = 250
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    seed: int = 0

    def validate(self, n_points: int) -> None:
        if not (2 <= self.perplexity < n_points):
            raise InvalidInput(
                f"perplexity must be in [2, {n_points}), got {self.perplexity}"
            )
        if self.n_iter < 1 or self.learning_rate <= 0:
            raise InvalidInput("n_iter and learning_rate must be positive")
        if self.early_exaggeration_factor <= 0:
            raise InvalidInput("early exaggeration factor must be positive")
        if self.early_exaggeration_iters > self.n_iter:
            raise InvalidInput("early exaggeration cannot outlast the run")
        if self.momentum_switch_iter > self.n_iter:
            raise InvalidInput("momentum switch cannot happen after the run")
        for m in (self.momentum_initial, self.momentum_final):
            if not (0 <= m < 1):
                raise InvalidInput("momentum must lie in [0, 1)")


@dataclass(frozen=True)
class AffinityMatrix:
    """Symmetric joint probabilities with zero diagonal summing to one."""

    p: np.ndarray

    def __post_init__(self):
        p = self.p
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise InvalidInput("affinity matrix must be square")
        if not np.array_equal(p, p.T):
            raise InvalidInput("affinity matrix must be symmetric")
        if p.min() < 0 or np.diagonal(p).any():
            raise InvalidInput("affinities must be non-negative with zero diagonal")
        if abs(p.sum() - 1.0) > 1e-9:
            raise InvalidInput("affinities must sum to 1")


def transpose_to_features(m: EmbeddingMatrix) -> np.ndarray:
    """Feature matrix F = D^T: one row per feature, one column per sample."""
    return np.ascontiguousarray(m.values.T)


def pairwise_sq_dists(f: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between all row pairs.

    Computed row by row from explicit differences (never the Gram-matrix
    shortcut) so the result is exactly symmetric, exactly zero on the
    diagonal, and bit-identical to a naive per-pair evaluation.
    """
    f = np.asarray(f, dtype=np.float64)
    m = f.shape[0]
    out = np.empty((m, m), dtype=np.float64)
    for i in range(m):
        diff = f - f[i]
        out[i] = np.square(diff).sum(axis=1)
    return out


def _row_entropy_and_probs(d2_row: np.ndarray, beta: float):
    # Conditional P(.|i) at precision beta, with its Shannon entropy in bits.
    # Shifting by the row minimum cancels in the normalization but keeps the
    # largest weight at 1, so no precision underflows the whole row.
    weights = np.exp(-(d2_row - d2_row.min()) * beta)
    weights = np.maximum(weights, _PROB_FLOOR)
    probs = weights / weights.sum()
    entropy = -(probs * np.log2(probs)).sum()
    return entropy, probs


def conditional_affinities(d2: np.ndarray, perplexity: float) -> np.ndarray:
    """Per-row conditional distributions P(j|i) at calibrated bandwidths.

    Each row's Gaussian precision is bisected until the conditional
    distribution's Shannon entropy (base 2) matches log2(perplexity) within
    1e-5; rows that cannot reach the target in 200 bisections signal
    degenerate distances.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    m = d2.shape[0]
    if not (2 <= perplexity < m):
        raise InvalidInput(f"perplexity must be in [2, {m}), got {perplexity}")
    target = np.log2(perplexity)
    others = ~np.eye(m, dtype=bool)

    cond = np.zeros((m, m), dtype=np.float64)
    for i in range(m):
        row = d2[i][others[i]]
        beta, beta_min, beta_max = 1.0, 0.0, np.inf
        entropy, probs = _row_entropy_and_probs(row, beta)
        for _ in range(_MAX_BISECTIONS):
            if abs(entropy - target) <= _ENTROPY_TOL:
                break
            if entropy > target:
                beta_min = beta
                beta = beta * 2.0 if np.isinf(beta_max) else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
            entropy, probs = _row_entropy_and_probs(row, beta)
        else:
            raise BandwidthSearchFailed(
                f"row {i}: entropy {entropy:.6f} never reached "
                f"log2(perplexity)={target:.6f} in {_MAX_BISECTIONS} bisections"
            )
        cond[i][others[i]] = probs
    return cond


def calibrate_affinities(d2: np.ndarray, perplexity: float) -> AffinityMatrix:
    """Joint affinities (P(j|i) + P(i|j)) / 2m, renormalized to sum to one."""
    cond = conditional_affinities(d2, perplexity)
    m = cond.shape[0]
    joint = (cond + cond.T) / (2.0 * m)
    joint /= joint.sum()
    return AffinityMatrix(p=joint)


def kl_cost_and_grad(p: np.ndarray, coords: np.ndarray):
    """KL(P||Q) and its gradient for Student-t (one degree of freedom) Q."""
    d2 = pairwise_sq_dists(coords)
    kernel = 1.0 / (1.0 + d2)
    np.fill_diagonal(kernel, 0.0)
    q = np.maximum(kernel / kernel.sum(), _PROB_FLOOR)
    mask = p > 0
    kl = float((p[mask] * np.log(p[mask] / q[mask])).sum())
    # grad_i = 4 sum_j (p_ij - q_ij) kernel_ij (y_i - y_j)
    w = (p - q) * kernel
    grad = 4.0 * (w.sum(axis=1)[:, None] * coords - w @ coords)
    return kl, grad


def _initial_coords(f: np.ndarray, seed: int, std: float = 1e-2) -> np.ndarray:
    # Each point's draw is keyed by (seed, its own content), so identical
    # inputs get identical starts regardless of row order.
    rows = np.asarray(f, dtype=np.float64)
    seed_bytes = np.uint64(seed).tobytes()
    coords = np.empty((rows.shape[0], 2), dtype=np.float64)
    for i in range(rows.shape[0]):
        digest = hashlib.blake2b(
            seed_bytes + rows[i].tobytes(), digest_size=8
        ).digest()
        key = int.from_bytes(digest, "little")
        coords[i] = np.random.default_rng(key).standard_normal(2) * std
    return coords


def tsne_embed(
    f: np.ndarray,
    cfg: TsneConfig,
    return_history: bool = False,
):
    """Embed the rows of f into 2D. Deterministic for a fixed seed."""
    f = np.asarray(f, dtype=np.float64)
    m = f.shape[0]
    if m < 3:
        raise InvalidInput(f"need at least 3 points to embed, got {m}")
    cfg.validate(m)

    d2 = pairwise_sq_dists(f)
    p = calibrate_affinities(d2, cfg.perplexity).p

    coords = _initial_coords(f, cfg.seed)
    update = np.zeros_like(coords)
    history = np.empty(cfg.n_iter, dtype=np.float64)

    p_run = p * cfg.early_exaggeration_factor
    for it in range(cfg.n_iter):
        if it == cfg.early_exaggeration_iters:
            p_run = p
        momentum = (
            cfg.momentum_initial
            if it < cfg.momentum_switch_iter
            else cfg.momentum_final
        )
        kl, grad = kl_cost_and_grad(p_run, coords)
        update = momentum * update - cfg.learning_rate * grad
        coords = coords + update
        coords = coords - coords.mean(axis=0)
        if not (np.isfinite(kl) and np.isfinite(coords).all()):
            raise NumericalDivergence(f"non-finite state at iteration {it}")
        history[it] = kl

    if return_history:
        return coords, history
    return coords
