"""Map rotated feature coordinates onto a pixel grid and render images.

Each feature lands on the nearest grid cell after min-max scaling; features
sharing a cell are averaged when a sample is rendered, and empty cells stay
at zero. Z-normalization centers the joint pixel distribution of the whole
dataset.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import LengthMismatch, ZeroExtent
from .types import EmbeddingMatrix, FeatureLayout, ImageDataset, NormalizationStats

DEFAULT_EPSILON = 1e-8


def worker_count() -> int:
    """Worker cap from EMB2IMG_THREADS; defaults to single-threaded."""
    try:
        return max(1, int(os.environ.get("EMB2IMG_THREADS", "1")))
    except ValueError:
        return 1


def _round_half_away(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def build_layout(
    coords: np.ndarray,
    grid_w: int,
    grid_h: int,
    seed: int = 0,
    config_hash: int = 0,
) -> FeatureLayout:
    """Assign each 2D coordinate to a grid cell by min-max scaling + rounding."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise LengthMismatch(f"expected (m, 2) coordinates, got {coords.shape}")
    x, y = coords[:, 0], coords[:, 1]
    x_extent = x.max() - x.min()
    y_extent = y.max() - y.min()
    if x_extent == 0 or y_extent == 0:
        raise ZeroExtent("coordinates have zero extent along an axis")
    col = _round_half_away((x - x.min()) / x_extent * (grid_w - 1)).astype(np.int64)
    row = _round_half_away((y - y.min()) / y_extent * (grid_h - 1)).astype(np.int64)
    return FeatureLayout(
        grid_w=grid_w, grid_h=grid_h,
        assignments=row * grid_w + col,
        seed=seed, config_hash=config_hash,
    )


def render_sample(x: np.ndarray, layout: FeatureLayout) -> np.ndarray:
    """One grayscale image: each pixel averages the features assigned to it."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != layout.d:
        raise LengthMismatch(
            f"feature vector has {x.size} values, layout expects {layout.d}"
        )
    n_cells = layout.grid_w * layout.grid_h
    sums = np.bincount(layout.assignments, weights=x, minlength=n_cells)
    counts = layout.density.ravel().astype(np.float64)
    image = np.divide(sums, counts, out=np.zeros(n_cells), where=counts > 0)
    return image.reshape(layout.grid_h, layout.grid_w).astype(np.float32)


def render_dataset(m: EmbeddingMatrix, layout: FeatureLayout) -> ImageDataset:
    """Render every sample; embarrassingly parallel over disjoint output rows."""
    if m.d != layout.d:
        raise LengthMismatch(
            f"embeddings have {m.d} features, layout expects {layout.d}"
        )
    pixels = np.empty((m.n, layout.grid_h * layout.grid_w), dtype=np.float32)

    def fill(lo: int, hi: int):
        for i in range(lo, hi):
            pixels[i] = render_sample(m.values[i], layout).ravel()

    workers = min(worker_count(), m.n)
    if workers <= 1:
        fill(0, m.n)
    else:
        bounds = np.linspace(0, m.n, workers + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(fill, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            for fut in futures:
                fut.result()

    return ImageDataset(
        grid_w=layout.grid_w, grid_h=layout.grid_h,
        pixels=pixels, labels=m.labels,
    )


def z_normalize(ds: ImageDataset, epsilon: float = DEFAULT_EPSILON) -> ImageDataset:
    """Center and scale all pixels jointly: (x - mu) / (sigma + epsilon).

    mu and sigma are the mean and population standard deviation of every
    pixel of every image taken together.
    """
    if ds.norm_stats is not None:
        raise ValueError("dataset is already normalized")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    flat = ds.pixels.astype(np.float64)
    mu = float(flat.mean())
    sigma = float(flat.std())
    normalized = ((flat - mu) / (sigma + epsilon)).astype(np.float32)
    return ImageDataset(
        grid_w=ds.grid_w, grid_h=ds.grid_h,
        pixels=normalized, labels=ds.labels,
        norm_stats=NormalizationStats(mu=mu, sigma=sigma, epsilon=epsilon),
    )
