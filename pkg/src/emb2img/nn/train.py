"""Training and evaluation loops over image datasets."""

from __future__ import annotations

import numpy as np

from ..errors import BatchTooSmall, NumericalDivergence
from ..types import ImageDataset
from .layers import cross_entropy
from .model import Model
from .optim import AdamState


def _batch_images(ds: ImageDataset, idx: np.ndarray) -> np.ndarray:
    return ds.pixels[idx].reshape(idx.size, 1, ds.grid_h, ds.grid_w)


def train_epoch(model: Model, ds: ImageDataset, opt: AdamState,
                batch_size: int, rng: np.random.Generator) -> dict:
    """One shuffled pass; returns the mean training loss.

    A trailing remainder of a single sample is skipped (batchnorm needs at
    least two), any larger remainder trains as a short batch.
    """
    if batch_size < 2:
        raise BatchTooSmall("batch size must be at least 2")
    order = rng.permutation(ds.n)
    losses = []
    for start in range(0, ds.n, batch_size):
        idx = order[start:start + batch_size]
        if idx.size < 2:
            break
        x = _batch_images(ds, idx)
        labels = ds.labels[idx].astype(np.int64)
        logits = model.forward(x, train=True)
        loss, dlogits = cross_entropy(logits, labels)
        if not np.isfinite(loss):
            raise NumericalDivergence(
                f"non-finite loss at batch starting {start}"
            )
        model.backward(dlogits)
        opt.apply(model.trainable_items())
        losses.append(loss)
    return {"train_loss": float(np.mean(losses)), "batches": len(losses)}


def evaluate(model: Model, ds: ImageDataset, batch_size: int = 256) -> float:
    """Fraction of correct predictions under eval-mode batchnorm."""
    correct = 0
    for start in range(0, ds.n, batch_size):
        idx = np.arange(start, min(start + batch_size, ds.n))
        logits = model.forward(_batch_images(ds, idx), train=False)
        predicted = logits.argmax(axis=1)
        correct += int((predicted == ds.labels[idx]).sum())
    return correct / ds.n
