"""End-to-end operations behind the service endpoints and CLI subcommands.

Every operation is a pure function of its input files, flags, and seed:
rerunning writes byte-identical outputs. Each returns a JSON-serializable
summary echoing the configuration it ran with.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict

import numpy as np
from PIL import Image

from . import formats, nn, raster
from .errors import IndexOutOfRange, InvalidInput, LengthMismatch
from .geometry import convex_hull, min_area_rect, rotate_to_horizontal
from .tsne import TsneConfig, transpose_to_features, tsne_embed
from .types import ImageDataset


def config_hash(cfg: TsneConfig, grid_w: int, grid_h: int) -> int:
    """Stable 64-bit digest of the layout configuration, for provenance."""
    canon = json.dumps(
        {"grid_w": grid_w, "grid_h": grid_h, **asdict(cfg)},
        sort_keys=True,
    )
    digest = hashlib.blake2b(canon.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def run_layout(embeddings_path: str, out_path: str,
               grid_w: int = 50, grid_h: int = 50,
               cfg: TsneConfig = TsneConfig()) -> dict:
    """Fit a feature layout: transpose, project with t-SNE, frame, rasterize."""
    emb = formats.load_embeddings(embeddings_path)
    features = transpose_to_features(emb)
    coords = tsne_embed(features, cfg)
    hull = convex_hull(coords)
    rect = min_area_rect(hull)
    rotated, _ = rotate_to_horizontal(coords, rect)
    layout = raster.build_layout(
        rotated, grid_w, grid_h,
        seed=cfg.seed, config_hash=config_hash(cfg, grid_w, grid_h),
    )
    formats.save_layout(layout, out_path)
    density = layout.density
    return {
        "out_path": str(out_path),
        "grid_w": grid_w,
        "grid_h": grid_h,
        "d": layout.d,
        "seed": cfg.seed,
        "config_hash": layout.config_hash,
        "density": {
            "total": int(density.sum()),
            "occupied_cells": int((density > 0).sum()),
            "max_per_cell": int(density.max()),
        },
        "tsne": asdict(cfg),
    }


def run_render(embeddings_path: str, layout_path: str, out_path: str,
               normalize: bool = False,
               epsilon: float = raster.DEFAULT_EPSILON) -> dict:
    """Render one image per sample through a fitted layout."""
    emb = formats.load_embeddings(embeddings_path)
    layout = formats.load_layout(layout_path)
    ds = raster.render_dataset(emb, layout)
    if normalize:
        ds = raster.z_normalize(ds, epsilon)
    formats.save_images(ds, out_path)
    out = {
        "out_path": str(out_path),
        "n": ds.n,
        "grid_w": ds.grid_w,
        "grid_h": ds.grid_h,
        "normalized": normalize,
    }
    if ds.norm_stats is not None:
        out["stats"] = {
            "mu": ds.norm_stats.mu,
            "sigma": ds.norm_stats.sigma,
            "epsilon": ds.norm_stats.epsilon,
        }
    return out


def _split_indices(n: int, split: float, rng: np.random.Generator):
    if not 0 < split < 1:
        raise InvalidInput(f"split must be in (0, 1), got {split}")
    order = rng.permutation(n)
    cut = int(round(split * n))
    if cut < 2 or n - cut < 1:
        raise InvalidInput(f"split {split} leaves too few samples on one side")
    return order[:cut], order[cut:]


def _take(ds, idx):
    # A subset is not globally centered, so it does not inherit the stats;
    # normalization was already checked on the full dataset.
    return ImageDataset(
        grid_w=ds.grid_w, grid_h=ds.grid_h,
        pixels=ds.pixels[idx], labels=ds.labels[idx],
    )


def run_train(images_path: str, out_checkpoint: str, out_metrics: str,
              weights_path: str | None = None, spec: str = "none",
              cae_lr: float | None = None, lc_lr: float | None = None,
              epochs: int = 15, batch_size: int = 32,
              split: float = 0.8, seed: int = 0) -> dict:
    """Split, train, and checkpoint the extractor + autoencoder + classifier."""
    ds = formats.load_images(images_path)
    if ds.norm_stats is None:
        raise InvalidInput(
            "training expects a normalized dataset (render with --normalize)"
        )
    if spec not in nn.LEARNING_RATES:
        raise InvalidInput(
            f"unknown model spec {spec!r}; choose from {sorted(nn.LEARNING_RATES)}"
        )
    default_cae, default_lc = nn.LEARNING_RATES[spec]
    cae_lr = default_cae if cae_lr is None else cae_lr
    lc_lr = default_lc if lc_lr is None else lc_lr

    weights = formats.load_tensors(weights_path) if weights_path else None
    if spec != "none" and weights is None:
        raise InvalidInput(f"spec {spec!r} has a frozen extractor; pass --weights")

    init_seed, split_seed, shuffle_seed = np.random.SeedSequence(seed).spawn(3)
    model_spec = nn.default_model_spec(ds.grid_h, ds.grid_w, extractor=spec)
    model = nn.build_model(
        model_spec, weights=weights,
        seed=init_seed.generate_state(1)[0],
    )
    opt = nn.AdamState({"ext": 0.0, "cae": cae_lr, "clf": lc_lr})

    train_idx, val_idx = _split_indices(
        ds.n, split, np.random.default_rng(split_seed)
    )
    train_ds, val_ds = _take(ds, train_idx), _take(ds, val_idx)

    shuffle_rng = np.random.default_rng(shuffle_seed)
    config = {
        "images_path": str(images_path), "spec": spec,
        "cae_lr": cae_lr, "lc_lr": lc_lr, "epochs": epochs,
        "batch_size": batch_size, "split": split, "seed": seed,
        "weights_path": str(weights_path) if weights_path else None,
    }
    history = []
    lines = [json.dumps({"config": config}, sort_keys=True)]
    for epoch in range(1, epochs + 1):
        stats = nn.train_epoch(model, train_ds, opt, batch_size, shuffle_rng)
        val_accuracy = nn.evaluate(model, val_ds)
        record = {
            "epoch": epoch,
            "train_loss": stats["train_loss"],
            "val_accuracy": val_accuracy,
        }
        history.append(record)
        lines.append(json.dumps(record, sort_keys=True))

    formats.save_tensors(model.state_store(), out_checkpoint)
    with open(out_metrics, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    return {
        "checkpoint": str(out_checkpoint),
        "metrics_path": str(out_metrics),
        "config": config,
        "history": history,
        "final_val_accuracy": history[-1]["val_accuracy"] if history else None,
        "train_samples": int(train_idx.size),
        "val_samples": int(val_idx.size),
    }


def run_eval(images_path: str, checkpoint_path: str) -> dict:
    """Accuracy of a checkpointed model over every image in the file."""
    ds = formats.load_images(images_path)
    store = formats.load_tensors(checkpoint_path)
    model_spec = nn.decode_arch(store)
    if (model_spec.grid_h, model_spec.grid_w) != (ds.grid_h, ds.grid_w):
        raise LengthMismatch(
            f"checkpoint expects {model_spec.grid_h}x{model_spec.grid_w} images, "
            f"file has {ds.grid_h}x{ds.grid_w}"
        )
    model = nn.build_model(model_spec, weights=store, seed=0)
    model.load_state(store)
    accuracy = nn.evaluate(model, ds)
    return {"accuracy": accuracy, "n": ds.n}


def run_inspect(images_path: str, index: int, out_path: str) -> dict:
    """Write one image as an 8-bit grayscale PNG, min-max scaled."""
    ds = formats.load_images(images_path)
    if not 0 <= index < ds.n:
        raise IndexOutOfRange(f"index {index} outside dataset of {ds.n} images")
    img = ds.image(index).astype(np.float64)
    lo, hi = img.min(), img.max()
    if hi > lo:
        scaled = (img - lo) / (hi - lo) * 255.0
    else:
        scaled = np.zeros_like(img)
    Image.fromarray(np.round(scaled).astype(np.uint8), mode="L").save(out_path)
    return {
        "out_path": str(out_path),
        "index": index,
        "label": int(ds.labels[index]),
        "pixel_min": float(lo),
        "pixel_max": float(hi),
    }
