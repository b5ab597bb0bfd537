import json

import numpy as np
import pytest
from PIL import Image

from emb2img import formats, pipeline
from emb2img.errors import (
    BandwidthSearchFailed,
    IndexOutOfRange,
    InvalidInput,
    LengthMismatch,
)
from emb2img.tsne import TsneConfig
from emb2img.types import EmbeddingMatrix


FAST_TSNE = dict(
    perplexity=8, n_iter=120, learning_rate=100.0,
    early_exaggeration_factor=4.0, early_exaggeration_iters=40,
    momentum_switch_iter=40,
)


def synthetic_embeddings(path, n=60, d=32, seed=0, informative=0.25):
    """Two Gaussian clusters separated on a fraction of the features."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n).astype(np.uint8)
    values = rng.normal(size=(n, d))
    signal = rng.permutation(d)[: int(d * informative)]
    values[np.ix_(labels == 1, signal)] += 2.0
    m = EmbeddingMatrix(values=values.astype(np.float32), labels=labels)
    formats.save_embeddings(m, path)
    return m


@pytest.fixture()
def workspace(tmp_path):
    emb = tmp_path / "data.emb1"
    synthetic_embeddings(emb)
    return tmp_path, emb


def test_layout_density_sums_to_d(tmp_path):
    emb = tmp_path / "data.emb1"
    synthetic_embeddings(emb, n=200, d=64, seed=9)
    out = tmp_path / "layout.lay1"
    summary = pipeline.run_layout(
        emb, out, grid_w=16, grid_h=16, cfg=TsneConfig(seed=1, **FAST_TSNE)
    )
    assert summary["density"]["total"] == 64
    layout = formats.load_layout(out)
    assert layout.density.sum() == 64
    assert layout.seed == 1
    assert layout.config_hash == summary["config_hash"]


def test_layout_deterministic_bytes(workspace):
    tmp, emb = workspace
    cfg = TsneConfig(seed=7, **FAST_TSNE)
    a, b = tmp / "a.lay1", tmp / "b.lay1"
    pipeline.run_layout(emb, a, grid_w=8, grid_h=8, cfg=cfg)
    pipeline.run_layout(emb, b, grid_w=8, grid_h=8, cfg=cfg)
    assert a.read_bytes() == b.read_bytes()


def test_layout_constant_embeddings_fail(tmp_path):
    values = np.ones((10, 8), dtype=np.float32)
    m = EmbeddingMatrix(values=values, labels=np.zeros(10, dtype=np.uint8))
    emb = tmp_path / "const.emb1"
    formats.save_embeddings(m, emb)
    with pytest.raises(BandwidthSearchFailed):
        pipeline.run_layout(emb, tmp_path / "out.lay1", grid_w=4, grid_h=4,
                            cfg=TsneConfig(perplexity=4, n_iter=50, seed=0,
                                           early_exaggeration_iters=10,
                                           momentum_switch_iter=10))


def test_render_roundtrip_and_normalization(workspace):
    tmp, emb = workspace
    layout_path = tmp / "layout.lay1"
    pipeline.run_layout(emb, layout_path, grid_w=8, grid_h=8,
                        cfg=TsneConfig(seed=2, **FAST_TSNE))

    raw_path = tmp / "raw.img1"
    summary = pipeline.run_render(emb, layout_path, raw_path)
    assert summary["normalized"] is False
    raw = formats.load_images(raw_path)
    assert raw.n == 60 and raw.norm_stats is None

    norm_path = tmp / "norm.img1"
    summary = pipeline.run_render(emb, layout_path, norm_path, normalize=True)
    norm = formats.load_images(norm_path)
    assert norm.norm_stats is not None
    assert abs(norm.pixels.astype(np.float64).mean()) < 1e-5
    assert summary["stats"]["sigma"] == pytest.approx(
        raw.pixels.astype(np.float64).std(), rel=1e-6
    )


def test_render_layout_mismatch(workspace, tmp_path):
    tmp, emb = workspace
    other = tmp_path / "other.emb1"
    synthetic_embeddings(other, d=16)
    layout_path = tmp / "layout.lay1"
    pipeline.run_layout(other, layout_path, grid_w=6, grid_h=6,
                        cfg=TsneConfig(seed=0, **FAST_TSNE))
    with pytest.raises(LengthMismatch):
        pipeline.run_render(emb, layout_path, tmp / "out.img1")


def trained_workspace(tmp_path, epochs=3, seed=0):
    emb = tmp_path / "data.emb1"
    synthetic_embeddings(emb, n=80, d=48, seed=3)
    layout_path = tmp_path / "layout.lay1"
    pipeline.run_layout(emb, layout_path, grid_w=8, grid_h=8,
                        cfg=TsneConfig(seed=1, **FAST_TSNE))
    images = tmp_path / "images.img1"
    pipeline.run_render(emb, layout_path, images, normalize=True)
    checkpoint = tmp_path / "model.ten1"
    metrics = tmp_path / "metrics.jsonl"
    summary = pipeline.run_train(
        images, checkpoint, metrics,
        epochs=epochs, batch_size=8, split=0.75, seed=seed,
        cae_lr=1e-3, lc_lr=1e-3,
    )
    return images, checkpoint, metrics, summary


def test_train_writes_metrics_and_checkpoint(tmp_path):
    images, checkpoint, metrics, summary = trained_workspace(tmp_path)
    lines = metrics.read_text().strip().splitlines()
    header = json.loads(lines[0])
    assert header["config"]["batch_size"] == 8
    records = [json.loads(line) for line in lines[1:]]
    assert [r["epoch"] for r in records] == [1, 2, 3]
    assert all(np.isfinite(r["train_loss"]) for r in records)
    assert summary["train_samples"] == 60
    assert summary["val_samples"] == 20
    store = formats.load_tensors(checkpoint)
    assert "meta.arch" in store.names()


def test_train_requires_normalized_images(tmp_path):
    emb = tmp_path / "data.emb1"
    synthetic_embeddings(emb)
    layout_path = tmp_path / "layout.lay1"
    pipeline.run_layout(emb, layout_path, grid_w=8, grid_h=8,
                        cfg=TsneConfig(seed=1, **FAST_TSNE))
    images = tmp_path / "raw.img1"
    pipeline.run_render(emb, layout_path, images, normalize=False)
    with pytest.raises(InvalidInput):
        pipeline.run_train(images, tmp_path / "c.ten1", tmp_path / "m.jsonl",
                           epochs=1)


def test_train_deterministic_checkpoints(tmp_path):
    images, ckpt_a, metrics_a, _ = trained_workspace(tmp_path, epochs=2, seed=5)
    ckpt_b = tmp_path / "again.ten1"
    metrics_b = tmp_path / "again.jsonl"
    pipeline.run_train(images, ckpt_b, metrics_b,
                       epochs=2, batch_size=8, split=0.75, seed=5,
                       cae_lr=1e-3, lc_lr=1e-3)
    assert ckpt_a.read_bytes() == ckpt_b.read_bytes()
    assert metrics_a.read_bytes() == metrics_b.read_bytes()


def test_eval_matches_training_history(tmp_path):
    images, checkpoint, _, summary = trained_workspace(tmp_path)
    result = pipeline.run_eval(images, checkpoint)
    assert result["n"] == 80
    assert 0.0 <= result["accuracy"] <= 1.0


def test_eval_grid_mismatch(tmp_path):
    images, checkpoint, _, _ = trained_workspace(tmp_path)
    other = tmp_path / "other"
    other.mkdir()
    other_images, _, _, _ = trained_workspace(other)
    # re-render the other workspace at a different grid
    emb = other / "data.emb1"
    layout_path = other / "layout10.lay1"
    pipeline.run_layout(emb, layout_path, grid_w=10, grid_h=10,
                        cfg=TsneConfig(seed=1, **FAST_TSNE))
    mismatched = other / "mismatched.img1"
    pipeline.run_render(emb, layout_path, mismatched, normalize=True)
    with pytest.raises(LengthMismatch):
        pipeline.run_eval(mismatched, checkpoint)


def test_inspect_writes_grayscale_png(tmp_path):
    images, _, _, _ = trained_workspace(tmp_path)
    out = tmp_path / "img.png"
    summary = pipeline.run_inspect(images, 0, out)
    with Image.open(out) as img:
        assert img.mode == "L"
        assert img.size == (8, 8)
    assert summary["label"] in (0, 1)


def test_inspect_constant_image_uniform(tmp_path):
    from emb2img.types import ImageDataset
    ds = ImageDataset(
        grid_w=4, grid_h=4,
        pixels=np.full((2, 16), 3.5, dtype=np.float32),
        labels=np.zeros(2, dtype=np.uint8),
    )
    path = tmp_path / "const.img1"
    formats.save_images(ds, path)
    out = tmp_path / "const.png"
    pipeline.run_inspect(path, 1, out)
    with Image.open(out) as img:
        values = np.unique(np.asarray(img))
    assert values.size == 1


def test_inspect_index_out_of_range(tmp_path):
    images, _, _, _ = trained_workspace(tmp_path)
    with pytest.raises(IndexOutOfRange):
        pipeline.run_inspect(images, 99999, tmp_path / "x.png")
