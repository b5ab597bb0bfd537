import asyncio
import json

import httpx
import numpy as np
import pytest
from PIL import Image

from emb2img import cli, formats
from emb2img.errors import EXIT_CODES
from emb2img.service.app import app

from test_pipeline import synthetic_embeddings


def call(path, payload):
    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://test", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


FAST_LAYOUT = dict(
    grid_w=8, grid_h=8, perplexity=8, n_iter=120, learning_rate=100.0,
    early_exaggeration_factor=4.0, early_exaggeration_iters=40,
    momentum_switch_iter=40,
)


def test_health():
    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://test"
        ) as client:
            return await client.get("/health")

    response = asyncio.run(go())
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_service_full_pipeline(tmp_path):
    emb = tmp_path / "data.emb1"
    synthetic_embeddings(emb, n=70, d=40, seed=1)

    layout_path = str(tmp_path / "layout.lay1")
    response = call("/layout", {
        "embeddings_path": str(emb), "out_path": layout_path,
        "seed": 3, **FAST_LAYOUT,
    })
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["density"]["total"] == 40

    images_path = str(tmp_path / "images.img1")
    response = call("/render", {
        "embeddings_path": str(emb), "layout_path": layout_path,
        "out_path": images_path, "normalize": True,
    })
    assert response.status_code == 200, response.text
    assert response.json()["stats"]["sigma"] > 0

    ckpt = str(tmp_path / "model.ten1")
    metrics = str(tmp_path / "metrics.jsonl")
    response = call("/train", {
        "images_path": images_path, "out_checkpoint": ckpt,
        "out_metrics": metrics, "epochs": 2, "batch_size": 8,
        "split": 0.8, "seed": 0, "cae_lr": 1e-3, "lc_lr": 1e-3,
    })
    assert response.status_code == 200, response.text
    history = response.json()["history"]
    assert len(history) == 2

    response = call("/eval", {
        "images_path": images_path, "checkpoint_path": ckpt,
    })
    assert response.status_code == 200
    assert 0.0 <= response.json()["accuracy"] <= 1.0

    png = str(tmp_path / "dump.png")
    response = call("/inspect", {
        "images_path": images_path, "index": 0, "out_path": png,
    })
    assert response.status_code == 200
    with Image.open(png) as img:
        assert img.mode == "L"


def test_service_error_payload(tmp_path):
    response = call("/layout", {
        "embeddings_path": str(tmp_path / "missing.emb1"),
        "out_path": str(tmp_path / "out.lay1"),
    })
    assert response.status_code == 422
    body = response.json()
    assert body["error"] == "IOFailure"
    assert body["exit_code"] == EXIT_CODES["IOFailure"]


def test_service_shape_error_payload(tmp_path):
    emb_a = tmp_path / "a.emb1"
    emb_b = tmp_path / "b.emb1"
    synthetic_embeddings(emb_a, d=32)
    synthetic_embeddings(emb_b, d=16)
    layout_path = str(tmp_path / "layout.lay1")
    response = call("/layout", {
        "embeddings_path": str(emb_a), "out_path": layout_path,
        "seed": 0, **FAST_LAYOUT,
    })
    assert response.status_code == 200
    response = call("/render", {
        "embeddings_path": str(emb_b), "layout_path": layout_path,
        "out_path": str(tmp_path / "x.img1"),
    })
    assert response.status_code == 422
    assert response.json()["error"] == "LengthMismatch"


# --- CLI (thin client over the same service, in-process) -----------------------

def run_cli(capsys, *argv):
    cli.main(list(argv))
    return json.loads(capsys.readouterr().out)


def test_cli_layout_render_eval_inspect(tmp_path, capsys):
    emb = tmp_path / "data.emb1"
    synthetic_embeddings(emb, n=70, d=40, seed=2)
    layout_path = tmp_path / "layout.lay1"
    body = run_cli(
        capsys, "layout", str(emb), str(layout_path),
        "--grid-w", "8", "--grid-h", "8", "--perplexity", "8",
        "--n-iter", "120", "--early-exaggeration-iters", "40",
        "--early-exaggeration-factor", "4.0",
        "--momentum-switch-iter", "40", "--seed", "3",
    )
    assert body["d"] == 40
    assert layout_path.exists()

    images_path = tmp_path / "images.img1"
    body = run_cli(
        capsys, "render", str(emb), str(layout_path), str(images_path),
        "--normalize",
    )
    assert body["normalized"] is True

    ckpt = tmp_path / "model.ten1"
    metrics = tmp_path / "metrics.jsonl"
    body = run_cli(
        capsys, "train", str(images_path), str(ckpt), str(metrics),
        "--epochs", "2", "--batch-size", "8", "--cae-lr", "1e-3",
        "--lc-lr", "1e-3",
    )
    assert len(body["history"]) == 2

    body = run_cli(capsys, "eval", str(images_path), str(ckpt))
    assert "accuracy" in body

    png = tmp_path / "img.png"
    body = run_cli(capsys, "inspect", str(images_path), "0", str(png))
    assert png.exists()


def test_cli_error_exit_code(tmp_path, capsys):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["layout", str(tmp_path / "missing.emb1"),
                  str(tmp_path / "out.lay1")])
    assert excinfo.value.code == EXIT_CODES["IOFailure"]
    err = capsys.readouterr().err
    assert json.loads(err)["error"] == "IOFailure"


def test_cli_degenerate_embeddings_exit_code(tmp_path, capsys):
    from emb2img.types import EmbeddingMatrix

    emb = tmp_path / "const.emb1"
    formats.save_embeddings(
        EmbeddingMatrix(values=np.ones((10, 8), dtype=np.float32),
                        labels=np.zeros(10, dtype=np.uint8)),
        emb,
    )
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["layout", str(emb), str(tmp_path / "out.lay1"),
                  "--grid-w", "4", "--grid-h", "4", "--perplexity", "4",
                  "--n-iter", "50", "--early-exaggeration-iters", "10",
                  "--momentum-switch-iter", "10"])
    assert excinfo.value.code == EXIT_CODES["BandwidthSearchFailed"]


def test_cli_index_out_of_range_exit_code(tmp_path, capsys):
    emb = tmp_path / "data.emb1"
    synthetic_embeddings(emb, n=60, d=32)
    layout_path = tmp_path / "layout.lay1"
    run_cli(capsys, "layout", str(emb), str(layout_path),
            "--grid-w", "8", "--grid-h", "8", "--perplexity", "8",
            "--n-iter", "100", "--early-exaggeration-iters", "30",
            "--momentum-switch-iter", "30")
    images_path = tmp_path / "images.img1"
    run_cli(capsys, "render", str(emb), str(layout_path), str(images_path))
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["inspect", str(images_path), "4000",
                  str(tmp_path / "x.png")])
    assert excinfo.value.code == EXIT_CODES["IndexOutOfRange"]
