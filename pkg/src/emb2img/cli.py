"""Command-line interface: a thin client over the service endpoints.

Every subcommand marshals its flags into the endpoint's request model and
prints the JSON response. By default requests run against an in-process
copy of the service; --server sends them to a running instance instead.
Failures exit with the stable per-error-class codes from errors.EXIT_CODES.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

from .errors import exit_code_for


def _post(path: str, payload: dict, server: str | None) -> dict:
    if server:
        response = httpx.post(
            server.rstrip("/") + path, json=payload, timeout=None
        )
    else:
        from .service.app import app

        async def call():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://emb2img", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(call())

    body = response.json()
    if response.status_code != 200:
        detail = body.get("detail", body)
        if isinstance(detail, dict) or isinstance(detail, list):
            detail = json.dumps(detail)
        name = body.get("error", "ToolkitError")
        print(json.dumps({"error": name, "detail": detail}), file=sys.stderr)
        sys.exit(body.get("exit_code", exit_code_for(name)))
    return body


def _add_layout(sub):
    p = sub.add_parser("layout", help="fit a feature layout from embeddings")
    p.add_argument("embeddings_path")
    p.add_argument("out_path")
    p.add_argument("--grid-w", type=int, default=50)
    p.add_argument("--grid-h", type=int, default=50)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--n-iter", type=int, default=1000)
    p.add_argument("--learning-rate", type=float, default=200.0)
    p.add_argument("--early-exaggeration-factor", type=float, default=12.0)
    p.add_argument("--early-exaggeration-iters", type=int, default=250)
    p.add_argument("--momentum-initial", type=float, default=0.5)
    p.add_argument("--momentum-final", type=float, default=0.8)
    p.add_argument("--momentum-switch-iter", type=int, default=250)
    p.add_argument("--seed", type=int, default=0)


def _add_render(sub):
    p = sub.add_parser("render", help="render images through a fitted layout")
    p.add_argument("embeddings_path")
    p.add_argument("layout_path")
    p.add_argument("out_path")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--epsilon", type=float, default=1e-8)


def _add_train(sub):
    p = sub.add_parser("train", help="train a classifier on rendered images")
    p.add_argument("images_path")
    p.add_argument("out_checkpoint")
    p.add_argument("out_metrics")
    p.add_argument("--weights", dest="weights_path", default=None,
                   help="TEN1 file with frozen extractor weights")
    p.add_argument("--spec", default="none",
                   help="extractor spec name (none, alexnet, vgg16, ...)")
    p.add_argument("--cae-lr", type=float, default=None)
    p.add_argument("--lc-lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)


def _add_eval(sub):
    p = sub.add_parser("eval", help="evaluate a checkpoint on an image file")
    p.add_argument("images_path")
    p.add_argument("checkpoint_path")


def _add_inspect(sub):
    p = sub.add_parser("inspect", help="dump one image as a grayscale PNG")
    p.add_argument("images_path")
    p.add_argument("index", type=int)
    p.add_argument("out_path")


def _add_serve(sub):
    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)


_FIELDS = {
    "layout": [
        "embeddings_path", "out_path", "grid_w", "grid_h", "perplexity",
        "n_iter", "learning_rate", "early_exaggeration_factor",
        "early_exaggeration_iters", "momentum_initial", "momentum_final",
        "momentum_switch_iter", "seed",
    ],
    "render": ["embeddings_path", "layout_path", "out_path", "normalize",
               "epsilon"],
    "train": ["images_path", "out_checkpoint", "out_metrics", "weights_path",
              "spec", "cae_lr", "lc_lr", "epochs", "batch_size", "split",
              "seed"],
    "eval": ["images_path", "checkpoint_path"],
    "inspect": ["images_path", "index", "out_path"],
}


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="emb2img",
        description="embedding-to-image transformation and classification",
    )
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default in-process")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_layout, _add_render, _add_train, _add_eval,
                _add_inspect, _add_serve):
        add(sub)
    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import app
        uvicorn.run(app, host=args.host, port=args.port)
        return

    payload = {field: getattr(args, field) for field in _FIELDS[args.command]}
    body = _post(f"/{args.command}", payload, args.server)
    print(json.dumps(body, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
