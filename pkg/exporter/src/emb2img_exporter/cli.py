"""CLI: export embeddings or a pretrained extractor slice."""

from __future__ import annotations

import argparse
import json


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="emb2img-export",
        description="dump BERT embeddings and vision-model slices "
                    "into EMB1/TEN1 files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    emb = sub.add_parser("embeddings",
                         help="embed a review CSV into an EMB1 file")
    emb.add_argument("csv_path")
    emb.add_argument("out_path")
    emb.add_argument("--checkpoint", default="bert-base-uncased")
    emb.add_argument("--limit", type=int, default=None,
                     help="only embed the first N reviews")
    emb.add_argument("--batch-size", type=int, default=16)

    ext = sub.add_parser("extractor",
                         help="slice a pretrained vision model into TEN1")
    ext.add_argument("model",
                     choices=["alexnet", "resnet", "resnext", "shufflenet",
                              "vgg16"])
    ext.add_argument("out_path")
    ext.add_argument("--random-init", action="store_true",
                     help="skip pretrained weights (structure only)")

    args = parser.parse_args(argv)
    if args.command == "embeddings":
        from .embeddings import export_embeddings

        summary = export_embeddings(
            args.csv_path, args.out_path, checkpoint=args.checkpoint,
            limit=args.limit, batch_size=args.batch_size,
        )
    else:
        from .extractors import export_extractor

        summary = export_extractor(
            args.model, args.out_path, pretrained=not args.random_init
        )
    print(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
