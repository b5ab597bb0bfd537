"""Sentence embeddings: concatenated [CLS] vectors from BERT's last six
encoder layers, one row per review.

Reviews pass through the tokenizer untouched (HTML artifacts like "<br />"
included), truncated to the 512-token limit. The model runs in eval mode
with no gradients, so the same input always produces the same bytes.
Uncased BERT is the default checkpoint.
"""

from __future__ import annotations

import csv

import numpy as np
import torch

DEFAULT_CHECKPOINT = "bert-base-uncased"
CLS_LAYERS = 6
MAX_TOKENS = 512

_LABELS = {"positive": 1, "negative": 0, "1": 1, "0": 0}


class ExportError(RuntimeError):
    pass


def read_reviews(csv_path, limit: int | None = None):
    """(texts, labels) from a review/sentiment CSV (IMDB column layout)."""
    texts: list[str] = []
    labels: list[int] = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ExportError(f"{csv_path}: empty CSV")
        columns = {name.lower(): name for name in reader.fieldnames}
        text_col = columns.get("review") or columns.get("text")
        label_col = columns.get("sentiment") or columns.get("label")
        if text_col is None or label_col is None:
            raise ExportError(
                f"{csv_path}: need review/sentiment columns, "
                f"found {reader.fieldnames}"
            )
        for row_index, row in enumerate(reader):
            if limit is not None and len(texts) >= limit:
                break
            raw = (row.get(label_col) or "").strip().lower()
            if raw not in _LABELS:
                raise ExportError(
                    f"{csv_path}: row {row_index}: unknown sentiment {raw!r}"
                )
            texts.append(row.get(text_col) or "")
            labels.append(_LABELS[raw])
    if not texts:
        raise ExportError(f"{csv_path}: no reviews read")
    return texts, np.array(labels, dtype=np.uint8)


def load_bert(checkpoint: str = DEFAULT_CHECKPOINT):
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModel.from_pretrained(checkpoint)
    model.eval()
    return tokenizer, model


def embed_reviews(texts, tokenizer, model, batch_size: int = 16) -> np.ndarray:
    """(n, 6*hidden) matrix of stacked last-six-layer [CLS] vectors."""
    chunks = []
    for start in range(0, len(texts), batch_size):
        batch = texts[start:start + batch_size]
        try:
            encoded = tokenizer(
                batch, return_tensors="pt", padding=True,
                truncation=True, max_length=MAX_TOKENS,
            )
            with torch.no_grad():
                out = model(**encoded, output_hidden_states=True)
        except Exception as exc:
            raise ExportError(
                f"embedding failed for samples {start}..{start + len(batch) - 1}: {exc}"
            ) from exc
        # hidden_states: embeddings + one entry per encoder layer; the last
        # six are stacked in ascending layer order
        cls_per_layer = [
            states[:, 0, :] for states in out.hidden_states[-CLS_LAYERS:]
        ]
        chunks.append(torch.cat(cls_per_layer, dim=1).numpy())
    return np.concatenate(chunks, axis=0).astype(np.float32)


def export_embeddings(csv_path, out_path, checkpoint: str = DEFAULT_CHECKPOINT,
                      limit: int | None = None, batch_size: int = 16,
                      tokenizer=None, model=None) -> dict:
    """Embed a review CSV and write EMB1; returns a summary."""
    from .formats import write_emb1

    texts, labels = read_reviews(csv_path, limit=limit)
    if tokenizer is None or model is None:
        tokenizer, model = load_bert(checkpoint)
    values = embed_reviews(texts, tokenizer, model, batch_size=batch_size)
    write_emb1(values, labels, out_path)
    return {
        "out_path": str(out_path),
        "n": int(values.shape[0]),
        "d": int(values.shape[1]),
        "checkpoint": checkpoint,
        "positive": int(labels.sum()),
    }
