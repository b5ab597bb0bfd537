"""Standalone writers for the EMB1 and TEN1 binary formats.

The toolkit consuming these files is a separate package; the byte layouts
below are the interface. Integers are u64 little-endian, floats f32
little-endian, labels u8.

EMB1: "EMB1" | n | d | n*d f32 values | n u8 labels
TEN1: "TEN1" | count | per tensor: name_len, name (UTF-8), rank, dims, f32 data
"""

from __future__ import annotations

import struct

import numpy as np

_U64 = struct.Struct("<Q")


def write_emb1(values: np.ndarray, labels: np.ndarray, path) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if values.ndim != 2:
        raise ValueError(f"values must be 2D, got shape {values.shape}")
    n, d = values.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got {labels.shape}")
    if not np.isfinite(values).all():
        raise ValueError("values contain NaN or Inf")
    if labels.size and labels.max() > 1:
        raise ValueError("labels must be 0 or 1")
    with open(path, "wb") as fh:
        fh.write(b"EMB1")
        fh.write(_U64.pack(n))
        fh.write(_U64.pack(d))
        fh.write(values.tobytes())
        fh.write(labels.tobytes())


def write_ten1(entries: dict[str, np.ndarray], path) -> None:
    """Write named tensors in insertion order."""
    with open(path, "wb") as fh:
        fh.write(b"TEN1")
        fh.write(_U64.pack(len(entries)))
        for name, array in entries.items():
            array = np.ascontiguousarray(array, dtype="<f4")
            if not np.isfinite(array).all():
                raise ValueError(f"tensor {name!r} contains NaN or Inf")
            encoded = name.encode("utf-8")
            fh.write(_U64.pack(len(encoded)))
            fh.write(encoded)
            fh.write(_U64.pack(array.ndim))
            for dim in array.shape:
                fh.write(_U64.pack(dim))
            fh.write(array.tobytes())
