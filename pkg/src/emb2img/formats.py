"""Binary file formats: EMB1, LAY1, IMG1, TEN1.

All integers are unsigned 64-bit little-endian, floats are 32-bit
little-endian, labels are unsigned 8-bit. Saving and loading round-trips
bit-exactly on float payloads. Loaders reject size mismatches, trailing
bytes, and non-finite values.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (
    DimensionMismatch,
    IOFailure,
    MalformedHeader,
    NonFiniteValue,
)
from .types import (
    EmbeddingMatrix,
    FeatureLayout,
    ImageDataset,
    NormalizationStats,
    TensorEntry,
    TensorStore,
)

_U64 = struct.Struct("<Q")
_F32 = struct.Struct("<f")


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def magic(self, expected: bytes):
        got = self.data[:4]
        if got != expected:
            raise MalformedHeader(
                f"{self.path}: expected magic {expected!r}, got {got!r}"
            )
        self.pos = 4

    def u64(self, what: str) -> int:
        end = self.pos + 8
        if end > len(self.data):
            raise MalformedHeader(f"{self.path}: truncated while reading {what}")
        (value,) = _U64.unpack_from(self.data, self.pos)
        self.pos = end
        return value

    def u8(self, what: str) -> int:
        if self.pos + 1 > len(self.data):
            raise MalformedHeader(f"{self.path}: truncated while reading {what}")
        value = self.data[self.pos]
        self.pos += 1
        return value

    def raw(self, nbytes: int, what: str) -> bytes:
        end = self.pos + nbytes
        if end > len(self.data):
            raise DimensionMismatch(
                f"{self.path}: {what} needs {nbytes} bytes, "
                f"only {len(self.data) - self.pos} remain"
            )
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def f32_array(self, count: int, what: str) -> np.ndarray:
        chunk = self.raw(count * 4, what)
        return np.frombuffer(chunk, dtype="<f4").astype(np.float32, copy=True)

    def u64_array(self, count: int, what: str) -> np.ndarray:
        chunk = self.raw(count * 8, what)
        return np.frombuffer(chunk, dtype="<u8").astype(np.int64, copy=True)

    def u8_array(self, count: int, what: str) -> np.ndarray:
        chunk = self.raw(count, what)
        return np.frombuffer(chunk, dtype=np.uint8).copy()

    def done(self):
        if self.pos != len(self.data):
            raise DimensionMismatch(
                f"{self.path}: {len(self.data) - self.pos} trailing bytes"
            )


def _read_file(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc


def _write_file(path, payload: bytes):
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _check_finite(arr: np.ndarray, path, what: str):
    if not np.isfinite(arr).all():
        raise NonFiniteValue(f"{path}: {what} contains NaN or Inf")


def _f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _u64_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<u8").tobytes()


# --- EMB1: magic | n:u64 | d:u64 | n*d f32 | n u8 labels ----------------------

def save_embeddings(m: EmbeddingMatrix, path) -> None:
    parts = [
        b"EMB1",
        _U64.pack(m.n),
        _U64.pack(m.d),
        _f32_bytes(m.values),
        m.labels.tobytes(),
    ]
    _write_file(path, b"".join(parts))


def load_embeddings(path) -> EmbeddingMatrix:
    r = _Reader(_read_file(path), str(path))
    r.magic(b"EMB1")
    n = r.u64("sample count")
    d = r.u64("feature count")
    values = r.f32_array(n * d, "embedding payload").reshape(n, d)
    labels = r.u8_array(n, "labels")
    r.done()
    _check_finite(values, path, "embedding payload")
    return EmbeddingMatrix(values=values, labels=labels)


# --- LAY1: magic | grid_w | grid_h | d | d u64 assignments | seed | hash ------

def save_layout(layout: FeatureLayout, path) -> None:
    parts = [
        b"LAY1",
        _U64.pack(layout.grid_w),
        _U64.pack(layout.grid_h),
        _U64.pack(layout.d),
        _u64_bytes(layout.assignments),
        _U64.pack(layout.seed),
        _U64.pack(layout.config_hash),
    ]
    _write_file(path, b"".join(parts))


def load_layout(path) -> FeatureLayout:
    r = _Reader(_read_file(path), str(path))
    r.magic(b"LAY1")
    grid_w = r.u64("grid width")
    grid_h = r.u64("grid height")
    d = r.u64("feature count")
    assignments = r.u64_array(d, "assignments")
    seed = r.u64("seed")
    config_hash = r.u64("config hash")
    r.done()
    return FeatureLayout(
        grid_w=grid_w, grid_h=grid_h, assignments=assignments,
        seed=seed, config_hash=config_hash,
    )


# --- IMG1: magic | n | grid_w | grid_h | has_stats:u8 | [stats] | pixels | labels

def save_images(ds: ImageDataset, path) -> None:
    parts = [
        b"IMG1",
        _U64.pack(ds.n),
        _U64.pack(ds.grid_w),
        _U64.pack(ds.grid_h),
    ]
    if ds.norm_stats is not None:
        s = ds.norm_stats
        parts.append(b"\x01")
        parts.append(_F32.pack(s.mu) + _F32.pack(s.sigma) + _F32.pack(s.epsilon))
    else:
        parts.append(b"\x00")
    parts.append(_f32_bytes(ds.pixels))
    parts.append(ds.labels.tobytes())
    _write_file(path, b"".join(parts))


def load_images(path) -> ImageDataset:
    r = _Reader(_read_file(path), str(path))
    r.magic(b"IMG1")
    n = r.u64("image count")
    grid_w = r.u64("grid width")
    grid_h = r.u64("grid height")
    has_stats = r.u8("stats flag")
    if has_stats not in (0, 1):
        raise MalformedHeader(f"{path}: stats flag must be 0 or 1")
    stats = None
    if has_stats:
        raw = r.raw(12, "normalization stats")
        mu, sigma, epsilon = struct.unpack("<fff", raw)
        stats = NormalizationStats(mu=mu, sigma=sigma, epsilon=epsilon)
    pixels = r.f32_array(n * grid_h * grid_w, "pixel payload")
    pixels = pixels.reshape(n, grid_h * grid_w) if n else pixels.reshape(0, grid_h * grid_w)
    labels = r.u8_array(n, "labels")
    r.done()
    _check_finite(pixels, path, "pixel payload")
    return ImageDataset(
        grid_w=grid_w, grid_h=grid_h, pixels=pixels, labels=labels,
        norm_stats=stats,
    )


# --- TEN1: magic | count | per entry: name_len, name, rank, dims, f32 data ----

def save_tensors(store: TensorStore, path) -> None:
    parts = [b"TEN1", _U64.pack(len(store.entries))]
    for entry in store.entries:
        name = entry.name.encode("utf-8")
        parts.append(_U64.pack(len(name)))
        parts.append(name)
        parts.append(_U64.pack(len(entry.shape)))
        for dim in entry.shape:
            parts.append(_U64.pack(dim))
        parts.append(_f32_bytes(entry.data))
    _write_file(path, b"".join(parts))


def load_tensors(path) -> TensorStore:
    r = _Reader(_read_file(path), str(path))
    r.magic(b"TEN1")
    count = r.u64("entry count")
    entries = []
    for k in range(count):
        name_len = r.u64(f"entry {k} name length")
        try:
            name = r.raw(name_len, f"entry {k} name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedHeader(f"{path}: entry {k} name is not UTF-8") from exc
        rank = r.u64(f"{name} rank")
        shape = tuple(r.u64(f"{name} dim {i}") for i in range(rank))
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        data = r.f32_array(size, f"{name} data")
        _check_finite(data, path, f"tensor {name!r}")
        entries.append(TensorEntry(name=name, shape=shape, data=data))
    r.done()
    return TensorStore(entries=tuple(entries))
