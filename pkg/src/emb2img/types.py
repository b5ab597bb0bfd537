"""Domain types shared by every module.

All types are immutable after construction (backing arrays are marked
read-only) and validate their invariants eagerly, so a value that exists is a
value that is well-formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateName,
    MalformedHeader,
    NonFiniteValue,
)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EmbeddingMatrix:
    """n samples by d features, float32, with binary labels."""

    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = _freeze(np.asarray(self.values, dtype=np.float32))
        labels = _freeze(np.asarray(self.labels, dtype=np.uint8))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        if values.ndim != 2 or values.shape[0] < 2 or values.shape[1] < 2:
            raise DimensionMismatch(
                f"embedding matrix must be at least 2x2, got shape {values.shape}"
            )
        if labels.shape != (values.shape[0],):
            raise DimensionMismatch(
                f"expected {values.shape[0]} labels, got {labels.shape}"
            )
        if not np.isfinite(values).all():
            raise NonFiniteValue("embedding values contain NaN or Inf")
        if labels.max(initial=0) > 1:
            raise MalformedHeader("labels must be 0 or 1")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FeatureLayout:
    """Frozen mapping from feature index to pixel on a grid_w x grid_h grid.

    ``assignments[i] = row * grid_w + col`` and ``density[r, c]`` counts the
    features mapped to that cell. ``seed`` and ``config_hash`` record the
    projection run that produced the layout.
    """

    grid_w: int
    grid_h: int
    assignments: np.ndarray
    density: np.ndarray = field(default=None)  # derived when omitted
    seed: int = 0
    config_hash: int = 0

    def __post_init__(self):
        if self.grid_w < 2 or self.grid_h < 2:
            raise DimensionMismatch("grid must be at least 2x2")
        assignments = _freeze(np.asarray(self.assignments, dtype=np.int64))
        if assignments.ndim != 1 or assignments.size < 1:
            raise DimensionMismatch("assignments must be a non-empty vector")
        n_cells = self.grid_w * self.grid_h
        if assignments.min() < 0 or assignments.max() >= n_cells:
            raise MalformedHeader("assignment index outside the grid")
        counted = np.bincount(assignments, minlength=n_cells).reshape(
            self.grid_h, self.grid_w
        )
        if self.density is None:
            density = counted
        else:
            density = np.asarray(self.density, dtype=np.int64)
            if not np.array_equal(density, counted):
                raise DimensionMismatch("density does not match assignment counts")
        object.__setattr__(self, "assignments", assignments)
        object.__setattr__(self, "density", _freeze(counted))

    @property
    def d(self) -> int:
        return self.assignments.size


@dataclass(frozen=True)
class NormalizationStats:
    """Global pixel mean/std and the epsilon used in the denominator."""

    mu: float
    sigma: float
    epsilon: float

    def __post_init__(self):
        if self.sigma < 0:
            raise NonFiniteValue("sigma must be non-negative")
        if not self.epsilon > 0:
            raise NonFiniteValue("epsilon must be positive")


@dataclass(frozen=True)
class ImageDataset:
    """n grayscale images stored row-major as (n, grid_h*grid_w) float32."""

    grid_w: int
    grid_h: int
    pixels: np.ndarray
    labels: np.ndarray
    norm_stats: NormalizationStats | None = None

    def __post_init__(self):
        pixels = _freeze(np.asarray(self.pixels, dtype=np.float32))
        labels = _freeze(np.asarray(self.labels, dtype=np.uint8))
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "labels", labels)
        if pixels.ndim != 2 or pixels.shape[1] != self.grid_w * self.grid_h:
            raise DimensionMismatch(
                f"pixels shape {pixels.shape} does not match "
                f"{self.grid_h}x{self.grid_w} grid"
            )
        if labels.shape != (pixels.shape[0],):
            raise DimensionMismatch("labels length does not match image count")
        if labels.size and labels.max() > 1:
            raise MalformedHeader("labels must be 0 or 1")
        if not np.isfinite(pixels).all():
            raise NonFiniteValue("pixels contain NaN or Inf")
        if self.norm_stats is not None:
            mean = float(pixels.astype(np.float64).mean())
            if abs(mean) >= 1e-5:
                raise NonFiniteValue(
                    f"normalized dataset has global mean {mean:.2e}, expected ~0"
                )

    @property
    def n(self) -> int:
        return self.pixels.shape[0]

    def image(self, i: int) -> np.ndarray:
        return self.pixels[i].reshape(self.grid_h, self.grid_w)


@dataclass(frozen=True)
class TensorEntry:
    name: str
    shape: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        data = _freeze(np.asarray(self.data, dtype=np.float32).ravel())
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if int(np.prod(self.shape, dtype=np.int64)) != data.size:
            raise DimensionMismatch(
                f"tensor {self.name!r}: shape {self.shape} does not hold "
                f"{data.size} values"
            )
        if not np.isfinite(data).all():
            raise NonFiniteValue(f"tensor {self.name!r} contains NaN or Inf")

    def array(self) -> np.ndarray:
        return self.data.reshape(self.shape)


@dataclass(frozen=True)
class TensorStore:
    """Ordered collection of named float32 tensors, the weight-exchange format."""

    entries: tuple[TensorEntry, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            dupe = next(n for n in names if names.count(n) > 1)
            raise DuplicateName(f"duplicate tensor name {dupe!r}")

    @classmethod
    def from_arrays(cls, named: dict[str, np.ndarray]) -> "TensorStore":
        return cls(tuple(
            TensorEntry(name, np.asarray(a).shape, np.asarray(a, np.float32).ravel())
            for name, a in named.items()
        ))

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def get(self, name: str) -> TensorEntry | None:
        for e in self.entries:
            if e.name == name:
                return e
        return None
