"""emb2img: embedding matrices to grayscale image datasets, plus a small
convolutional classifier with frozen pretrained feature extractors."""

__version__ = "0.1.0"

from .types import (
    EmbeddingMatrix,
    FeatureLayout,
    ImageDataset,
    NormalizationStats,
    TensorEntry,
    TensorStore,
)

__all__ = [
    "EmbeddingMatrix", "FeatureLayout", "ImageDataset",
    "NormalizationStats", "TensorEntry", "TensorStore", "__version__",
]
