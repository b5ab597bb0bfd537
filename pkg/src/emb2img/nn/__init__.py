from .layers import (
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    cross_entropy,
    linear_backward,
    linear_forward,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
    upsample_backward,
    upsample_forward,
)
from .model import (
    FEATURE_MAPS,
    LEARNING_RATES,
    RUNNABLE_EXTRACTORS,
    LayerSpec,
    Model,
    ModelSpec,
    build_model,
    decode_arch,
    default_model_spec,
    extractor_spec,
)
from .optim import AdamState
from .train import evaluate, train_epoch

__all__ = [
    "AdamState", "FEATURE_MAPS", "LEARNING_RATES", "LayerSpec", "Model",
    "ModelSpec", "RUNNABLE_EXTRACTORS",
    "batchnorm_backward", "batchnorm_forward", "build_model",
    "conv2d_backward", "conv2d_forward", "cross_entropy", "decode_arch",
    "default_model_spec", "evaluate", "extractor_spec",
    "linear_backward", "linear_forward", "maxpool_backward",
    "maxpool_forward", "relu_backward", "relu_forward", "train_epoch",
    "upsample_backward", "upsample_forward",
]
