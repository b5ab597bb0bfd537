"""Slice early layers from pretrained vision models and name their weights.

Each supported model yields the layer prefix used as a frozen feature
extractor, with the channel count its slice emits:

    alexnet     -> first two convolutions (with relu/pool)          -> 192
    resnet      -> wide_resnet50_2 stem + first residual layer      -> 256
    resnext     -> resnext50_32x4d stem + first residual layer      -> 256
    shufflenet  -> shufflenet_v2_x1_0 conv1+bn stem + stage2        -> 116
    vgg16       -> first 12 feature modules (five convolutions)     -> 256

Sequential slices (alexnet, vgg16) use the flat ext.convN naming the
training toolkit expects; block-structured slices keep their module paths
(ext.layer1.0.conv1.w, ...) since the toolkit cannot run them yet.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torchvision import models

EXPECTED_CHANNELS = {
    "alexnet": 192,
    "resnet": 256,
    "resnext": 256,
    "shufflenet": 116,
    "vgg16": 256,
}

# names whose slices the training toolkit can execute directly
SEQUENTIAL_MODELS = ("alexnet", "vgg16")


class UnknownModel(ValueError):
    pass


def _build(name: str, pretrained: bool) -> nn.Module:
    weights_arg = "IMAGENET1K_V1" if pretrained else None
    if name == "alexnet":
        model = models.alexnet(weights=weights_arg)
        return model.features[:6]
    if name == "vgg16":
        model = models.vgg16(weights=weights_arg)
        return model.features[:12]
    if name == "resnet":
        model = models.wide_resnet50_2(weights=weights_arg)
    elif name == "resnext":
        model = models.resnext50_32x4d(weights=weights_arg)
    elif name == "shufflenet":
        model = models.shufflenet_v2_x1_0(weights=weights_arg)
        return nn.Sequential(model.conv1, model.maxpool, model.stage2)
    else:
        raise UnknownModel(
            f"unknown model {name!r}; choose from {sorted(EXPECTED_CHANNELS)}"
        )
    return nn.Sequential(model.conv1, model.bn1, model.relu, model.maxpool,
                         model.layer1)


def build_slice(name: str, pretrained: bool = True) -> nn.Module:
    """The frozen extractor slice as a torch module, in eval mode."""
    module = _build(name, pretrained)
    module.eval()
    return module


def _sequential_names(module: nn.Module) -> dict[str, np.ndarray]:
    named: dict[str, np.ndarray] = {}
    count = 0
    for child in module.modules():
        if isinstance(child, nn.Conv2d):
            count += 1
            named[f"ext.conv{count}.w"] = child.weight.detach().numpy()
            named[f"ext.conv{count}.b"] = child.bias.detach().numpy()
    return named


_PARAM_RENAMES = {
    nn.Conv2d: {"weight": "w", "bias": "b"},
    nn.Linear: {"weight": "w", "bias": "b"},
    nn.BatchNorm2d: {
        "weight": "gamma", "bias": "beta",
        "running_mean": "running_mean", "running_var": "running_var",
    },
}


def _structured_names(module: nn.Module) -> dict[str, np.ndarray]:
    named: dict[str, np.ndarray] = {}
    for path, child in module.named_modules():
        renames = None
        for cls, mapping in _PARAM_RENAMES.items():
            if isinstance(child, cls):
                renames = mapping
                break
        if renames is None:
            continue
        state = dict(child.named_parameters(recurse=False))
        state.update(child.named_buffers(recurse=False))
        for raw, new in renames.items():
            tensor = state.get(raw)
            if tensor is None:
                continue
            named[f"ext.{path}.{new}"] = tensor.detach().numpy()
    return named


def slice_tensors(name: str, module: nn.Module) -> dict[str, np.ndarray]:
    """Named float32 arrays for a slice, under the ext. prefix."""
    if name in SEQUENTIAL_MODELS:
        named = _sequential_names(module)
    else:
        named = _structured_names(module)
    if not named:
        raise UnknownModel(f"slice of {name!r} yielded no parameters")
    return named


def output_channels(module: nn.Module, input_hw: int = 50) -> int:
    """Channel count of the slice's output on a square probe input."""
    with torch.no_grad():
        probe = torch.zeros(1, 3, input_hw, input_hw)
        return int(module(probe).shape[1])


def export_extractor(name: str, out_path, pretrained: bool = True) -> dict:
    """Write a model slice to TEN1; returns a summary with channel counts."""
    from .formats import write_ten1

    module = build_slice(name, pretrained)
    channels = output_channels(module)
    expected = EXPECTED_CHANNELS[name]
    if channels != expected:
        raise RuntimeError(
            f"{name} slice emits {channels} channels, expected {expected}"
        )
    named = slice_tensors(name, module)
    write_ten1(named, out_path)
    return {
        "model": name,
        "out_path": str(out_path),
        "tensors": len(named),
        "feature_maps": channels,
        "pretrained": pretrained,
        "runnable_in_toolkit": name in SEQUENTIAL_MODELS,
    }
