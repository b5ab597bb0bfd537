"""Model assembly: layer specs, parameter naming, and TensorStore exchange.

A model is an ordered stack of named layers in three groups: a frozen
pretrained extractor ("ext."), a trainable convolutional autoencoder
("cae."), and a dense classifier ("clf."). Checkpoints are TensorStores
holding every parameter and buffer plus two small meta tensors describing
the architecture, so a checkpoint alone rebuilds the network.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import InvalidInput, MissingWeight, ShapeMismatch
from ..types import TensorStore
from . import layers as F

KINDS = ("conv", "batchnorm", "relu", "maxpool", "flatten", "linear", "upsample")
GROUPS = ("ext", "cae", "clf")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    group: str
    frozen: bool = False
    name: str = ""
    # conv: (out_ch, kernel, stride, padding); batchnorm: (channels,) with
    # momentum/eps below; maxpool: (kernel, stride); linear: (out_features,);
    # upsample: (scale,)
    out_ch: int = 0
    kernel: int = 0
    stride: int = 1
    padding: int = 0
    channels: int = 0
    momentum: float = 0.1
    eps: float = 1e-5
    out_features: int = 0
    scale: int = 2


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple[LayerSpec, ...]
    in_channels: int
    grid_h: int
    grid_w: int
    extractor: str = "none"


_SHORT = {"conv": "conv", "batchnorm": "bn", "maxpool": "pool",
          "relu": "relu", "flatten": "flatten", "linear": "fc",
          "upsample": "up"}


def _autoname(specs: list[LayerSpec]) -> tuple[LayerSpec, ...]:
    counters: dict[tuple[str, str], int] = {}
    named = []
    for spec in specs:
        key = (spec.group, spec.kind)
        counters[key] = counters.get(key, 0) + 1
        named.append(replace(
            spec, name=f"{spec.group}.{_SHORT[spec.kind]}{counters[key]}"
        ))
    return tuple(named)


def conv(group, out_ch, kernel, stride=1, padding=0, frozen=False):
    return LayerSpec("conv", group, frozen, out_ch=out_ch, kernel=kernel,
                     stride=stride, padding=padding)


def batchnorm(group, channels, frozen=False, momentum=0.1, eps=1e-5):
    # momentum/eps are rounded to float32 so specs survive the checkpoint
    # codec bit-exactly
    return LayerSpec("batchnorm", group, frozen, channels=channels,
                     momentum=float(np.float32(momentum)),
                     eps=float(np.float32(eps)))


def relu(group, frozen=False):
    return LayerSpec("relu", group, frozen)


def maxpool(group, kernel, stride, frozen=False):
    return LayerSpec("maxpool", group, frozen, kernel=kernel, stride=stride)


def flatten(group):
    return LayerSpec("flatten", group)


def linear(group, out_features):
    return LayerSpec("linear", group, out_features=out_features)


def upsample(group, scale=2):
    return LayerSpec("upsample", group, scale=scale)


# Extractor slice layouts mirror the torchvision modules they are cut from;
# weights arrive through a TensorStore with ext.-prefixed names.
_EXTRACTORS: dict[str, tuple[int, list[LayerSpec]]] = {
    "none": (1, []),
    "alexnet": (3, [
        conv("ext", 64, 11, stride=4, padding=2, frozen=True),
        relu("ext", frozen=True),
        maxpool("ext", 3, 2, frozen=True),
        conv("ext", 192, 5, stride=1, padding=2, frozen=True),
        relu("ext", frozen=True),
        maxpool("ext", 3, 2, frozen=True),
    ]),
    "vgg16": (3, [
        conv("ext", 64, 3, padding=1, frozen=True),
        relu("ext", frozen=True),
        conv("ext", 64, 3, padding=1, frozen=True),
        relu("ext", frozen=True),
        maxpool("ext", 2, 2, frozen=True),
        conv("ext", 128, 3, padding=1, frozen=True),
        relu("ext", frozen=True),
        conv("ext", 128, 3, padding=1, frozen=True),
        relu("ext", frozen=True),
        maxpool("ext", 2, 2, frozen=True),
        conv("ext", 256, 3, padding=1, frozen=True),
        relu("ext", frozen=True),
    ]),
}

# Per-extractor defaults: (autoencoder lr, classifier lr) and the feature-map
# count its slice emits.
LEARNING_RATES = {
    "none": (1e-4, 1e-3),
    "alexnet": (1e-5, 5e-4),
    "resnet": (5e-5, 1e-4),
    "resnext": (5e-5, 1e-3),
    "shufflenet": (5e-4, 1e-3),
    "vgg16": (5e-5, 1e-3),
}

FEATURE_MAPS = {
    "alexnet": 192,
    "resnet": 256,
    "resnext": 256,
    "shufflenet": 116,
    "vgg16": 256,
}

RUNNABLE_EXTRACTORS = tuple(_EXTRACTORS)


def extractor_spec(grid_h: int, grid_w: int, extractor: str) -> ModelSpec:
    """Just the frozen extractor slice, for feature-map inspection."""
    if extractor not in _EXTRACTORS:
        raise InvalidInput(
            f"no runnable extractor named {extractor!r}; "
            f"choose from {sorted(_EXTRACTORS)}"
        )
    in_channels, ext_layers = _EXTRACTORS[extractor]
    return ModelSpec(layers=_autoname(list(ext_layers)), in_channels=in_channels,
                     grid_h=grid_h, grid_w=grid_w, extractor=extractor)


def default_model_spec(grid_h: int, grid_w: int,
                       extractor: str = "none") -> ModelSpec:
    """The full stack: extractor -> conv autoencoder -> dense classifier."""
    if extractor not in _EXTRACTORS:
        raise InvalidInput(
            f"no runnable extractor named {extractor!r}; "
            f"choose from {sorted(_EXTRACTORS)}"
        )
    in_channels, ext_layers = _EXTRACTORS[extractor]
    specs = list(ext_layers)
    # Encoder halves the resolution twice, the decoder restores it with
    # nearest-neighbor upsampling; batchnorm follows every convolution.
    for out_ch, stride, up in ((64, 2, False), (32, 2, False),
                               (64, 1, True), (16, 1, True)):
        if up:
            specs.append(upsample("cae", 2))
        specs.append(conv("cae", out_ch, 3, stride=stride, padding=1))
        specs.append(batchnorm("cae", out_ch))
        specs.append(relu("cae"))
    specs.append(flatten("clf"))
    for width in (256, 64):
        specs.append(linear("clf", width))
        specs.append(relu("clf"))
    specs.append(linear("clf", 2))
    return ModelSpec(layers=_autoname(specs), in_channels=in_channels,
                     grid_h=grid_h, grid_w=grid_w, extractor=extractor)


class _Layer:
    """Runtime layer: parameters, buffers, and cached state for backward."""

    def __init__(self, spec: LayerSpec, in_shape):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None
        kind = spec.kind
        if kind == "conv":
            c, h, w = self._need_spatial(in_shape)
            ho = F.conv_out_dim(h, spec.kernel, spec.stride, spec.padding)
            wo = F.conv_out_dim(w, spec.kernel, spec.stride, spec.padding)
            self.param_shapes = {
                "w": (spec.out_ch, c, spec.kernel, spec.kernel),
                "b": (spec.out_ch,),
            }
            self.out_shape = (spec.out_ch, ho, wo)
        elif kind == "batchnorm":
            c, h, w = self._need_spatial(in_shape)
            if c != spec.channels:
                raise ShapeMismatch(
                    f"{spec.name}: batchnorm over {spec.channels} channels "
                    f"follows a {c}-channel activation"
                )
            self.param_shapes = {"gamma": (c,), "beta": (c,)}
            self.out_shape = in_shape
        elif kind == "relu":
            self.param_shapes = {}
            self.out_shape = in_shape
        elif kind == "maxpool":
            c, h, w = self._need_spatial(in_shape)
            ho = F.conv_out_dim(h, spec.kernel, spec.stride, 0)
            wo = F.conv_out_dim(w, spec.kernel, spec.stride, 0)
            self.param_shapes = {}
            self.out_shape = (c, ho, wo)
        elif kind == "upsample":
            c, h, w = self._need_spatial(in_shape)
            self.param_shapes = {}
            self.out_shape = (c, h * spec.scale, w * spec.scale)
        elif kind == "flatten":
            self.param_shapes = {}
            self.out_shape = (int(np.prod(in_shape)),)
        elif kind == "linear":
            if len(in_shape) != 1:
                raise ShapeMismatch(
                    f"{spec.name}: linear layer needs flattened input, "
                    f"got shape {in_shape}"
                )
            self.param_shapes = {
                "w": (spec.out_features, in_shape[0]),
                "b": (spec.out_features,),
            }
            self.out_shape = (spec.out_features,)
        else:
            raise InvalidInput(f"unknown layer kind {kind!r}")

    def _need_spatial(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatch(
                f"{self.spec.name}: expected (channels, h, w) input, "
                f"got shape {in_shape}"
            )
        return in_shape

    def forward(self, x, train: bool):
        spec = self.spec
        kind = spec.kind
        if kind == "conv":
            y, self._cache = F.conv2d_forward(
                x, self.params["w"], self.params["b"], spec.stride, spec.padding
            )
        elif kind == "batchnorm":
            # Frozen batchnorm keeps using its stored running statistics.
            mode_train = train and not spec.frozen
            y, self._cache, new_mean, new_var = F.batchnorm_forward(
                x, self.params["gamma"], self.params["beta"],
                self.buffers["running_mean"], self.buffers["running_var"],
                spec.momentum, spec.eps, mode_train,
            )
            if mode_train:
                self.buffers["running_mean"] = new_mean
                self.buffers["running_var"] = new_var
        elif kind == "relu":
            y, self._cache = F.relu_forward(x)
        elif kind == "maxpool":
            y, self._cache = F.maxpool_forward(x, spec.kernel, spec.stride)
        elif kind == "upsample":
            y = F.upsample_forward(x, spec.scale)
        elif kind == "flatten":
            self._cache = x.shape
            y = x.reshape(x.shape[0], -1)
        elif kind == "linear":
            y, self._cache = F.linear_forward(x, self.params["w"], self.params["b"])
        return y

    def backward(self, dout):
        spec = self.spec
        kind = spec.kind
        if kind == "conv":
            dx, dw, db = F.conv2d_backward(dout, self._cache)
            self.grads = {"w": dw, "b": db}
        elif kind == "batchnorm":
            dx, dgamma, dbeta = F.batchnorm_backward(dout, self._cache)
            self.grads = {"gamma": dgamma, "beta": dbeta}
        elif kind == "relu":
            dx = F.relu_backward(dout, self._cache)
        elif kind == "maxpool":
            dx = F.maxpool_backward(dout, self._cache)
        elif kind == "upsample":
            dx = F.upsample_backward(dout, spec.scale)
        elif kind == "flatten":
            dx = dout.reshape(self._cache)
        elif kind == "linear":
            dx, dw, db = F.linear_backward(dout, self._cache, self.params["w"])
            self.grads = {"w": dw, "b": db}
        return dx


class Model:
    """A built network: input adapter plus named, optionally frozen layers."""

    def __init__(self, spec: ModelSpec, built: list[_Layer]):
        self.spec = spec
        self.layers = built
        self.out_shape = built[-1].out_shape if built else None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=np.float32)
        if x.ndim != 4 or x.shape[1] != 1:
            raise ShapeMismatch(
                f"model input must be (batch, 1, h, w), got {x.shape}"
            )
        if (x.shape[2], x.shape[3]) != (self.spec.grid_h, self.spec.grid_w):
            raise ShapeMismatch(
                f"model built for {self.spec.grid_h}x{self.spec.grid_w} images, "
                f"got {x.shape[2]}x{x.shape[3]}"
            )
        if self.spec.in_channels > 1:
            x = np.repeat(x, self.spec.in_channels, axis=1)
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, dlogits: np.ndarray) -> None:
        dout = dlogits
        for layer in reversed(self.layers):
            dout = layer.backward(dout)

    def named_params(self):
        for layer in self.layers:
            for pname, arr in layer.params.items():
                yield f"{layer.spec.name}.{pname}", arr

    def named_buffers(self):
        for layer in self.layers:
            for bname, arr in layer.buffers.items():
                yield f"{layer.spec.name}.{bname}", arr

    def trainable_items(self):
        """(name, param, grad) triples for every unfrozen parameter."""
        for layer in self.layers:
            if layer.spec.frozen:
                continue
            for pname, arr in layer.params.items():
                yield f"{layer.spec.name}.{pname}", arr, layer.grads.get(pname)

    def frozen_state(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in self.layers:
            if not layer.spec.frozen:
                continue
            for pname, arr in layer.params.items():
                out[f"{layer.spec.name}.{pname}"] = arr.copy()
            for bname, arr in layer.buffers.items():
                out[f"{layer.spec.name}.{bname}"] = arr.copy()
        return out

    def state_store(self) -> TensorStore:
        named = {"meta.arch": _encode_arch(self.spec),
                 "meta.input": np.array(
                     [self.spec.in_channels, self.spec.grid_h, self.spec.grid_w],
                     dtype=np.float32)}
        for name, arr in self.named_params():
            named[name] = arr
        for name, arr in self.named_buffers():
            named[name] = arr
        return TensorStore.from_arrays(named)

    def load_state(self, store: TensorStore) -> None:
        for layer in self.layers:
            for pname in list(layer.params):
                layer.params[pname] = _fetch(
                    store, f"{layer.spec.name}.{pname}", layer.params[pname].shape
                )
            for bname in list(layer.buffers):
                layer.buffers[bname] = _fetch(
                    store, f"{layer.spec.name}.{bname}", layer.buffers[bname].shape
                )


def _fetch(store: TensorStore, full: str, expected_shape) -> np.ndarray:
    entry = store.get(full)
    if entry is None:
        raise MissingWeight(f"tensor store has no entry {full!r}")
    if entry.shape != tuple(expected_shape):
        raise ShapeMismatch(
            f"{full}: expected shape {tuple(expected_shape)}, "
            f"store has {entry.shape}"
        )
    return entry.array().astype(np.float32, copy=True)


_KIND_CODES = {k: i + 1 for i, k in enumerate(KINDS)}
_GROUP_CODES = {g: i for i, g in enumerate(GROUPS)}
_EXTRACTOR_CODES = {"none": 0, "alexnet": 1, "vgg16": 2}


def _encode_arch(spec: ModelSpec) -> np.ndarray:
    rows = []
    for ls in spec.layers:
        if ls.kind == "batchnorm":
            a, b, c = ls.momentum, ls.eps, 0
        else:
            a, b, c = ls.kernel, ls.stride, ls.padding
        rows.append([
            _KIND_CODES[ls.kind], _GROUP_CODES[ls.group], int(ls.frozen),
            ls.out_ch or ls.channels or ls.out_features, a, b, c, ls.scale,
        ])
    rows.append([0, 0, 0, _EXTRACTOR_CODES.get(spec.extractor, 0), 0, 0, 0, 0])
    return np.array(rows, dtype=np.float32)


def decode_arch(store: TensorStore) -> ModelSpec:
    """Rebuild a ModelSpec from a checkpoint's meta tensors."""
    arch = store.get("meta.arch")
    meta_input = store.get("meta.input")
    if arch is None or meta_input is None:
        raise MissingWeight("checkpoint lacks meta.arch / meta.input tensors")
    in_channels, grid_h, grid_w = (int(v) for v in meta_input.array())
    kind_names = {v: k for k, v in _KIND_CODES.items()}
    group_names = {v: k for k, v in _GROUP_CODES.items()}
    extractor_names = {v: k for k, v in _EXTRACTOR_CODES.items()}
    specs = []
    extractor = "none"
    for row in arch.array():
        code = int(row[0])
        if code == 0:
            extractor = extractor_names.get(int(row[3]), "none")
            continue
        kind = kind_names[code]
        group = group_names[int(row[1])]
        frozen = bool(row[2])
        size = int(row[3])
        if kind == "batchnorm":
            momentum, eps = float(row[4]), float(row[5])
            kernel, stride, padding = 0, 1, 0
        else:
            momentum, eps = 0.1, 1e-5
            kernel, stride, padding = int(row[4]), int(row[5]), int(row[6])
        specs.append(LayerSpec(
            kind, group, frozen,
            out_ch=size if kind == "conv" else 0,
            kernel=kernel, stride=stride, padding=padding,
            channels=size if kind == "batchnorm" else 0,
            momentum=momentum, eps=eps,
            out_features=size if kind == "linear" else 0,
            scale=int(row[7]),
        ))
    return ModelSpec(layers=_autoname(specs), in_channels=in_channels,
                     grid_h=grid_h, grid_w=grid_w, extractor=extractor)


def _kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def build_model(spec: ModelSpec, weights: TensorStore | None = None,
                seed: int = 0) -> Model:
    """Instantiate and initialize the stack described by spec.

    Frozen layers require matching entries in ``weights`` (name and shape);
    trainable convolutions and linears get Kaiming-uniform fan-in draws,
    batchnorm starts at identity with (0, 1) running stats.
    """
    rng = np.random.default_rng(seed)
    shape = (spec.in_channels, spec.grid_h, spec.grid_w)
    built: list[_Layer] = []
    for ls in spec.layers:
        layer = _Layer(ls, shape)
        shape = layer.out_shape
        buffer_shapes = (
            {"running_mean": (ls.channels,), "running_var": (ls.channels,)}
            if ls.kind == "batchnorm" else {}
        )
        if ls.frozen:
            if weights is None:
                raise MissingWeight(
                    f"{ls.name} is frozen but no tensor store was provided"
                )
            for pname, pshape in layer.param_shapes.items():
                layer.params[pname] = _fetch(weights, f"{ls.name}.{pname}", pshape)
            for bname, bshape in buffer_shapes.items():
                layer.buffers[bname] = _fetch(weights, f"{ls.name}.{bname}", bshape)
        else:
            if ls.kind == "batchnorm":
                layer.buffers = {
                    "running_mean": np.zeros(ls.channels, dtype=np.float32),
                    "running_var": np.ones(ls.channels, dtype=np.float32),
                }
            for pname, pshape in layer.param_shapes.items():
                if pname in ("b", "beta"):
                    layer.params[pname] = np.zeros(pshape, dtype=np.float32)
                elif pname == "gamma":
                    layer.params[pname] = np.ones(pshape, dtype=np.float32)
                else:
                    fan_in = (
                        int(np.prod(pshape[1:])) if len(pshape) > 1 else pshape[0]
                    )
                    layer.params[pname] = _kaiming_uniform(rng, pshape, fan_in)
        built.append(layer)
    if any(ls.group == "clf" for ls in spec.layers):
        if built[-1].out_shape != (2,):
            raise ShapeMismatch(
                f"classifier must end in 2 logits, got {built[-1].out_shape}"
            )
    return Model(spec, built)
