"""Model assembly: layer specs, parameter initialization, forward/backward
orchestration, and the two architectures used throughout the project.

A model is a backbone ending in flat features plus one dense softmax head
per output character; single-character classifiers are the one-head case.
Weights initialize with He scaling (all hidden activations are relu).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import Rng
from . import layers as L

KINDS = ("conv2d", "relu", "maxpool2d", "dropout", "batchnorm", "flatten", "dense")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int = 0
    kernel: tuple[int, int] = (0, 0)
    stride: int = 1
    padding: str = "valid"
    window: int = 0
    rate: float = 0.0
    out_features: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv2d":
            if self.out_channels < 1 or min(self.kernel) < 1 or self.stride < 1:
                raise ValueError(f"bad conv2d params: {self}")
            if self.padding not in L.PADDINGS:
                raise ValueError(f"padding must be one of {L.PADDINGS}, got {self.padding!r}")
        elif self.kind == "maxpool2d":
            if self.window < 1 or self.stride < 1:
                raise ValueError(f"bad maxpool2d params: {self}")
        elif self.kind == "dropout":
            if not 0.0 <= self.rate < 1.0:
                raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")
        elif self.kind == "dense" and self.out_features < 1:
            raise ValueError(f"dense needs out_features >= 1, got {self.out_features}")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "conv2d":
            out.update(
                out_channels=self.out_channels,
                kernel=list(self.kernel),
                stride=self.stride,
                padding=self.padding,
            )
        elif self.kind == "maxpool2d":
            out.update(window=self.window, stride=self.stride)
        elif self.kind == "dropout":
            out.update(rate=self.rate)
        elif self.kind == "dense":
            out.update(out_features=self.out_features)
        return out

    @staticmethod
    def from_json(obj: dict) -> "LayerSpec":
        obj = dict(obj)
        if "kernel" in obj:
            obj["kernel"] = tuple(obj["kernel"])
        return LayerSpec(**obj)


def conv2d(out_channels: int, kernel: int | tuple[int, int] = 3, stride: int = 1,
           padding: str = "valid") -> LayerSpec:
    if isinstance(kernel, int):
        kernel = (kernel, kernel)
    return LayerSpec("conv2d", out_channels=out_channels, kernel=kernel,
                     stride=stride, padding=padding)

def relu() -> LayerSpec:
    return LayerSpec("relu")

def maxpool2d(window: int = 2, stride: int | None = None) -> LayerSpec:
    return LayerSpec("maxpool2d", window=window, stride=stride or window)

def dropout(rate: float) -> LayerSpec:
    return LayerSpec("dropout", rate=rate)

def batchnorm() -> LayerSpec:
    return LayerSpec("batchnorm")

def flatten() -> LayerSpec:
    return LayerSpec("flatten")

def dense(out_features: int) -> LayerSpec:
    return LayerSpec("dense", out_features=out_features)


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, int, int]  # (H, W, C)
    backbone: tuple[LayerSpec, ...]
    charset: str
    n_heads: int = 1

    def __post_init__(self):
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f"input shape must be (H, W, C), got {self.input_shape}")
        if not self.charset or len(set(self.charset)) != len(self.charset):
            raise ValueError("charset must be non-empty with unique characters")
        if self.n_heads < 1:
            raise ValueError(f"need at least one head, got {self.n_heads}")
        object.__setattr__(self, "backbone", tuple(self.backbone))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))

    def to_json(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "backbone": [s.to_json() for s in self.backbone],
            "charset": self.charset,
            "n_heads": self.n_heads,
        }

    @staticmethod
    def from_json(obj: dict) -> "ModelSpec":
        return ModelSpec(
            tuple(obj["input_shape"]),
            tuple(LayerSpec.from_json(s) for s in obj["backbone"]),
            obj["charset"],
            obj["n_heads"],
        )


class _Conv:
    def __init__(self, spec: LayerSpec, in_shape, rng: Rng, dtype):
        h, w, cin = in_shape
        kh, kw = spec.kernel
        self.spec = spec
        std = np.sqrt(2.0 / (kh * kw * cin))
        self.w = (rng.normal_block(kh * kw * cin * spec.out_channels) * std).reshape(
            kh, kw, cin, spec.out_channels
        ).astype(dtype)
        self.b = np.zeros(spec.out_channels, dtype=dtype)
        oh, ow, *_ = L._conv_geometry(h, w, kh, kw, spec.stride, spec.padding)
        self.out_shape = (oh, ow, spec.out_channels)
        self.x = None
        self.grads = {}

    def forward(self, x, training, rng):
        self.x = x if training else None
        return L.conv2d_forward(x, self.w, self.b, self.spec.stride, self.spec.padding)

    def backward(self, dy):
        dx, dw, db = L.conv2d_backward(dy, self.x, self.w, self.spec.stride, self.spec.padding)
        self.grads = {"w": dw, "b": db}
        return dx

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def state(self):
        return self.params()


class _Relu:
    def __init__(self, spec, in_shape, rng, dtype):
        self.out_shape = in_shape
        self.x = None

    def forward(self, x, training, rng):
        self.x = x if training else None
        return L.relu_forward(x)

    def backward(self, dy):
        return L.relu_backward(dy, self.x)

    def params(self):
        return []

    def state(self):
        return []


class _MaxPool:
    def __init__(self, spec: LayerSpec, in_shape, rng, dtype):
        h, w, c = in_shape
        if spec.window > h or spec.window > w:
            raise ValueError(f"pool window {spec.window} exceeds feature map {h}x{w}")
        self.spec = spec
        self.out_shape = (
            (h - spec.window) // spec.stride + 1,
            (w - spec.window) // spec.stride + 1,
            c,
        )
        self.x = None

    def forward(self, x, training, rng):
        self.x = x if training else None
        return L.maxpool2d_forward(x, self.spec.window, self.spec.stride)

    def backward(self, dy):
        return L.maxpool2d_backward(dy, self.x, self.spec.window, self.spec.stride)

    def params(self):
        return []

    def state(self):
        return []


class _Dropout:
    def __init__(self, spec: LayerSpec, in_shape, rng, dtype):
        self.rate = spec.rate
        self.out_shape = in_shape
        self.mask = None

    def forward(self, x, training, rng):
        y, self.mask = L.dropout_forward(x, self.rate, rng, training)
        return y

    def backward(self, dy):
        return L.dropout_backward(dy, self.mask, self.rate)

    def params(self):
        return []

    def state(self):
        return []


class _BatchNorm:
    def __init__(self, spec, in_shape, rng, dtype):
        c = in_shape[-1]
        self.gamma = np.ones(c, dtype=dtype)
        self.beta = np.zeros(c, dtype=dtype)
        self.running_mean = np.zeros(c, dtype=dtype)
        self.running_var = np.ones(c, dtype=dtype)
        self.out_shape = in_shape
        self.x = None
        self.grads = {}

    def forward(self, x, training, rng, update_running=True):
        self.x = x if training else None
        return L.batchnorm_forward(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            training, update_running=update_running,
        )

    def backward(self, dy):
        dx, dgamma, dbeta = L.batchnorm_backward(dy, self.x, self.gamma)
        self.grads = {"gamma": dgamma, "beta": dbeta}
        return dx

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state(self):
        return self.params() + [
            ("running_mean", self.running_mean),
            ("running_var", self.running_var),
        ]


class _Flatten:
    def __init__(self, spec, in_shape, rng, dtype):
        self.in_shape = in_shape
        self.out_shape = (int(np.prod(in_shape)),)

    def forward(self, x, training, rng):
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(dy.shape[0], *self.in_shape)

    def params(self):
        return []

    def state(self):
        return []


class _Dense:
    def __init__(self, spec: LayerSpec, in_shape, rng: Rng, dtype):
        if len(in_shape) != 1:
            raise ValueError(f"dense needs flat input, got feature shape {in_shape}")
        fan_in = in_shape[0]
        std = np.sqrt(2.0 / fan_in)
        self.w = (rng.normal_block(fan_in * spec.out_features) * std).reshape(
            fan_in, spec.out_features
        ).astype(dtype)
        self.b = np.zeros(spec.out_features, dtype=dtype)
        self.out_shape = (spec.out_features,)
        self.x = None
        self.grads = {}

    def forward(self, x, training, rng):
        self.x = x if training else None
        return L.dense_forward(x, self.w, self.b)

    def backward(self, dy):
        dx, dw, db = L.dense_backward(dy, self.x, self.w)
        self.grads = {"w": dw, "b": db}
        return dx

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def state(self):
        return self.params()


_LAYER_CLASSES = {
    "conv2d": _Conv,
    "relu": _Relu,
    "maxpool2d": _MaxPool,
    "dropout": _Dropout,
    "batchnorm": _BatchNorm,
    "flatten": _Flatten,
    "dense": _Dense,
}


class Model:
    """A built network: backbone layers plus per-character dense heads.

    Forward in training mode caches activations for one backward pass;
    inference mode caches nothing and applies dropout/batchnorm in their
    deterministic forms.
    """

    def __init__(self, spec: ModelSpec, rng: Rng, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        shape = spec.input_shape
        self.layers = []
        for ls in spec.backbone:
            if ls.kind in ("conv2d", "maxpool2d") and len(shape) != 3:
                raise ValueError(f"{ls.kind} needs a spatial input, got feature shape {shape}")
            layer = _LAYER_CLASSES[ls.kind](ls, shape, rng, self.dtype)
            shape = layer.out_shape
            self.layers.append(layer)
        if len(shape) != 1:
            raise ValueError(f"backbone must end in flat features, got shape {shape}")
        head_spec = dense(len(spec.charset))
        self.heads = [_Dense(head_spec, shape, rng, self.dtype) for _ in range(spec.n_heads)]

    @property
    def charset(self) -> str:
        return self.spec.charset

    def forward(self, x, training: bool = False, rng: Rng | None = None,
                update_running: bool | None = None):
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.spec.input_shape:
            raise ValueError(
                f"input shape {x.shape[1:]} does not match model input {self.spec.input_shape}"
            )
        if update_running is None:
            update_running = training
        for layer in self.layers:
            if isinstance(layer, _BatchNorm):
                x = layer.forward(x, training, rng, update_running=update_running)
            else:
                x = layer.forward(x, training, rng)
        return [h.forward(x, training, rng) for h in self.heads]

    def backward(self, dlogits: list[np.ndarray]):
        if len(dlogits) != len(self.heads):
            raise ValueError(f"got {len(dlogits)} head gradients for {len(self.heads)} heads")
        dx = self.heads[0].backward(dlogits[0])
        for head, dl in zip(self.heads[1:], dlogits[1:]):
            dx += head.backward(dl)
        for layer in reversed(self.layers):
            dx = layer.backward(dx)
        return dx

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        """Trainable arrays in declared order, with stable dotted names."""
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"backbone{i}.{n}", a) for n, a in layer.params())
        for j, head in enumerate(self.heads):
            out.extend((f"head{j}.{n}", a) for n, a in head.params())
        return out

    def grad_items(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            if hasattr(layer, "grads"):
                out.extend((f"backbone{i}.{n}", g) for n, g in layer.grads.items())
        for j, head in enumerate(self.heads):
            out.extend((f"head{j}.{n}", g) for n, g in head.grads.items())
        return out

    def state_items(self) -> list[tuple[str, np.ndarray]]:
        """Everything that must persist: parameters plus running statistics."""
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"backbone{i}.{n}", a) for n, a in layer.state())
        for j, head in enumerate(self.heads):
            out.extend((f"head{j}.{n}", a) for n, a in head.state())
        return out

    def snapshot(self) -> list[tuple[str, np.ndarray]]:
        return [(n, a.copy()) for n, a in self.state_items()]

    def restore(self, snap: list[tuple[str, np.ndarray]]) -> None:
        current = dict(self.state_items())
        for name, saved in snap:
            current[name][...] = saved


def build_model(spec: ModelSpec, rng: Rng, dtype=np.float32) -> Model:
    return Model(spec, rng, dtype)


def predict_strings(model: Model, xs) -> list[str]:
    """Batch inference: per-head argmax mapped through the charset."""
    logits = model.forward(xs, training=False)
    picks = [lg.argmax(axis=1) for lg in logits]
    cs = model.charset
    return ["".join(cs[int(p[i])] for p in picks) for i in range(len(xs))]


def predict_string(model: Model, x) -> str:
    x = np.asarray(x)
    if x.shape != model.spec.input_shape:
        raise ValueError(f"image shape {x.shape} does not match model input {model.spec.input_shape}")
    return predict_strings(model, x[None])[0]


def char_cnn_spec(charset: str, cell: int = 16) -> ModelSpec:
    """Stacked 3x3 conv pairs with pooling and dropout, then a wide dense
    layer; one softmax head. Sized for small square glyph cells."""
    backbone = (
        conv2d(32, 3, padding="same"), relu(),
        conv2d(32, 3), relu(),
        maxpool2d(2), dropout(0.25),
        conv2d(64, 3, padding="same"), relu(),
        conv2d(64, 3), relu(),
        maxpool2d(2), dropout(0.25),
        flatten(),
        dense(512), relu(), dropout(0.5),
    )
    return ModelSpec((cell, cell, 1), backbone, charset, n_heads=1)


def multihead_spec(charset: str, length: int, height: int, width: int) -> ModelSpec:
    """Whole-image model with one classification head per character
    position: three conv/pool stages into a wide dense layer."""
    backbone = (
        conv2d(32, 3), relu(), maxpool2d(2),
        conv2d(64, 3), relu(), maxpool2d(2),
        conv2d(64, 3), relu(), maxpool2d(2),
        flatten(),
        dense(1024), relu(), dropout(0.5),
    )
    return ModelSpec((height, width, 1), backbone, charset, n_heads=length)
