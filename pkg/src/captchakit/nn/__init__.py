"""Minimal CNN stack with explicit forward/backward passes.

Everything is NHWC over numpy arrays; no autodiff. Layers live in `layers`
as pure functions, `model` assembles them from specs, `train` runs the
optimization loop, `weights` persists trained models, and `gradcheck`
verifies every backward pass against central differences.
"""

from .gradcheck import grad_check
from .layers import (
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    maxpool2d_backward,
    maxpool2d_forward,
    relu_backward,
    relu_forward,
    softmax_xent,
)
from .model import (
    LayerSpec,
    Model,
    ModelSpec,
    batchnorm,
    build_model,
    char_cnn_spec,
    conv2d,
    dense,
    dropout,
    flatten,
    maxpool2d,
    multihead_spec,
    predict_string,
    predict_strings,
    relu,
)
from .train import EpochStats, TrainConfig, encode_labels, evaluate, history_to_csv, train
from .weights import load_weights, save_weights

__all__ = [
    "EpochStats",
    "LayerSpec",
    "Model",
    "ModelSpec",
    "TrainConfig",
    "batchnorm",
    "batchnorm_backward",
    "batchnorm_forward",
    "build_model",
    "char_cnn_spec",
    "conv2d",
    "conv2d_backward",
    "conv2d_forward",
    "dense",
    "dense_backward",
    "dense_forward",
    "dropout",
    "dropout_backward",
    "dropout_forward",
    "encode_labels",
    "evaluate",
    "flatten",
    "grad_check",
    "history_to_csv",
    "load_weights",
    "maxpool2d",
    "maxpool2d_backward",
    "maxpool2d_forward",
    "multihead_spec",
    "predict_string",
    "predict_strings",
    "relu",
    "relu_backward",
    "relu_forward",
    "save_weights",
    "softmax_xent",
    "train",
]
