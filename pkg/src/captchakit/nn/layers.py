"""Layer primitives: forward functions plus matching exact backward passes.

Convolution is cross-correlation (no kernel flip) over NHWC tensors with
HWIO kernels. Forward and backward are lowered to one matmul per kernel
offset instead of an explicit window loop; summation within each offset runs
over input channels first, then offsets accumulate in row-major order, the
same order a naive triple loop uses.

All backwards recompute what they need from the saved inputs rather than
threading opaque cache objects around.
"""

from __future__ import annotations

import numpy as np

from ..rng import Rng

PADDINGS = ("valid", "same")


def _conv_geometry(h: int, w: int, kh: int, kw: int, stride: int, padding: str):
    """Output spatial dims plus asymmetric pad amounts (extra pixel goes
    after, not before)."""
    if padding == "valid":
        if h < kh or w < kw:
            raise ValueError(
                f"valid conv needs input >= kernel, got {h}x{w} vs {kh}x{kw}"
            )
        return (h - kh) // stride + 1, (w - kw) // stride + 1, 0, 0, 0, 0
    oh = -(-h // stride)
    ow = -(-w // stride)
    ph = max((oh - 1) * stride + kh - h, 0)
    pw = max((ow - 1) * stride + kw - w, 0)
    return oh, ow, ph // 2, ph - ph // 2, pw // 2, pw - pw // 2

def _check_conv_args(x, w, b, stride, padding):
    if x.ndim != 4:
        raise ValueError(f"conv input must be NHWC, got {x.ndim} dims {x.shape}")
    if w.ndim != 4:
        raise ValueError(f"conv kernel must be (kh, kw, cin, cout), got {w.shape}")
    if x.shape[3] != w.shape[2]:
        raise ValueError(
            f"conv input has {x.shape[3]} channels but kernel expects {w.shape[2]}"
        )
    if b.shape != (w.shape[3],):
        raise ValueError(f"bias shape {b.shape} != ({w.shape[3]},)")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if padding not in PADDINGS:
        raise ValueError(f"padding must be one of {PADDINGS}, got {padding!r}")

def _pad_input(x, pt, pb, pl, pr):
    if pt == pb == pl == pr == 0:
        return x
    return np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))


def conv2d_forward(x, w, b, stride: int = 1, padding: str = "valid"):
    _check_conv_args(x, w, b, stride, padding)
    kh, kw = w.shape[:2]
    oh, ow, pt, pb, pl, pr = _conv_geometry(x.shape[1], x.shape[2], kh, kw, stride, padding)
    xp = _pad_input(x, pt, pb, pl, pr)
    y = np.zeros((x.shape[0], oh, ow, w.shape[3]), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            xs = xp[:, u : u + oh * stride : stride, v : v + ow * stride : stride, :]
            y += np.tensordot(xs, w[u, v], axes=([3], [0]))
    return y + b


def conv2d_backward(dy, x, w, stride: int = 1, padding: str = "valid"):
    """Gradients of a sum-reduced loss wrt input, kernel, bias."""
    kh, kw = w.shape[:2]
    oh, ow, pt, pb, pl, pr = _conv_geometry(x.shape[1], x.shape[2], kh, kw, stride, padding)
    if dy.shape != (x.shape[0], oh, ow, w.shape[3]):
        raise ValueError(
            f"upstream gradient is {dy.shape}, expected {(x.shape[0], oh, ow, w.shape[3])}"
        )
    xp = _pad_input(x, pt, pb, pl, pr)
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for u in range(kh):
        for v in range(kw):
            rows = slice(u, u + oh * stride, stride)
            cols = slice(v, v + ow * stride, stride)
            dw[u, v] = np.tensordot(xp[:, rows, cols, :], dy, axes=([0, 1, 2], [0, 1, 2]))
            dxp[:, rows, cols, :] += np.tensordot(dy, w[u, v], axes=([3], [1]))
    db = dy.sum(axis=(0, 1, 2))
    dx = dxp[:, pt : pt + x.shape[1], pl : pl + x.shape[2], :]
    return dx, dw, db


def _pool_patches(x, window: int, stride: int):
    if x.ndim != 4:
        raise ValueError(f"pool input must be NHWC, got {x.ndim} dims {x.shape}")
    if window > x.shape[1] or window > x.shape[2]:
        raise ValueError(
            f"pool window {window} exceeds spatial dims {x.shape[1]}x{x.shape[2]}"
        )
    oh = (x.shape[1] - window) // stride + 1
    ow = (x.shape[2] - window) // stride + 1
    slabs = [
        x[:, u : u + oh * stride : stride, v : v + ow * stride : stride, :]
        for u in range(window)
        for v in range(window)
    ]
    return np.stack(slabs, axis=-1), oh, ow


def maxpool2d_forward(x, window: int, stride: int | None = None):
    patches, _, _ = _pool_patches(x, window, stride or window)
    return patches.max(axis=-1)


def maxpool2d_backward(dy, x, window: int, stride: int | None = None):
    """Routes gradient to each window's max; ties go to the first position
    in row-major window order (argmax picks the first hit)."""
    stride = stride or window
    patches, oh, ow = _pool_patches(x, window, stride)
    if dy.shape != patches.shape[:4]:
        raise ValueError(f"upstream gradient is {dy.shape}, expected {patches.shape[:4]}")
    winner = patches.argmax(axis=-1)
    dx = np.zeros_like(x)
    for flat in range(window * window):
        u, v = divmod(flat, window)
        dx[:, u : u + oh * stride : stride, v : v + ow * stride : stride, :] += dy * (
            winner == flat
        )
    return dx


def dense_forward(x, w, b):
    if x.ndim != 2:
        raise ValueError(f"dense input must be (batch, features), got {x.shape}")
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"dense input has {x.shape[1]} features but weights expect {w.shape[0]}")
    return x @ w + b

def dense_backward(dy, x, w):
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0)

def relu_backward(dy, x):
    # Strict inequality: gradient at exactly 0 is 0.
    return dy * (x > 0)


def dropout_forward(x, rate: float, rng: Rng | None, training: bool):
    """Inverted dropout: survivors are scaled by 1/(1-rate) at training time
    so inference is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, np.ones_like(x)
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    mask = (rng.uniform_block(x.size) >= rate).astype(x.dtype).reshape(x.shape)
    return x * mask / (1.0 - rate), mask

def dropout_backward(dy, mask, rate: float):
    return dy * mask / (1.0 - rate)


def batchnorm_forward(
    x,
    gamma,
    beta,
    running_mean,
    running_var,
    training: bool,
    eps: float = 1e-5,
    momentum: float = 0.9,
    update_running: bool = True,
):
    """Normalizes over every axis but the last. Training mode uses batch
    statistics and (optionally) folds them into the running estimates in
    place; inference applies the fixed running affine map."""
    axes = tuple(range(x.ndim - 1))
    if training:
        if x.shape[0] < 2:
            raise ValueError("batch norm needs a batch of at least 2 in training mode")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        if update_running:
            running_mean *= momentum
            running_mean += (1.0 - momentum) * mean
            running_var *= momentum
            running_var += (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
    return gamma * (x - mean) / np.sqrt(var + eps) + beta


def batchnorm_backward(dy, x, gamma, eps: float = 1e-5):
    """Training-mode gradients through the batch statistics."""
    axes = tuple(range(x.ndim - 1))
    m = x.size // x.shape[-1]
    mean = x.mean(axis=axes)
    ivstd = 1.0 / np.sqrt(x.var(axis=axes) + eps)
    xhat = (x - mean) * ivstd
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma
    dx = (ivstd / m) * (
        m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes)
    )
    return dx, dgamma, dbeta


def softmax_xent(logits, one_hot):
    """Mean cross-entropy over the batch with max-subtracted softmax.

    Returns (loss, dlogits) where dlogits = (softmax - one_hot) / batch.
    """
    if logits.shape != one_hot.shape or logits.ndim != 2:
        raise ValueError(
            f"logits {logits.shape} and one-hot targets {one_hot.shape} must be equal 2-D shapes"
        )
    if not (((one_hot == 0) | (one_hot == 1)).all() and (one_hot.sum(axis=1) == 1).all()):
        raise ValueError("targets must be exactly one-hot rows")
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-(one_hot * logp).sum() / logits.shape[0])
    dlogits = (np.exp(logp) - one_hot) / logits.shape[0]
    return loss, dlogits
