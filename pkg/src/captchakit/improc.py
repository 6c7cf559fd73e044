"""Image processing primitives: grayscale conversion, global and local
thresholding, Gaussian blur, binary morphology, resampling, and the two
composed cleanup pipelines (strikethrough removal, railway preprocessing).

All operations are pure functions on the containers in `imageio`. Thresholded
output always uses the canonical BinaryImage polarity (True = ink) even when
the source encodes ink as dark-on-light or light-on-dark.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imageio import BinaryImage, GrayImage, RgbImage

POLARITIES = ("ink-below", "ink-above")


@dataclass
class Kernel3x3:
    """Boolean 3x3 structuring element; the center must be set."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (3, 3):
            raise ValueError(f"kernel must be 3x3, got shape {mask.shape}")
        if not mask[1, 1]:
            raise ValueError("kernel center must be set")
        self.mask = mask

    @classmethod
    def full(cls) -> "Kernel3x3":
        return cls(np.ones((3, 3), dtype=bool))

    @classmethod
    def plus(cls) -> "Kernel3x3":
        m = np.zeros((3, 3), dtype=bool)
        m[1, :] = True
        m[:, 1] = True
        return cls(m)


@dataclass
class ThresholdResult:
    threshold: int
    binary: BinaryImage


def to_gray(img: RgbImage) -> GrayImage:
    """Luma conversion: round(0.299 R + 0.587 G + 0.114 B), half rounds up."""
    rgb = img.data.astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return GrayImage(np.floor(luma + 0.5).astype(np.uint8))


def _check_polarity(polarity: str) -> None:
    if polarity not in POLARITIES:
        raise ValueError(f"bad polarity {polarity!r}, expected one of {POLARITIES}")


def otsu(img: GrayImage, polarity: str = "ink-below") -> ThresholdResult:
    """Global threshold maximizing between-class variance.

    The threshold t splits intensities into [0, t] and [t+1, 255]; ties pick
    the lowest t. "ink-below" marks the low class as ink, "ink-above" the
    high class. Constant images have no threshold and raise ValueError.
    """
    _check_polarity(polarity)
    data = img.data
    hist = np.bincount(data.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise ValueError("degenerate image: fewer than two distinct intensities")
    n = data.size
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)            # pixels at or below t
    m0 = np.cumsum(hist * levels)   # first moment at or below t
    w1 = n - w0
    m1 = m0[-1] - m0
    valid = (w0 > 0) & (w1 > 0)
    between = np.zeros(256)
    mu0 = np.divide(m0, w0, out=np.zeros(256), where=valid)
    mu1 = np.divide(m1, w1, out=np.zeros(256), where=valid)
    between[valid] = (w0[valid] / n) * (w1[valid] / n) * (mu0[valid] - mu1[valid]) ** 2
    t = int(np.argmax(between))
    if polarity == "ink-below":
        ink = data <= t
    else:
        ink = data > t
    return ThresholdResult(t, BinaryImage(ink))


def threshold_binary_inv(img: GrayImage, t: int = 127) -> BinaryImage:
    """Pixels strictly below t become ink (inverse binary threshold)."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {t}")
    return BinaryImage(img.data < t)


def _box_mean(data: np.ndarray, block: int) -> np.ndarray:
    """Mean over a block x block window clamped to the image, exact for
    integer-valued input (sums stay below 2**53)."""
    h, w = data.shape
    r = block // 2
    s = np.zeros((h + 1, w + 1), dtype=np.float64)
    s[1:, 1:] = data.astype(np.float64).cumsum(0).cumsum(1)
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - r, 0, h)
    y1 = np.clip(ys + r + 1, 0, h)
    x0 = np.clip(xs - r, 0, w)
    x1 = np.clip(xs + r + 1, 0, w)
    area = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    total = (
        s[y1[:, None], x1[None, :]]
        - s[y0[:, None], x1[None, :]]
        - s[y1[:, None], x0[None, :]]
        + s[y0[:, None], x0[None, :]]
    )
    return total / area


def adaptive_threshold(
    img: GrayImage, block: int = 11, c: float = 2.0, polarity: str = "ink-below"
) -> BinaryImage:
    """Local-mean threshold: each pixel compares against (window mean - c).

    The window is block x block, clamped at the borders (means are taken over
    the in-bounds part). Pixels equal to the local threshold are background
    for either polarity.
    """
    _check_polarity(polarity)
    if block < 3 or block % 2 == 0:
        raise ValueError(f"block must be odd and >= 3, got {block}")
    theta = _box_mean(img.data, block) - c
    if polarity == "ink-below":
        ink = img.data < theta
    else:
        ink = img.data > theta
    return BinaryImage(ink)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps at integer offsets -r..r, r = ceil(3 sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    r = math.ceil(3 * sigma)
    xs = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2 * sigma * sigma))
    return k / k.sum()


def _blur_pass(data: np.ndarray, k: np.ndarray) -> np.ndarray:
    """1-D correlation along the last axis with clamp-replicate borders."""
    r = len(k) // 2
    padded = np.pad(data, [(0, 0)] * (data.ndim - 1) + [(r, r)], mode="edge")
    out = np.zeros_like(data, dtype=np.float64)
    w = data.shape[-1]
    for i, tap in enumerate(k):
        out += tap * padded[..., i : i + w]
    return out


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur; intermediate stays float, one final rounding."""
    k = gaussian_kernel1d(sigma)
    tmp = _blur_pass(img.data.astype(np.float64), k)
    out = _blur_pass(tmp.T, k).T
    return GrayImage(np.floor(out + 0.5).astype(np.uint8))


def _morph(img: BinaryImage, kernel: Kernel3x3, border: bool, combine_all: bool) -> BinaryImage:
    padded = np.pad(img.ink, 1, mode="constant", constant_values=border)
    h, w = img.ink.shape
    acc = None
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if not kernel.mask[dy + 1, dx + 1]:
                continue
            piece = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
            if acc is None:
                acc = piece.copy()
            elif combine_all:
                acc &= piece
            else:
                acc |= piece
    return BinaryImage(acc)


def erode(img: BinaryImage, kernel: Kernel3x3, border: bool = False) -> BinaryImage:
    """A pixel stays ink iff every set kernel offset lands on ink.

    `border` is the virtual value outside the image (default background, so
    full-kernel erosion always clears the outermost ring of ink).
    """
    return _morph(img, kernel, border, combine_all=True)


def dilate(img: BinaryImage, kernel: Kernel3x3, border: bool = False) -> BinaryImage:
    """A pixel becomes ink iff any set kernel offset lands on ink."""
    return _morph(img, kernel, border, combine_all=False)


def resize(img, out_w: int, out_h: int, mode: str = "nearest"):
    """Resample to out_w x out_h with pixel-center alignment.

    src = (dst + 0.5) * (in / out) - 0.5 in both axes; "nearest" rounds the
    source coordinate (half away from zero), "bilinear" interpolates with
    edge clamping. Returns the same container type as the input.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dims must be >= 1, got {out_w}x{out_h}")
    if mode not in ("nearest", "bilinear"):
        raise ValueError(f"bad mode {mode!r}, expected nearest or bilinear")
    if isinstance(img, BinaryImage):
        gray = resize(img.to_gray(ink_value=255, bg_value=0), out_w, out_h, mode)
        return BinaryImage(gray.data >= 128)
    data = img.data
    in_h, in_w = data.shape[:2]
    sy = (np.arange(out_h, dtype=np.float64) + 0.5) * (in_h / out_h) - 0.5
    sx = (np.arange(out_w, dtype=np.float64) + 0.5) * (in_w / out_w) - 0.5
    if mode == "nearest":
        iy = np.clip(np.floor(sy + 0.5), 0, in_h - 1).astype(np.intp)
        ix = np.clip(np.floor(sx + 0.5), 0, in_w - 1).astype(np.intp)
        out = data[iy[:, None], ix[None, :]]
        return type(img)(out.copy())
    sy = np.clip(sy, 0, in_h - 1)
    sx = np.clip(sx, 0, in_w - 1)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (sy - y0).reshape(-1, 1) if data.ndim == 2 else (sy - y0).reshape(-1, 1, 1)
    fx = (sx - x0).reshape(1, -1) if data.ndim == 2 else (sx - x0).reshape(1, -1, 1)
    d = data.astype(np.float64)
    top = d[y0][:, x0] * (1 - fx) + d[y0][:, x1] * fx
    bot = d[y1][:, x0] * (1 - fx) + d[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    return type(img)(np.floor(out + 0.5).astype(np.uint8))


def remove_strikethrough(
    img: GrayImage,
    sigma: float = 1.0,
    low: int = 120,
    high: int = 200,
    midband_to_ink: bool = False,
) -> BinaryImage:
    """Strike-line removal for bright-on-dark text: blur, then double
    threshold. Blurred values >= high are ink, < low are background; the
    mid band defaults to background (thin lines blur into it, glyph cores
    stay above high)."""
    if not 0 <= low <= high <= 255:
        raise ValueError(f"need 0 <= low <= high <= 255, got low={low} high={high}")
    blurred = gaussian_blur(img, sigma).data
    if midband_to_ink:
        return BinaryImage(blurred >= low)
    return BinaryImage(blurred >= high)


def railway_preprocess(img: RgbImage | GrayImage) -> BinaryImage:
    """Cleanup for dark-text-on-light scans with colored speckle: grayscale,
    inverse binary threshold at 127, then erode and dilate with the full 3x3
    kernel to drop isolated noise while keeping stroke weight."""
    gray = to_gray(img) if isinstance(img, RgbImage) else img
    binary = threshold_binary_inv(gray, 127)
    k = Kernel3x3.full()
    return dilate(erode(binary, k), k)
