"""k-nearest-neighbor character classifier over normalized glyph cells.

Features are flattened cells scaled to [0, 1]. Distances are squared
Euclidean, computed directly as sum((a - b)^2) rather than the usual
a.a + b.b - 2 a.b expansion: the expansion's rounding can give a nonzero
self-distance, which would break exact-tie behavior and the k=1
training-point invariant.

Neighbor order is (distance, training index) with a stable sort, so ties at
the k boundary are deterministic. Votes resolve by count, then by smaller
summed distance among tied classes, then by lower class id.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass

import numpy as np

from .imageio import GrayImage

_MAGIC = "KNN1"


@dataclass
class KnnModel:
    features: np.ndarray  # (n, cell*cell) float32 in [0, 1]
    labels: np.ndarray  # (n,) int32 indices into charset
    charset: str
    cell: int


def fit(cells: list[GrayImage], labels: list[str], charset: str | None = None) -> KnnModel:
    """Store normalized training cells. `labels` are single characters; the
    charset defaults to the sorted set of observed labels."""
    if not cells:
        raise ValueError("need at least one training cell")
    if len(cells) != len(labels):
        raise ValueError(f"{len(cells)} cells but {len(labels)} labels")
    side = cells[0].data.shape[0]
    for i, c in enumerate(cells):
        if c.data.shape != (side, side):
            raise ValueError(
                f"cell {i} is {c.data.shape}, expected ({side}, {side}) like cell 0"
            )
    if charset is None:
        charset = "".join(sorted(set(labels)))
    lut = {ch: i for i, ch in enumerate(charset)}
    for lab in labels:
        if len(lab) != 1 or lab not in lut:
            raise ValueError(f"label {lab!r} not a single charset character")
    feats = np.stack([c.data.reshape(-1) for c in cells]).astype(np.float32) / 255.0
    ids = np.array([lut[lab] for lab in labels], dtype=np.int32)
    return KnnModel(feats, ids, charset, side)


def _vote(model: KnnModel, order: np.ndarray, dists: np.ndarray, k: int) -> str:
    top = order[:k]
    ids = model.labels[top]
    counts = np.bincount(ids, minlength=len(model.charset))
    best = counts.max()
    tied = np.flatnonzero(counts == best)
    if len(tied) > 1:
        sums = np.array([dists[top[ids == c]].sum() for c in tied])
        tied = tied[np.flatnonzero(sums == sums.min())]
    return model.charset[int(tied[0])]


def _check_k(model: KnnModel, k: int) -> None:
    if not 1 <= k <= len(model.features):
        raise ValueError(f"k must be in [1, {len(model.features)}], got {k}")


def predict(model: KnnModel, cell: GrayImage, k: int) -> str:
    _check_k(model, k)
    q = cell.data.reshape(-1).astype(np.float32) / 255.0
    if q.shape[0] != model.features.shape[1]:
        raise ValueError(
            f"query has {q.shape[0]} features, model expects {model.features.shape[1]}"
        )
    diff = model.features - q
    dists = np.einsum("nd,nd->n", diff, diff)
    order = np.argsort(dists, kind="stable")
    return _vote(model, order, dists, k)


def predict_batch(model: KnnModel, cells: list[GrayImage], k: int) -> list[str]:
    return [predict(model, c, k) for c in cells]


def sweep_k(
    model: KnnModel, cells: list[GrayImage], labels: list[str], ks: list[int]
) -> list[tuple[int, float]]:
    """Accuracy over a validation set for each k; ks must be valid and the
    validation set non-empty."""
    if not cells:
        raise ValueError("validation set is empty")
    if len(cells) != len(labels):
        raise ValueError(f"{len(cells)} cells but {len(labels)} labels")
    if not ks:
        raise ValueError("ks is empty")
    for k in ks:
        _check_k(model, k)
    out = []
    for k in ks:
        hits = sum(predict(model, c, k) == lab for c, lab in zip(cells, labels))
        out.append((k, hits / len(cells)))
    return out


def save_knn(model: KnnModel, path) -> None:
    """JSON header line, then raw little-endian float32 feature rows, then a
    crc32 of the payload (8 hex bytes)."""
    payload = model.features.astype("<f4").tobytes()
    header = {
        "magic": _MAGIC,
        "cell": model.cell,
        "charset": model.charset,
        "n": int(len(model.features)),
        "labels": "".join(model.charset[i] for i in model.labels),
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("ascii") + b"\n")
        f.write(payload)
        f.write(f"{zlib.crc32(payload):08x}".encode("ascii"))


def load_knn(path) -> KnnModel:
    with open(path, "rb") as f:
        header_line = f.readline()
        rest = f.read()
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: bad model header: {e}") from e
    if header.get("magic") != _MAGIC:
        raise ValueError(f"{path}: unknown model format {header.get('magic')!r}")
    n = header["n"]
    cell = header["cell"]
    expected = n * cell * cell * 4
    payload, crc = rest[:expected], rest[expected:]
    if len(payload) != expected or len(crc) != 8:
        raise ValueError(
            f"{path}: truncated model, expected {expected} payload bytes + 8 crc, "
            f"got {len(rest)}"
        )
    if f"{zlib.crc32(payload):08x}".encode("ascii") != crc:
        raise ValueError(f"{path}: checksum mismatch")
    feats = np.frombuffer(payload, dtype="<f4").reshape(n, cell * cell).copy()
    lut = {ch: i for i, ch in enumerate(header["charset"])}
    ids = np.array([lut[ch] for ch in header["labels"]], dtype=np.int32)
    return KnnModel(feats, ids, header["charset"], cell)
