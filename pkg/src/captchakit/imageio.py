"""Image containers, binary PGM/PPM codecs and the JSONL dataset manifest.

Images are thin wrappers around numpy arrays with validated shape and dtype:

- `GrayImage`: (h, w) uint8
- `RgbImage`:  (h, w, 3) uint8
- `BinaryImage`: (h, w) bool, True = ink. Canonical polarity is always
  "ink is True" regardless of how a source file encoded foreground.

File formats are the binary netpbm flavors only (P5 / P6, maxval 255).
Dataset manifests are JSONL, one record per line:
    {"file": "img/000001.pgm", "label": "7A3", "split": "train"}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

SPLITS = ("train", "val", "test", "unlabeled")


class PnmError(ValueError):
    """Malformed, unsupported or truncated PGM/PPM data."""


def _check_2d_u8(data: np.ndarray, kind: str) -> np.ndarray:
    data = np.asarray(data)
    if data.dtype != np.uint8:
        raise ValueError(f"{kind} data must be uint8, got {data.dtype}")
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise ValueError(f"{kind} data must be (h, w) with h, w >= 1, got shape {data.shape}")
    return data


@dataclass
class GrayImage:
    """Single-channel 8-bit image, row-major."""

    data: np.ndarray

    def __post_init__(self):
        self.data = _check_2d_u8(self.data, "GrayImage")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class RgbImage:
    """Interleaved 8-bit RGB image, row-major."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype != np.uint8:
            raise ValueError(f"RgbImage data must be uint8, got {data.dtype}")
        if data.ndim != 3 or data.shape[2] != 3 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"RgbImage data must be (h, w, 3), got shape {data.shape}")
        self.data = data

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class BinaryImage:
    """Boolean ink mask; True is ink no matter what the source encoding was."""

    ink: np.ndarray

    def __post_init__(self):
        ink = np.asarray(self.ink)
        if ink.dtype != np.bool_:
            raise ValueError(f"BinaryImage ink must be bool, got {ink.dtype}")
        if ink.ndim != 2 or ink.shape[0] < 1 or ink.shape[1] < 1:
            raise ValueError(f"BinaryImage ink must be (h, w) with h, w >= 1, got shape {ink.shape}")
        self.ink = ink

    @property
    def height(self) -> int:
        return self.ink.shape[0]

    @property
    def width(self) -> int:
        return self.ink.shape[1]

    def to_gray(self, ink_value: int = 0, bg_value: int = 255) -> GrayImage:
        out = np.full(self.ink.shape, bg_value, dtype=np.uint8)
        out[self.ink] = ink_value
        return GrayImage(out)


def _read_pnm_payload(raw: bytes, magic: bytes, channels: int, path) -> np.ndarray:
    if raw[:2] != magic:
        raise PnmError(
            f"{path}: unsupported magic {raw[:2]!r} at byte 0, expected {magic.decode()}"
        )
    # Header tokens (width, height, maxval) separated by whitespace; comments
    # beginning with '#' are allowed between tokens per the netpbm spec.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tok = raw[start:pos]
        if not tok.isdigit():
            raise PnmError(f"{path}: bad header token {tok!r} at byte {start}")
        fields.append(int(tok))
    if pos >= len(raw):
        raise PnmError(f"{path}: header ends at byte {pos} with no pixel data")
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if w < 1 or h < 1:
        raise PnmError(f"{path}: bad dimensions {w}x{h}")
    if maxval != 255:
        raise PnmError(f"{path}: unsupported maxval {maxval}, only 255 is handled")
    expected = w * h * channels
    payload = raw[pos : pos + expected]
    if len(payload) != expected:
        raise PnmError(
            f"{path}: truncated pixel data, expected {expected} bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(h, w)
    return arr.reshape(h, w, channels)


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as f:
        raw = f.read()
    return GrayImage(_read_pnm_payload(raw, b"P5", 1, path))


def read_ppm(path) -> RgbImage:
    with open(path, "rb") as f:
        raw = f.read()
    return RgbImage(_read_pnm_payload(raw, b"P6", 3, path))


def write_pgm(img: GrayImage, path) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header + img.data.tobytes())


def write_ppm(img: RgbImage, path) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header + img.data.tobytes())


def read_image(path) -> GrayImage | RgbImage:
    """Dispatch on file magic (P5 -> gray, P6 -> rgb)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"P5":
        return GrayImage(_read_pnm_payload(raw, b"P5", 1, path))
    if raw[:2] == b"P6":
        return RgbImage(_read_pnm_payload(raw, b"P6", 3, path))
    raise PnmError(f"{path}: unsupported magic {raw[:2]!r} at byte 0")


@dataclass
class ManifestRecord:
    file: str
    label: str
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"bad split {self.split!r}, expected one of {SPLITS}")

    def to_json(self) -> str:
        return json.dumps({"file": self.file, "label": self.label, "split": self.split})


@dataclass
class DatasetManifest:
    records: list[ManifestRecord] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.file in seen:
                raise ValueError(f"duplicate file path in manifest: {r.file!r}")
            seen.add(r.file)

    def by_split(self, split: str) -> list[ManifestRecord]:
        if split not in SPLITS:
            raise ValueError(f"bad split {split!r}, expected one of {SPLITS}")
        return [r for r in self.records if r.split == split]

    def __len__(self) -> int:
        return len(self.records)


MANIFEST_NAME = "manifest.jsonl"


def load_manifest(path) -> DatasetManifest:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rec = ManifestRecord(file=obj["file"], label=obj["label"], split=obj["split"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path}: malformed manifest line {lineno}: {e}") from e
            records.append(rec)
    return DatasetManifest(records)


def append_manifest(path, record: ManifestRecord) -> None:
    """Append one record as a single JSONL line.

    Raises ValueError if the path is already present; the write itself is a
    single os.write of one line, so concurrent appenders never interleave
    partial lines.
    """
    if os.path.exists(path):
        existing = load_manifest(path)
        if any(r.file == record.file for r in existing.records):
            raise ValueError(f"duplicate file path in manifest: {record.file!r}")
    line = (record.to_json() + "\n").encode("utf-8")
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)
    try:
        os.write(fd, line)
    finally:
        os.close(fd)


def write_manifest(manifest: DatasetManifest, path) -> None:
    """Rewrite the whole manifest atomically (temp file + rename)."""
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as f:
        for r in manifest.records:
            f.write(r.to_json() + "\n")
    os.replace(tmp, path)
