"""Weight files: "CFW1", a length-prefixed JSON header followed by raw
little-endian float32 arrays.

Layout: 8-byte little-endian header length, then the header JSON (model
spec, charset, array directory, crc32 of the payload), then every persistent
array in declared order. Round-trips are bit-exact for float32 models.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from ..rng import Rng
from .model import Model, ModelSpec, build_model

VERSION = "CFW1"


def save_weights(model: Model, path) -> None:
    arrays = model.state_items()
    payload = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for _, a in arrays)
    header = {
        "version": VERSION,
        "spec": model.spec.to_json(),
        "charset": model.spec.charset,
        "arrays": [
            {"name": n, "shape": list(a.shape), "dtype": "float32"} for n, a in arrays
        ],
        "checksum": zlib.crc32(payload),
    }
    blob = json.dumps(header).encode("ascii")
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(payload)


def load_weights(path) -> Model:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 8:
        raise ValueError(f"{path}: not a weight file (only {len(raw)} bytes)")
    (hlen,) = struct.unpack("<Q", raw[:8])
    if len(raw) < 8 + hlen:
        raise ValueError(f"{path}: header truncated")
    try:
        header = json.loads(raw[8 : 8 + hlen])
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: bad header JSON: {e}") from e
    if header.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported version {header.get('version')!r}")
    payload = raw[8 + hlen :]
    if zlib.crc32(payload) != header["checksum"]:
        raise ValueError(f"{path}: checksum mismatch, file is corrupt or truncated")

    spec = ModelSpec.from_json(header["spec"])
    model = build_model(spec, Rng(0))
    state = model.state_items()
    declared = header["arrays"]
    if [n for n, _ in state] != [d["name"] for d in declared]:
        raise ValueError(f"{path}: array directory does not match the model spec")
    offset = 0
    for (name, arr), d in zip(state, declared):
        if list(arr.shape) != d["shape"]:
            raise ValueError(
                f"{path}: array {name} has shape {d['shape']}, model expects {list(arr.shape)}"
            )
        nbytes = arr.size * 4
        chunk = payload[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise ValueError(f"{path}: payload ends inside array {name}")
        arr[...] = np.frombuffer(chunk, dtype="<f4").reshape(arr.shape)
        offset += nbytes
    if offset != len(payload):
        raise ValueError(f"{path}: {len(payload) - offset} trailing payload bytes")
    return model
