"""Binary checkpoint layout shared by forecasters and synthesizers.

::

    bytes 0..7     magic b"THAUGCK1"
    bytes 8..11    header length N, uint32 little-endian
    bytes 12..12+N UTF-8 JSON header: {"kind", "meta", "arrays": [{"name", "shape"}, ...]}
    remainder      float64 little-endian values of each array, C order,
                   concatenated in header order

``meta`` carries dimensions (hidden size, K, d, T, ...) and the training
configuration. Integer arrays are stored as float64 and cast back on load.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"THAUGCK1"


def save(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    header = {
        "kind": kind,
        "meta": meta,
        "arrays": [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()],
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load(path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (n,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12 : 12 + n].decode("utf-8"))
    if kind is not None and header["kind"] != kind:
        raise CheckpointError(f"{path}: expected a {kind!r} checkpoint, found {header['kind']!r}")
    off = 12 + n
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        end = off + 8 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated at array {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(raw[off:end], dtype="<f8").reshape(spec["shape"]).astype(np.float64)
        off = end
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes")
    return header["meta"], arrays


def read_kind(path) -> str:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (n,) = struct.unpack("<I", fh.read(4))
        return json.loads(fh.read(n).decode("utf-8"))["kind"]
