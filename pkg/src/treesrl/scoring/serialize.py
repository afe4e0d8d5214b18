"""Self-describing binary container for model checkpoints.

Layout: 4-byte magic, u32 version, u64 header length, UTF-8 JSON header,
then the raw array payload. The header lists array names and shapes in
write order plus a free-form metadata dict (config, vocab, roles, seed,
epoch, dev F1). Arrays are float64 little-endian; writes are
deterministic byte-for-byte for equal inputs.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..core import TreeSrlError

MAGIC = b"TSRL"
VERSION = 1


class CheckpointError(TreeSrlError):
    pass


def write_container(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    names = sorted(arrays)
    header = {
        "arrays": [{"name": k, "shape": list(arrays[k].shape)} for k in names],
        "meta": meta,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for k in names:
            fh.write(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes())


def read_container(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise CheckpointError(f"{path}: truncated payload at {spec['name']}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        return arrays, header["meta"]
