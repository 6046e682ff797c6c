"""Versioned binary model files.

Layout (all integers little-endian):

    8 bytes   magic b"EMOSTIM\\0"
    uint32    format version (1)
    uint32    header length in bytes
    header    UTF-8 JSON, sorted keys: architecture (taxonomy, dims, raw sizes,
              encoder modes, semantic branch kind, t_steps, n_max),
              taxonomy_hash, and the name and shape of every parameter
    payload   float64 little-endian arrays, C order, in FusionNet.params() order
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .network import Dims, FusionNet
from .taxonomy import taxonomy_from_dict

MAGIC = b"EMOSTIM\0"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def model_to_bytes(model: FusionNet) -> bytes:
    header = {
        "architecture": model.describe(),
        "taxonomy_hash": model.taxonomy.digest(),
        "params": [{"name": p.name, "shape": list(p.shape)} for p in model.params()],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(p.value, dtype="<f8").tobytes() for p in model.params())
    return MAGIC + struct.pack("<II", VERSION, len(hbytes)) + hbytes + payload


def save_model(model: FusionNet, path):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def model_from_bytes(blob: bytes) -> FusionNet:
    if blob[:8] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    if len(blob) < 16:
        raise ModelFormatError("model file is truncated")
    version, hlen = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    start = 16 + hlen
    if len(blob) < start:
        raise ModelFormatError("model file is truncated")
    try:
        header = json.loads(blob[16:start].decode("utf-8"))
        arch = header["architecture"]
        taxonomy = taxonomy_from_dict(arch["taxonomy"])
        stored_hash = header["taxonomy_hash"]
        stored = header["params"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"unreadable model header: {exc}") from None
    if taxonomy.digest() != stored_hash:
        raise ModelFormatError("taxonomy hash does not match the stored taxonomy")
    try:
        model = _build(taxonomy, arch)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad architecture in header: {exc}") from None
    params = model.params()
    if [(p.name, list(p.shape)) for p in params] != [(s.get("name"), s.get("shape")) for s in stored if isinstance(s, dict)]:
        raise ModelFormatError("parameter layout does not match the architecture")
    offset = start
    for p in params:
        n = p.value.size * 8
        chunk = blob[offset:offset + n]
        if len(chunk) != n:
            raise ModelFormatError("model file is truncated")
        p.value[...] = np.frombuffer(chunk, dtype="<f8").reshape(p.shape)
        offset += n
    if offset != len(blob):
        raise ModelFormatError("trailing bytes after parameter payload")
    return model


def _build(taxonomy, arch) -> FusionNet:
    return FusionNet(
        taxonomy,
        Dims(**arch["dims"]),
        arch["raw_global"],
        arch["raw_face"],
        global_mode=arch["global_mode"],
        face_mode=arch["face_mode"],
        snet=arch["snet"],
        t_steps=arch["t_steps"],
        n_max=arch["n_max"],
    )


def load_model(path) -> FusionNet:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
