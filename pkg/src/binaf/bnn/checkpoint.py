"""Single-file model checkpoints.

Layout: magic ``BINAFCK1``, little-endian uint32 header length, UTF-8 JSON
header (version, model spec, complementary function, tensor table), then every
tensor as little-endian float32 in table order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..expr import RPReLU, RSign, format_genome, resolve_af
from .model import ModelSpec, TinyBinNet

MAGIC = b"BINAFCK1"
VERSION = 1


def _af_name(model):
    af = model.blocks[0].binary.af
    if af is None:
        return "baseline"
    if isinstance(af, (RSign, RPReLU)):
        return af.name
    return format_genome(af.genome)


def save_checkpoint(path, model: TinyBinNet) -> None:
    tensors = {**model.parameters(), **model.buffers()}
    table = [{"name": k, "shape": list(v.shape)} for k, v in tensors.items()]
    header = json.dumps(
        {"version": VERSION, "spec": model.spec.to_dict(), "af": _af_name(model), "tensors": table},
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for v in tensors.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def load_checkpoint(path) -> TinyBinNet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    (n,) = struct.unpack("<I", blob[8:12])
    header = json.loads(blob[12:12 + n])
    if header.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    spec = ModelSpec.from_dict(header["spec"])
    model = TinyBinNet(spec, resolve_af(header["af"]), rng=0)
    params, buffers = model.parameters(), model.buffers()
    offset = 12 + n
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape)
        offset += 4 * count
        target = params.get(entry["name"])
        if target is None:
            target = buffers[entry["name"]]
        target[...] = data
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} trailing bytes")
    return model
