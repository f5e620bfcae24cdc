"""
Binary checkpoint format (all integers little-endian)::

    b"MSSN"                      magic
    u32  version                 currently 1
    u32  n                       length of the config block
    n    bytes                   UTF-8 JSON: {"model": {...}, "epoch": e, "adam": {...}}
    u32  count                   number of tensor records
    count x record:
        u32 name length, name (UTF-8)
        u32 rank, rank x u32 dims
        prod(dims) x f32         raw values, row-major

Parameters are stored under their own names, Adam moments under
``adam.m/<name>`` and ``adam.v/<name>``.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._io import atomic_write_bytes
from ..errors import FormatError
from ..numerics import AdamState, get_dtype, parameter
from .params import ModelConfig, ModelParams, parameter_shapes

MAGIC = b"MSSN"
VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    epoch: int = 0
    adam: AdamState | None = None


def _write_record(buf: io.BytesIO, name: str, arr: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    buf.write(struct.pack("<I", len(encoded)))
    buf.write(encoded)
    buf.write(struct.pack("<I", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def dumps(ckpt: Checkpoint) -> bytes:
    header = {"model": ckpt.config.to_dict(), "epoch": ckpt.epoch}
    records: list[tuple[str, np.ndarray]] = [(n, t.data) for n, t in ckpt.params.items()]
    if ckpt.adam is not None:
        a = ckpt.adam
        header["adam"] = {"lr": a.lr, "beta1": a.beta1, "beta2": a.beta2, "eps": a.eps, "step": a.step}
        records += [(f"adam.m/{n}", a.m[n]) for n in ckpt.params]
        records += [(f"adam.v/{n}", a.v[n]) for n in ckpt.params]
    block = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(block)))
    buf.write(block)
    buf.write(struct.pack("<I", len(records)))
    for name, arr in records:
        _write_record(buf, name, arr)
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("checkpoint is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, count: int = 1):
        vals = struct.unpack(f"<{count}I", self.take(4 * count))
        return vals[0] if count == 1 else vals


def loads(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("not a checkpoint file (bad magic bytes)")
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(r.take(r.u32()).decode("utf-8"))
        cfg = ModelConfig.from_dict(header["model"])
    except (ValueError, KeyError) as exc:
        raise FormatError(f"bad checkpoint config block: {exc}") from None
    arrays: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank))
        n = int(np.prod(dims))
        arrays[name] = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims)
    if r.pos != len(data):
        raise FormatError("trailing bytes after the last checkpoint record")

    dtype = get_dtype()
    tensors = {}
    for name, shape in parameter_shapes(cfg):
        if name not in arrays:
            raise FormatError(f"checkpoint lacks parameter {name!r}")
        if arrays[name].shape != shape:
            raise FormatError(f"parameter {name!r} has shape {arrays[name].shape}, expected {shape}")
        tensors[name] = parameter(arrays[name].astype(dtype), name=name)
    params = ModelParams(tensors)

    adam = None
    if "adam" in header:
        h = header["adam"]
        adam = AdamState(lr=h["lr"], beta1=h["beta1"], beta2=h["beta2"], eps=h["eps"], step=h["step"],
                         m={n: arrays[f"adam.m/{n}"].astype(dtype) for n in params},
                         v={n: arrays[f"adam.v/{n}"].astype(dtype) for n in params})
    return Checkpoint(cfg, params, int(header.get("epoch", 0)), adam)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    atomic_write_bytes(path, dumps(ckpt))


def load_checkpoint(path: str | Path) -> Checkpoint:
    return loads(Path(path).read_bytes())
