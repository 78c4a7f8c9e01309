"""Parameter initialization and the ``PENW`` binary weight container.

File layout (all integers little-endian)::

    magic         4 bytes  b"PENW"
    version       u32      1
    tensor_count  u32
    per tensor:
        name_len  u16
        name      name_len bytes, UTF-8
        ndim      u8
        dims      ndim x u32
        values    prod(dims) x float32, row-major

Tensors are written in canonical schema order (see :func:`penet.model.param_schema`).

Random initialization draws, for each tensor in canonical order, from
``numpy.random.Generator(PCG64(seed))``: weights uniform in [-b, b] with
``b = sqrt(1 / fan_in)``, ``fan_in = in_channels * k * k``, drawn as float64 and
rounded to float32 (clipped so rounding never leaves the bound); biases are 0.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .model import PENetParams, param_schema, zero_params

MAGIC = b"PENW"
VERSION = 1


class WeightFileError(Exception):
    pass


class WeightFormatError(WeightFileError, ValueError):
    """Bad magic, unsupported version or malformed entry."""


class WeightSchemaError(WeightFileError, ValueError):
    """Tensor set does not match the network schema."""


class TruncatedWeightFile(WeightFileError, OSError):
    pass


def init_bound(shape: tuple) -> float:
    fan_in = shape[1] * shape[2] * shape[3]
    return float(np.sqrt(1.0 / fan_in))


def init_params(seed: int = 0, scheme: str = "random") -> PENetParams:
    if scheme == "zero":
        return zero_params()
    if scheme != "random":
        raise ValueError(f"unknown init scheme {scheme!r}; use 'zero' or 'random'")
    rng = np.random.Generator(np.random.PCG64(seed))
    tensors = {}
    for name, shape in param_schema():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape, np.float32)
            continue
        b = init_bound(shape)
        b32 = np.float32(b)
        if b32 > b:
            b32 = np.nextafter(b32, np.float32(0))
        w = rng.uniform(-b, b, size=shape).astype(np.float32)
        tensors[name] = np.clip(w, -b32, b32)
    return PENetParams.from_dict(tensors)


def encode(params: PENetParams) -> bytes:
    entries = list(params.named_tensors())
    chunks = [MAGIC, struct.pack("<II", VERSION, len(entries))]
    for name, arr in entries:
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedWeightFile(
                f"truncated weight file: {what} needs {n} bytes at offset {self.pos}, "
                f"{len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode(data: bytes) -> PENetParams:
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise WeightFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, count = r.unpack("<II", "header")
    if version != VERSION:
        raise WeightFormatError(f"unsupported weight file version {version}")

    tensors = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H", "name length")
        try:
            name = r.take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WeightFormatError(f"tensor name at offset {r.pos - name_len} is not UTF-8") from exc
        (ndim,) = r.unpack("<B", f"ndim of {name}")
        dims = r.unpack(f"<{ndim}I", f"dims of {name}")
        n = int(np.prod(dims, dtype=np.int64))
        values = np.frombuffer(r.take(4 * n, f"values of {name}"), dtype="<f4")
        if name in tensors:
            raise WeightSchemaError(f"duplicate tensor {name!r}")
        tensors[name] = values.astype(np.float32).reshape(dims)
    if r.pos != len(data):
        raise WeightFormatError(f"{len(data) - r.pos} trailing bytes after offset {r.pos}")

    expected = dict(param_schema())
    for name in tensors:
        if name not in expected:
            raise WeightSchemaError(f"unexpected tensor {name!r}")
    for name, shape in expected.items():
        if name not in tensors:
            raise WeightSchemaError(f"missing tensor {name!r}")
        if tensors[name].shape != shape:
            raise WeightSchemaError(
                f"tensor {name!r} has shape {tensors[name].shape}, expected {shape}"
            )
    return PENetParams.from_dict(tensors)


def save(params: PENetParams, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(params))


def load(path: str | os.PathLike) -> PENetParams:
    with open(path, "rb") as fh:
        return decode(fh.read())
