"""Binary PPM (P6, maxval 255) reading/writing and tensor conversion."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


class PPMFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ImageBuffer:
    width: int
    height: int
    pixels: bytes  # interleaved RGB, row-major

    def __post_init__(self):
        if len(self.pixels) != 3 * self.width * self.height:
            raise ValueError(
                f"ImageBuffer: {len(self.pixels)} bytes for {self.width}x{self.height} RGB"
            )

    def to_array(self) -> np.ndarray:
        """(height, width, 3) uint8 view of the pixels."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 3)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected an (H, W, 3) array, got {arr.shape}")
        return cls(arr.shape[1], arr.shape[0], arr.tobytes())


_WHITESPACE = b" \t\n\r\v\f"


def parse_ppm(data: bytes) -> ImageBuffer:
    if data[:2] != b"P6":
        raise PPMFormatError(f"offset 0: expected magic b'P6', got {data[:2]!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        start = pos
        while pos < len(data) and (data[pos] in _WHITESPACE or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < len(data) and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        if pos == start and fields:
            raise PPMFormatError(f"offset {pos}: expected whitespace between header fields")
        token_start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        token = data[token_start:pos]
        if not token:
            raise PPMFormatError(f"offset {token_start}: header ends early")
        if not token.isdigit():
            raise PPMFormatError(f"offset {token_start}: expected an integer, got {token!r}")
        fields.append((int(token), token_start))

    (width, _), (height, _), (maxval, maxval_at) = fields
    if width < 1 or height < 1:
        raise PPMFormatError(f"offset {fields[0][1]}: image must be at least 1x1, got {width}x{height}")
    if maxval != 255:
        raise PPMFormatError(f"offset {maxval_at}: maxval must be 255, got {maxval}")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise PPMFormatError(f"offset {pos}: expected a single whitespace byte before pixel data")
    pos += 1
    need = 3 * width * height
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise PPMFormatError(
            f"offset {pos}: truncated pixel data, {width}x{height} needs {need} bytes, "
            f"found {len(payload)}"
        )
    return ImageBuffer(width, height, bytes(payload))


def encode_ppm(img: ImageBuffer) -> bytes:
    return f"P6\n{img.width} {img.height}\n255\n".encode("ascii") + img.pixels


def read_ppm(path: str | os.PathLike) -> ImageBuffer:
    with open(path, "rb") as fh:
        return parse_ppm(fh.read())


def write_ppm(img: ImageBuffer, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))


def to_tensor(img: ImageBuffer, dtype=np.float32) -> np.ndarray:
    """(3, H, W) tensor with values ``byte / 255``."""
    return (img.to_array().transpose(2, 0, 1).astype(np.float64) / 255.0).astype(dtype)


def from_tensor(t: np.ndarray) -> ImageBuffer:
    """Clamp to [0, 1], scale by 255 and round half away from zero."""
    if t.ndim != 3 or t.shape[0] != 3:
        raise ValueError(f"from_tensor: expected a 3-channel tensor, got shape {t.shape}")
    v = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0) * 255.0
    # non-negative after clamping, so floor(v + 0.5) rounds half away from zero
    return ImageBuffer.from_array(np.floor(v + 0.5).astype(np.uint8).transpose(1, 2, 0))
