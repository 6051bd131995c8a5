"""Flat gradient/model vectors and their little-endian wire formats.

Gradient frame::

    u32 format_version | u32 owner | u32 model_version | u8 flags | u32 count | count x f64

Model broadcast frame (same, without the owner field)::

    u32 format_version | u32 model_version | u8 flags | u32 count | count x f64

All integers and reals are little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

WIRE_VERSION = 1

FLAG_CLIPPED = 0x01
FLAG_NOISED = 0x02

_GRAD_HEADER = struct.Struct("<IIIBI")
_MODEL_HEADER = struct.Struct("<IIBI")


class WireFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GradientVector:
    values: np.ndarray
    owner: int = 0
    model_version: int = 0
    clipped: bool = False
    noised: bool = False
    epsilon: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("gradient values must be a flat vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("gradient values must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def flags(self) -> int:
        return (FLAG_CLIPPED if self.clipped else 0) | (FLAG_NOISED if self.noised else 0)

    def with_values(self, values, **changes) -> "GradientVector":
        return replace(self, values=np.asarray(values, dtype=float), **changes)

    def to_bytes(self) -> bytes:
        head = _GRAD_HEADER.pack(WIRE_VERSION, self.owner, self.model_version,
                                 self.flags, len(self))
        return head + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GradientVector":
        if len(data) < _GRAD_HEADER.size:
            raise WireFormatError("truncated gradient header")
        version, owner, model_version, flags, count = _GRAD_HEADER.unpack_from(data)
        if version != WIRE_VERSION:
            raise WireFormatError(f"unsupported wire version {version}")
        body = data[_GRAD_HEADER.size:]
        if len(body) != 8 * count:
            raise WireFormatError("gradient body length does not match count")
        values = np.frombuffer(body, dtype="<f8").astype(float)
        return cls(values, owner=owner, model_version=model_version,
                   clipped=bool(flags & FLAG_CLIPPED), noised=bool(flags & FLAG_NOISED))


def encode_model(theta: np.ndarray, model_version: int, flags: int = 0) -> bytes:
    theta = np.asarray(theta, dtype=float)
    return _MODEL_HEADER.pack(WIRE_VERSION, model_version, flags, theta.shape[0]) + \
        theta.astype("<f8").tobytes()


def decode_model(data: bytes) -> tuple[np.ndarray, int, int]:
    """Return ``(theta, model_version, flags)`` from a model broadcast frame."""
    if len(data) < _MODEL_HEADER.size:
        raise WireFormatError("truncated model header")
    version, model_version, flags, count = _MODEL_HEADER.unpack_from(data)
    if version != WIRE_VERSION:
        raise WireFormatError(f"unsupported wire version {version}")
    body = data[_MODEL_HEADER.size:]
    if len(body) != 8 * count:
        raise WireFormatError("model body length does not match count")
    return np.frombuffer(body, dtype="<f8").astype(float), model_version, flags


def gradient_frame_size(dim: int) -> int:
    return _GRAD_HEADER.size + 8 * dim


def model_frame_size(dim: int) -> int:
    return _MODEL_HEADER.size + 8 * dim
