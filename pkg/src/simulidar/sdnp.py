"""Denoiser wire protocol: framing constants and pack/unpack helpers.

All integers little-endian. A connection starts with a fixed-size
handshake, then alternates PREDICT requests and responses. Payloads are
float32 images, row-major, channel-interleaved (depth, remission).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError

MAGIC = b"SDNP"
VERSION = 1

HANDSHAKE_REQ = struct.Struct("<4sHH")          # magic, version, flags
HANDSHAKE_RESP = struct.Struct("<4sHHHHB")      # magic, version, max_batch, h, w, channels
PREDICT_HEADER = struct.Struct("<BIHHHB")       # type, t, batch, h, w, channels
ERROR_HEADER = struct.Struct("<BHI")            # type, code, message length

TYPE_PREDICT_REQ = 1
TYPE_PREDICT_RESP = 2
TYPE_ERROR = 255

ERR_MALFORMED = 1
ERR_SHAPE = 2
ERR_MODEL = 3


@dataclass(frozen=True)
class HandshakeInfo:
    max_batch: int
    h: int
    w: int
    channels: int


def pack_handshake_request(flags: int = 0) -> bytes:
    return HANDSHAKE_REQ.pack(MAGIC, VERSION, flags)


def pack_handshake_response(info: HandshakeInfo) -> bytes:
    return HANDSHAKE_RESP.pack(MAGIC, VERSION, info.max_batch, info.h, info.w, info.channels)


def unpack_handshake_response(raw: bytes) -> HandshakeInfo:
    if len(raw) != HANDSHAKE_RESP.size:
        raise ProtocolError(f"handshake response has {len(raw)} bytes, expected {HANDSHAKE_RESP.size}")
    magic, version, max_batch, h, w, channels = HANDSHAKE_RESP.unpack(raw)
    if magic != MAGIC:
        raise ProtocolError(f"bad handshake magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"protocol version mismatch: peer speaks {version}, we speak {VERSION}")
    return HandshakeInfo(max_batch=max_batch, h=h, w=w, channels=channels)


def pack_predict_request(batch: np.ndarray, t: int) -> bytes:
    """batch: (B, h, w, channels) float32."""
    batch = np.ascontiguousarray(batch, dtype="<f4")
    b, h, w, c = batch.shape
    header = PREDICT_HEADER.pack(TYPE_PREDICT_REQ, t, b, h, w, c)
    return header + batch.tobytes()


def pack_predict_response(batch: np.ndarray, t: int) -> bytes:
    batch = np.ascontiguousarray(batch, dtype="<f4")
    b, h, w, c = batch.shape
    return PREDICT_HEADER.pack(TYPE_PREDICT_RESP, t, b, h, w, c) + batch.tobytes()


def unpack_predict_header(raw: bytes):
    """Returns (type, t, batch, h, w, channels)."""
    if len(raw) != PREDICT_HEADER.size:
        raise ProtocolError(f"predict header has {len(raw)} bytes, expected {PREDICT_HEADER.size}")
    return PREDICT_HEADER.unpack(raw)


def payload_size(batch: int, h: int, w: int, channels: int) -> int:
    return batch * h * w * channels * 4


def payload_to_array(payload: bytes, batch: int, h: int, w: int, channels: int) -> np.ndarray:
    expected = payload_size(batch, h, w, channels)
    if len(payload) != expected:
        raise ProtocolError(f"payload has {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(batch, h, w, channels).copy()


def pack_error(code: int, message: str) -> bytes:
    data = message.encode("utf-8")
    return ERROR_HEADER.pack(TYPE_ERROR, code, len(data)) + data
