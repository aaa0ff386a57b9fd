"""Envelope framing.

Layout (all little-endian)::

    magic[4] version:u8 session:u64 tree:u64 node:u64 correlation:u64
    msg_type:u8 payload_len:u32 payload[payload_len]
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace

MAGIC = b"VFRF"
VERSION = 1
HEADER = struct.Struct("<4sBQQQQBI")
HEADER_SIZE = HEADER.size


class MsgType(enum.IntEnum):
    PSI = 1
    LABEL_BROADCAST = 2
    STATS_REQUEST = 3
    STATS_RESPONSE = 4
    SPLIT_COMMAND = 5
    SPLIT_ACK = 6
    INFER_REQUEST = 7
    INFER_RESPONSE = 8
    CONTROL = 9


class FramingError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    msg_type: MsgType
    payload: bytes = b""
    session_id: int = 0
    tree_id: int = 0
    node_id: int = 0
    correlation_id: int = 0
    version: int = VERSION

    def reply(self, msg_type: MsgType, payload: bytes) -> "Envelope":
        """Response envelope echoing routing fields and the correlation id."""
        return replace(self, msg_type=msg_type, payload=payload)


def frame(env: Envelope) -> bytes:
    return HEADER.pack(
        MAGIC,
        env.version,
        env.session_id,
        env.tree_id,
        env.node_id,
        env.correlation_id,
        env.msg_type,
        len(env.payload),
    ) + env.payload


def parse_header(header: bytes) -> tuple[Envelope, int]:
    """Validate a header and return (envelope-without-payload, payload length)."""
    if len(header) < HEADER_SIZE:
        raise FramingError(f"frame shorter than the {HEADER_SIZE}-byte header ({len(header)} bytes)")
    magic, version, session, tree, node, corr, mtype, length = HEADER.unpack_from(header)
    if magic != MAGIC:
        raise FramingError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FramingError(f"unsupported frame version {version}, expected {VERSION}")
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise FramingError(f"unknown message type {mtype}") from None
    return Envelope(mtype, b"", session, tree, node, corr, version), length


def unframe(data: bytes) -> Envelope:
    env, length = parse_header(data)
    actual = len(data) - HEADER_SIZE
    if actual != length:
        raise FramingError(f"declared payload length {length} but frame carries {actual} bytes")
    return replace(env, payload=bytes(data[HEADER_SIZE:]))
