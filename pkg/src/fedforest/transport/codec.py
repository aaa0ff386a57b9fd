"""Wire encodings for instance spaces.

Three schemes, each prefixed by a scheme byte and the universe size (u64 LE):

``V0``  the ascending index list as comma-separated decimal text.
``V1``  one bit per aligned sample, ``ceil(n/8)`` bytes, LSB-first.
``V2``  gap encoding of the V1 bitmap: for every set bit, an unsigned LEB128
        varint holding the number of zero bits since the previous set bit,
        then one final varint for the trailing zeros.  Its size tracks the
        number of selected samples, so it wins when few are selected.

``auto`` picks V2 below 15% density and V1 otherwise.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from ..forest.instance_space import InstanceSpace

AUTO_DENSITY_THRESHOLD = 0.15
_HEADER = struct.Struct("<BQ")
_MAX_VARINT_BYTES = 9  # 63 payload bits


class Scheme(enum.IntEnum):
    V0 = 0
    V1 = 1
    V2 = 2


class CodecError(ValueError):
    pass


@dataclass(frozen=True)
class EncodedInstanceSpace:
    scheme: Scheme
    universe_size: int
    body: bytes

    def to_bytes(self) -> bytes:
        return _HEADER.pack(self.scheme, self.universe_size) + self.body

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedInstanceSpace":
        if len(data) < _HEADER.size:
            raise CodecError("truncated instance-space header")
        scheme, n = _HEADER.unpack_from(data)
        try:
            scheme = Scheme(scheme)
        except ValueError:
            raise CodecError(f"unknown instance-space scheme byte {scheme:#04x}") from None
        return cls(scheme, n, bytes(data[_HEADER.size:]))

    def __len__(self) -> int:
        return _HEADER.size + len(self.body)


def choose_scheme(space: InstanceSpace) -> Scheme:
    return Scheme.V2 if space.density < AUTO_DENSITY_THRESHOLD else Scheme.V1


def _resolve(scheme) -> Scheme | None:
    if scheme is None or scheme == "auto":
        return None
    if isinstance(scheme, str):
        return Scheme[scheme.upper()]
    return Scheme(scheme)


def encode_instance_space(space: InstanceSpace, scheme: Scheme | str | None = "auto") -> EncodedInstanceSpace:
    chosen = _resolve(scheme)
    if chosen is None:  # Scheme.V0 is falsy, so no `or` shortcut
        chosen = choose_scheme(space)
    if chosen is Scheme.V0:
        body = ",".join(map(str, space.indices.tolist())).encode("ascii")
    elif chosen is Scheme.V1:
        body = np.packbits(space.bits, bitorder="little").tobytes()
    else:
        body = encode_varints(_zero_runs(space))
    return EncodedInstanceSpace(chosen, space.universe, body)


def decode_instance_space(enc: EncodedInstanceSpace) -> InstanceSpace:
    n = enc.universe_size
    if enc.scheme is Scheme.V0:
        return _decode_v0(enc.body, n)
    if enc.scheme is Scheme.V1:
        return _decode_v1(enc.body, n)
    return _decode_v2(enc.body, n)


def pack_instance_space(space: InstanceSpace, scheme: Scheme | str | None = "auto") -> bytes:
    return encode_instance_space(space, scheme).to_bytes()


def unpack_instance_space(data: bytes) -> InstanceSpace:
    return decode_instance_space(EncodedInstanceSpace.from_bytes(data))


def _zero_runs(space: InstanceSpace) -> np.ndarray:
    idx = space.indices
    if idx.size == 0:
        return np.array([space.universe], dtype=np.uint64)
    gaps = np.diff(idx, prepend=-1) - 1
    trailing = space.universe - 1 - int(idx[-1])
    return np.append(gaps, trailing).astype(np.uint64)


def _decode_v0(body: bytes, n: int) -> InstanceSpace:
    if not body:
        return InstanceSpace.empty(n)
    try:
        idx = np.array([int(tok) for tok in body.decode("ascii").split(",")], dtype=np.int64)
    except ValueError as exc:
        raise CodecError(f"malformed V0 index list: {exc}") from None
    if idx.size and (idx[0] < 0 or idx[-1] >= n or np.any(np.diff(idx) <= 0)):
        raise CodecError("V0 indices must be strictly ascending and inside the universe")
    return InstanceSpace(idx, n, _trusted=True)


def _decode_v1(body: bytes, n: int) -> InstanceSpace:
    if len(body) != (n + 7) // 8:
        raise CodecError(f"V1 body is {len(body)} bytes, expected {(n + 7) // 8} for {n} samples")
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8), bitorder="little")
    if bits[n:].any():
        raise CodecError("V1 padding bits must be zero")
    return InstanceSpace.from_bits(bits[:n].astype(bool))


def _decode_v2(body: bytes, n: int) -> InstanceSpace:
    runs = decode_varints(body)
    if runs.size == 0:
        raise CodecError("V2 body holds no runs")
    ones = runs.size - 1
    if int(runs.sum()) + ones != n:
        raise CodecError(f"V2 runs cover {int(runs.sum()) + ones} samples, universe is {n}")
    idx = np.cumsum(runs[:-1].astype(np.int64) + 1) - 1
    return InstanceSpace(idx, n, _trusted=True)


def encode_varints(values: np.ndarray) -> bytes:
    """Unsigned LEB128, vectorised."""
    v = np.asarray(values, dtype=np.uint64)
    if v.size == 0:
        return b""
    nbytes = np.ones(v.size, dtype=np.int64)
    rest = v >> np.uint64(7)
    while rest.any():
        nbytes += rest > 0
        rest >>= np.uint64(7)
    offsets = np.concatenate(([0], np.cumsum(nbytes)[:-1]))
    out = np.zeros(int(nbytes.sum()), dtype=np.uint8)
    for k in range(int(nbytes.max())):
        sel = nbytes > k
        chunk = (v[sel] >> np.uint64(7 * k)) & np.uint64(0x7F)
        cont = np.where(nbytes[sel] - 1 > k, 0x80, 0).astype(np.uint64)
        out[offsets[sel] + k] = (chunk | cont).astype(np.uint8)
    return out.tobytes()


def decode_varints(body: bytes) -> np.ndarray:
    b = np.frombuffer(body, dtype=np.uint8)
    if b.size == 0:
        return np.empty(0, dtype=np.uint64)
    if b[-1] & 0x80:
        raise CodecError("truncated varint at end of body")
    ends = np.flatnonzero(b < 0x80)
    starts = np.concatenate(([0], ends[:-1] + 1))
    lengths = ends - starts + 1
    if lengths.max() > _MAX_VARINT_BYTES:
        raise CodecError("varint overflows 63 bits")
    pos = np.arange(b.size) - np.repeat(starts, lengths)
    parts = (b & 0x7F).astype(np.uint64) << (np.uint64(7) * pos.astype(np.uint64))
    return np.add.reduceat(parts, starts)
