"""Payload codecs for every protocol message.

Each message is a small dataclass with ``to_bytes``/``from_bytes``.  Vectors
of ciphertext components are fixed width (the byte length of their modulus)
so a label broadcast is one contiguous block rather than 2n length prefixes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..crypto.riac import RiacContext
from ..forest.instance_space import InstanceSpace
from ..transport.codec import Scheme, pack_instance_space, unpack_instance_space
from ..wire import Reader, WireError, Writer


def _width(modulus: int) -> int:
    return (modulus.bit_length() + 7) // 8


def write_ints(w: Writer, values, width: int) -> None:
    w.u64(len(values))
    w.raw(b"".join(int(v).to_bytes(width, "big") for v in values))


def read_ints(r: Reader, width: int) -> np.ndarray:
    n = r.u64()
    raw = r.raw(n * width)
    out = np.empty(n, dtype=object)
    out[:] = [int.from_bytes(raw[i : i + width], "big") for i in range(0, n * width, width)]
    return out


class PsiOp(enum.IntEnum):
    OFFER = 1  # hub -> spoke: hub ids blinded by the hub
    FINISH = 2  # hub -> spoke: spoke ids double-blinded, ordered intersection


@dataclass
class PsiOffer:
    values: list[int]

    def to_bytes(self) -> bytes:
        w = Writer().u8(PsiOp.OFFER)
        w.u32(len(self.values))
        for v in self.values:
            w.bigint(v)
        return w.getvalue()


@dataclass
class PsiOfferReply:
    own_blinded: list[int]  # spoke ids blinded by the spoke
    hub_double: list[int]  # hub ids double-blinded, hub order

    def to_bytes(self) -> bytes:
        w = Writer()
        for vec in (self.own_blinded, self.hub_double):
            w.u32(len(vec))
            for v in vec:
                w.bigint(v)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "PsiOfferReply":
        r = Reader(data)
        a = [r.bigint() for _ in range(r.u32())]
        b = [r.bigint() for _ in range(r.u32())]
        r.expect_end()
        return cls(a, b)


@dataclass
class PsiFinish:
    spoke_double: list[int]  # spoke ids double-blinded, spoke order
    ordered: list[int]  # intersection, canonical order

    def to_bytes(self) -> bytes:
        w = Writer().u8(PsiOp.FINISH)
        for vec in (self.spoke_double, self.ordered):
            w.u32(len(vec))
            for v in vec:
                w.bigint(v)
        return w.getvalue()


def read_psi(data: bytes):
    r = Reader(data)
    op = r.u8()
    vecs = []
    n_vecs = 1 if op == PsiOp.OFFER else 2 if op == PsiOp.FINISH else 0
    if not n_vecs:
        raise WireError(f"unknown PSI op {op}")
    for _ in range(n_vecs):
        vecs.append([r.bigint() for _ in range(r.u32())])
    r.expect_end()
    return PsiOffer(*vecs) if op == PsiOp.OFFER else PsiFinish(*vecs)


@dataclass
class LabelBroadcast:
    context: RiacContext
    c1: np.ndarray
    c2: np.ndarray
    peers: list[int]
    scheme: Scheme | None = None  # None means auto
    scale_bits: int = 24

    def to_bytes(self) -> bytes:
        w = Writer().raw(self.context.to_bytes())
        w.u8(0xFF if self.scheme is None else int(self.scheme)).u8(self.scale_bits)
        w.u32(len(self.peers))
        for p in self.peers:
            w.u32(p)
        write_ints(w, self.c1, _width(self.context.n0))
        write_ints(w, self.c2, _width(self.context.nl))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "LabelBroadcast":
        r = Reader(data)
        ctx = RiacContext.read(r)
        sch, scale = r.u8(), r.u8()
        peers = [r.u32() for _ in range(r.u32())]
        c1 = read_ints(r, _width(ctx.n0))
        c2 = read_ints(r, _width(ctx.nl))
        r.expect_end()
        if c1.size != c2.size:
            raise WireError("ciphertext component vectors differ in length")
        return cls(ctx, c1, c2, peers, None if sch == 0xFF else Scheme(sch), scale)


@dataclass
class StatsRequest:
    n_bins: int
    space: InstanceSpace | None = None  # only sent for the root
    scheme: Scheme | None = None

    def to_bytes(self) -> bytes:
        w = Writer().u32(self.n_bins)
        if self.space is None:
            w.u8(0)
        else:
            w.u8(1).blob(pack_instance_space(self.space, "auto" if self.scheme is None else self.scheme))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "StatsRequest":
        r = Reader(data)
        n_bins, has = r.u32(), r.u8()
        space = unpack_instance_space(r.blob()) if has else None
        r.expect_end()
        if n_bins < 1:
            raise WireError("n_bins must be >= 1")
        return cls(n_bins, space)


@dataclass
class EncryptedBins:
    feature: int
    counts: np.ndarray
    c1: list[int]
    c2: list[int]


@dataclass
class StatsResponse:
    features: list[EncryptedBins] = field(default_factory=list)

    def to_bytes(self, context: RiacContext) -> bytes:
        w1, w2 = _width(context.n0), _width(context.nl)
        w = Writer().u32(len(self.features))
        for fb in self.features:
            w.u32(fb.feature).array(fb.counts, "u8")
            write_ints(w, fb.c1, w1)
            write_ints(w, fb.c2, w2)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes, context: RiacContext) -> "StatsResponse":
        w1, w2 = _width(context.n0), _width(context.nl)
        r = Reader(data)
        out = cls()
        for _ in range(r.u32()):
            k = r.u32()
            counts = r.array("u8").astype(np.int64)
            c1, c2 = read_ints(r, w1), read_ints(r, w2)
            if not counts.size == c1.size == c2.size:
                raise WireError(f"feature {k}: counts and sums differ in length")
            out.features.append(EncryptedBins(k, counts, list(c1), list(c2)))
        r.expect_end()
        return out


class FlipPolicy(enum.IntEnum):
    NEVER = 0
    RANDOM = 1
    ALWAYS = 2


@dataclass
class SplitCommand:
    feature: int
    bin: int
    flip: FlipPolicy = FlipPolicy.NEVER
    broadcast: bool = True  # whether the children will need their instance spaces

    def to_bytes(self) -> bytes:
        return Writer().u32(self.feature).u32(self.bin).u8(self.flip).u8(self.broadcast).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SplitCommand":
        r = Reader(data)
        out = cls(r.u32(), r.u32(), FlipPolicy(r.u8()), bool(r.u8()))
        r.expect_end()
        return out


@dataclass
class SplitAck:
    record_id: bytes = b""
    left: InstanceSpace | None = None
    right: InstanceSpace | None = None
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.left is not None

    def to_bytes(self, scheme: Scheme | None = None) -> bytes:
        w = Writer()
        if not self.ok:
            return w.u8(0).text(self.reason).getvalue()
        s = "auto" if scheme is None else scheme
        w.u8(1).blob(self.record_id)
        w.blob(pack_instance_space(self.left, s)).blob(pack_instance_space(self.right, s))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SplitAck":
        r = Reader(data)
        if not r.u8():
            out = cls(reason=r.text())
        else:
            out = cls(r.blob(), unpack_instance_space(r.blob()), unpack_instance_space(r.blob()))
        r.expect_end()
        return out


@dataclass
class InstanceBroadcast:
    """Children of ``parent`` (the envelope's node id) as the owner reports them."""

    left: InstanceSpace
    right: InstanceSpace

    def to_bytes(self, scheme: Scheme | None = None) -> bytes:
        s = "auto" if scheme is None else scheme
        return Writer().blob(pack_instance_space(self.left, s)).blob(pack_instance_space(self.right, s)).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "InstanceBroadcast":
        r = Reader(data)
        out = cls(unpack_instance_space(r.blob()), unpack_instance_space(r.blob()))
        r.expect_end()
        return out


@dataclass
class InferRequest:
    row_ids: list[str]
    record_ids: list[bytes]

    def to_bytes(self) -> bytes:
        w = Writer().u32(len(self.row_ids))
        for i in self.row_ids:
            w.text(i)
        w.u32(len(self.record_ids))
        for rid in self.record_ids:
            w.blob(rid)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "InferRequest":
        r = Reader(data)
        rows = [r.text() for _ in range(r.u32())]
        recs = [r.blob() for _ in range(r.u32())]
        r.expect_end()
        return cls(rows, recs)


@dataclass
class InferResponse:
    bits: np.ndarray  # bool, rows x records; True means go left

    def to_bytes(self) -> bytes:
        n, m = self.bits.shape
        body = np.packbits(self.bits.reshape(-1), bitorder="little").tobytes()
        return Writer().u32(n).u32(m).raw(body).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "InferResponse":
        r = Reader(data)
        n, m = r.u32(), r.u32()
        body = r.raw((n * m + 7) // 8)
        r.expect_end()
        bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8), bitorder="little", count=n * m)
        return cls(bits.astype(bool).reshape(n, m))
