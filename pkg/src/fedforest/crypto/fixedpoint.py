from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_SCALE_BITS = 24


class FixedPointOverflow(OverflowError):
    pass


@dataclass(frozen=True)
class FixedPointCodec:
    """Reals as integers ``round(x * 2**scale_bits)``.

    ``signed_window``, when set, is the modulus whose upper half decodes as
    negative (a residue ``v > signed_window // 2`` means ``v - signed_window``).
    """

    scale_bits: int = DEFAULT_SCALE_BITS
    max_magnitude: int = 1 << 62
    signed_window: int | None = None

    @property
    def scale(self) -> int:
        return 1 << self.scale_bits

    def encode(self, x: float) -> int:
        if not math.isfinite(x):
            raise FixedPointOverflow(f"cannot encode non-finite value {x!r}")
        v = math.floor(x * self.scale + 0.5)
        if abs(v) > self.max_magnitude:
            raise FixedPointOverflow(f"{x!r} exceeds the encodable magnitude")
        return v

    def decode(self, v: int) -> float:
        if self.signed_window is not None:
            v %= self.signed_window
            if v > self.signed_window // 2:
                v -= self.signed_window
        return v / self.scale

    def encode_array(self, xs) -> np.ndarray:
        """Vectorised :meth:`encode`; returns int64 (bounded by ``max_magnitude``)."""
        xs = np.asarray(xs, dtype=np.float64)
        if not np.all(np.isfinite(xs)):
            raise FixedPointOverflow("cannot encode non-finite values")
        v = np.floor(xs * float(self.scale) + 0.5)
        lim = min(self.max_magnitude, (1 << 62))
        if v.size and np.max(np.abs(v)) > lim:
            raise FixedPointOverflow("array exceeds the encodable magnitude")
        return v.astype(np.int64)


DEFAULT_CODEC = FixedPointCodec()


def encode_fixed(x: float, codec: FixedPointCodec = DEFAULT_CODEC) -> int:
    return codec.encode(x)


def decode_fixed(v: int, codec: FixedPointCodec = DEFAULT_CODEC) -> float:
    return codec.decode(v)
