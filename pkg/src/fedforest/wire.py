"""Little-endian binary writer/reader shared by every wire format.

Big integers are written as a u32 length followed by the big-endian
magnitude; everything else is little-endian.
"""

from __future__ import annotations

import struct

import numpy as np


class WireError(ValueError):
    """Malformed or truncated binary payload."""


class Writer:
    __slots__ = ("_parts",)

    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, v: int) -> "Writer":
        self._parts.append(struct.pack("<B", v))
        return self

    def u32(self, v: int) -> "Writer":
        self._parts.append(struct.pack("<I", v))
        return self

    def u64(self, v: int) -> "Writer":
        self._parts.append(struct.pack("<Q", v))
        return self

    def i64(self, v: int) -> "Writer":
        self._parts.append(struct.pack("<q", v))
        return self

    def f64(self, v: float) -> "Writer":
        self._parts.append(struct.pack("<d", v))
        return self

    def raw(self, b: bytes) -> "Writer":
        self._parts.append(bytes(b))
        return self

    def blob(self, b: bytes) -> "Writer":
        self.u32(len(b))
        self._parts.append(bytes(b))
        return self

    def text(self, s: str) -> "Writer":
        return self.blob(s.encode("utf-8"))

    def bigint(self, v: int) -> "Writer":
        if v < 0:
            raise WireError("big integers on the wire are non-negative magnitudes")
        self.blob(v.to_bytes((v.bit_length() + 7) // 8, "big"))
        return self

    def array(self, arr: np.ndarray, dtype: str) -> "Writer":
        a = np.ascontiguousarray(arr, dtype=np.dtype(dtype).newbyteorder("<"))
        self.u64(a.size)
        self._parts.append(a.tobytes())
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    __slots__ = ("_buf", "_pos")

    def __init__(self, buf: bytes, pos: int = 0) -> None:
        self._buf = memoryview(buf)
        self._pos = pos

    def _take(self, n: int) -> memoryview:
        end = self._pos + n
        if n < 0 or end > len(self._buf):
            raise WireError(f"truncated payload: need {n} bytes at offset {self._pos}, have {len(self._buf) - self._pos}")
        out = self._buf[self._pos:end]
        self._pos = end
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def raw(self, n: int) -> bytes:
        return bytes(self._take(n))

    def blob(self) -> bytes:
        return bytes(self._take(self.u32()))

    def text(self) -> str:
        return self.blob().decode("utf-8")

    def bigint(self) -> int:
        return int.from_bytes(self._take(self.u32()), "big")

    def array(self, dtype: str) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        n = self.u64()
        return np.frombuffer(self._take(n * dt.itemsize), dtype=dt).astype(dtype)

    @property
    def remaining(self) -> int:
        return len(self._buf) - self._pos

    def expect_end(self) -> None:
        if self.remaining:
            raise WireError(f"{self.remaining} trailing bytes after payload")
