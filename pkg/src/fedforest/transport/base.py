"""Transport plumbing shared by the loopback and socket implementations.

Every exchange is request/response.  A reply carries the request's
correlation id with :data:`REPLY_BIT` set, so a duplex connection can tell
incoming requests from replies without extra state.

Time is modelled by :class:`SimClock`: a per-thread logical clock.  A
message sent at logical time ``t`` arrives at ``t + latency + size/bandwidth``;
awaiting a reply moves the waiting thread's clock to the reply's arrival.
Independent requests issued back to back therefore overlap, and the model
is deterministic regardless of thread scheduling.
"""

from __future__ import annotations

import enum
import threading
from collections import defaultdict
from concurrent.futures import Future
from concurrent.futures import TimeoutError as _FutureTimeout
from dataclasses import dataclass, field
from typing import Callable

from .framing import Envelope, MsgType

REPLY_BIT = 1 << 63


class TransportError(RuntimeError):
    """The message could not be delivered or answered."""


class TransportTimeout(TransportError):
    """No reply within the configured timeout."""


class RemoteError(TransportError):
    """The peer answered with an error report."""


class ControlOp(enum.IntEnum):
    ACK = 0
    INSTANCE_BROADCAST = 1
    END_TREE = 2
    HELLO = 3
    SHUTDOWN = 4
    PING = 5
    ERROR = 0xFF


def control(op: ControlOp, body: bytes = b"") -> bytes:
    return bytes([op]) + body


def error_reply(request: Envelope, message: str) -> Envelope:
    return request.reply(MsgType.CONTROL, control(ControlOp.ERROR, message.encode("utf-8", "replace")))


def raise_if_error(env: Envelope) -> Envelope:
    if env.msg_type is MsgType.CONTROL and env.payload[:1] == bytes([ControlOp.ERROR]):
        raise RemoteError(env.payload[1:].decode("utf-8", "replace"))
    return env


Handler = Callable[[int, Envelope], Envelope]


@dataclass(frozen=True)
class TransportConfig:
    """Link model and timeout, in seconds and bytes/second.

    ``bandwidth=None`` means unlimited.
    """

    mode: str = "loopback"
    latency: float = 0.0
    bandwidth: float | None = None
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.mode not in ("loopback", "socket"):
            raise ValueError(f"unknown transport mode {self.mode!r}")
        if self.latency < 0:
            raise ValueError("latency must be >= 0")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if not self.timeout > self.latency:
            raise ValueError("timeout must exceed the artificial latency")

    def delay(self, nbytes: int) -> float:
        d = self.latency
        if self.bandwidth is not None:
            d += nbytes / self.bandwidth
        return d


class SimClock:
    """Per-thread logical time in seconds."""

    def __init__(self) -> None:
        self._local = threading.local()

    def now(self) -> float:
        return getattr(self._local, "t", 0.0)

    def set(self, t: float) -> None:
        self._local.t = t

    def advance_to(self, t: float) -> float:
        if t > self.now():
            self._local.t = t
        return self.now()


@dataclass
class TrafficStats:
    """Thread-safe message and byte counters, optionally keeping raw frames."""

    keep_transcript: bool = False
    messages: dict = field(default_factory=lambda: defaultdict(int))
    bytes: dict = field(default_factory=lambda: defaultdict(int))
    transcript: list = field(default_factory=list)
    dropped: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, src: int, dst: int, msg_type: MsgType, data: bytes) -> None:
        with self._lock:
            self.messages[(src, dst, msg_type)] += 1
            self.bytes[(src, dst, msg_type)] += len(data)
            if self.keep_transcript:
                self.transcript.append((src, dst, msg_type, data))

    def note_drop(self) -> None:
        with self._lock:
            self.dropped += 1

    def reset(self) -> None:
        with self._lock:
            self.messages.clear()
            self.bytes.clear()
            self.transcript.clear()
            self.dropped = 0

    def count(self, *, src=None, dst=None, msg_type=None) -> int:
        return self._total(self.messages, src, dst, msg_type)

    def total_bytes(self, *, src=None, dst=None, msg_type=None) -> int:
        return self._total(self.bytes, src, dst, msg_type)

    def _total(self, table, src, dst, msg_type) -> int:
        with self._lock:
            return sum(
                v
                for (s, d, t), v in table.items()
                if (src is None or s == src) and (dst is None or d == dst) and (msg_type is None or t == msg_type)
            )

    def frames(self, *, src=None, dst=None) -> list[bytes]:
        with self._lock:
            return [f for s, d, _, f in self.transcript if (src is None or s == src) and (dst is None or d == dst)]


class ReplyFuture(Future):
    """Future for a reply envelope.

    ``result()`` applies the transport timeout, raises :class:`RemoteError`
    for error replies and moves the caller's logical clock to the reply's
    arrival time.
    """

    def __init__(self, clock: SimClock | None = None, timeout: float | None = None, on_abandon=None) -> None:
        super().__init__()
        self.arrival: float | None = None
        self._clock = clock
        self._timeout = timeout
        self._on_abandon = on_abandon

    def resolve(self, env: Envelope, arrival: float | None) -> None:
        self.arrival = arrival
        self.set_result(env)

    def fail(self, exc: BaseException, arrival: float | None = None) -> None:
        self.arrival = arrival
        self.set_exception(exc)

    def result(self, timeout: float | None = None) -> Envelope:  # type: ignore[override]
        wait = self._timeout if timeout is None else timeout
        try:
            env = super().result(wait)
        except _FutureTimeout:
            if self._on_abandon is not None:
                self._on_abandon()
            raise TransportTimeout(f"no reply within {wait:.3f}s") from None
        except TransportError:
            self._advance()
            raise
        self._advance()
        return raise_if_error(env)

    def _advance(self) -> None:
        if self._clock is not None and self.arrival is not None:
            self._clock.advance_to(self.arrival)


def gather(futures) -> list[Envelope]:
    """Await several replies; the caller's clock ends at the latest arrival."""
    return [f.result() for f in futures]
