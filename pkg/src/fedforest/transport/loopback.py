from __future__ import annotations

import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor

from .base import (
    REPLY_BIT,
    Handler,
    ReplyFuture,
    SimClock,
    TrafficStats,
    TransportConfig,
    TransportError,
    TransportTimeout,
    error_reply,
)
from .framing import Envelope, frame, unframe

log = logging.getLogger(__name__)


class LoopbackNetwork:
    """In-process network of parties.

    Messages are really framed to bytes and parsed back, so byte counts and
    transcripts are exact.  Link delay is simulated on the :class:`SimClock`;
    nothing sleeps.  A party marked down swallows requests, which surface as
    :class:`TransportTimeout` at ``send time + timeout`` on the logical clock.
    """

    def __init__(self, config: TransportConfig | None = None, *, keep_transcript: bool = False, workers: int = 8):
        self.config = config or TransportConfig()
        self.clock = SimClock()
        self.stats = TrafficStats(keep_transcript=keep_transcript)
        self._workers = workers
        self._endpoints: dict[int, LoopbackEndpoint] = {}
        self._down: set[int] = set()
        self._lock = threading.Lock()

    def endpoint(self, party: int) -> "LoopbackEndpoint":
        with self._lock:
            if party not in self._endpoints:
                self._endpoints[party] = LoopbackEndpoint(self, party, self._workers)
            return self._endpoints[party]

    def set_down(self, party: int, down: bool = True) -> None:
        with self._lock:
            (self._down.add if down else self._down.discard)(party)

    def is_down(self, party: int) -> bool:
        return party in self._down

    def close(self) -> None:
        for ep in list(self._endpoints.values()):
            ep.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class LoopbackEndpoint:
    def __init__(self, net: LoopbackNetwork, party: int, workers: int) -> None:
        self.net = net
        self.party = party
        self.config = net.config
        self.clock = net.clock
        self._handler: Handler | None = None
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix=f"party{party}")
        self._ids = itertools.count(1)
        self._abandoned: set[int] = set()
        self._lock = threading.Lock()

    @property
    def stats(self) -> TrafficStats:
        return self.net.stats

    def serve(self, handler: Handler) -> None:
        self._handler = handler

    def next_correlation_id(self) -> int:
        with self._lock:
            return next(self._ids)

    def request(self, dst: int, env: Envelope) -> ReplyFuture:
        corr = self.next_correlation_id()
        env = Envelope(env.msg_type, env.payload, env.session_id, env.tree_id, env.node_id, corr, env.version)
        data = frame(env)
        self.net.stats.record(self.party, dst, env.msg_type, data)
        t0 = self.clock.now()
        fut = ReplyFuture(self.clock, self.config.timeout, on_abandon=lambda: self._abandon(corr))
        if self.net.is_down(dst) or dst not in self.net._endpoints:
            fut.fail(TransportTimeout(f"party {dst} did not answer"), t0 + self.config.timeout)
            return fut
        arrival = t0 + self.config.delay(len(data))
        self.net._endpoints[dst]._pool.submit(self.net._endpoints[dst]._deliver, self, data, t0, arrival, fut)
        return fut

    def _abandon(self, corr: int) -> None:
        with self._lock:
            self._abandoned.add(corr)

    def _deliver(self, sender: "LoopbackEndpoint", data: bytes, t0: float, arrival: float, fut: ReplyFuture) -> None:
        self.clock.set(arrival)
        try:
            req = unframe(data)
            if self._handler is None:
                raise TransportError(f"party {self.party} has no handler")
            try:
                reply = self._handler(sender.party, req)
            except TransportError:
                raise
            except Exception as exc:  # noqa: BLE001 - reported back to the requester
                log.debug("handler error at party %d", self.party, exc_info=True)
                reply = error_reply(req, f"{type(exc).__name__}: {exc}")
            reply = Envelope(
                reply.msg_type, reply.payload, req.session_id, req.tree_id, req.node_id,
                req.correlation_id | REPLY_BIT, reply.version,
            )
            out = frame(reply)
            self.net.stats.record(self.party, sender.party, reply.msg_type, out)
            back = self.clock.now() + self.config.delay(len(out))
            with sender._lock:
                late = req.correlation_id in sender._abandoned
                sender._abandoned.discard(req.correlation_id)
            if late or back - t0 > self.config.timeout:
                self.net.stats.note_drop()
                if not fut.done():
                    fut.fail(TransportTimeout(f"reply from party {self.party} exceeded the timeout"), t0 + self.config.timeout)
                return
            fut.resolve(unframe(out), back)
        except BaseException as exc:  # noqa: BLE001
            if not fut.done():
                fut.fail(exc if isinstance(exc, TransportError) else TransportError(str(exc)), arrival)

    def close(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)
