"""TCP transport: one long-lived duplex connection per party pair.

Frames are self-delimiting (the envelope header carries the payload length),
so the stream needs no extra length prefix.  Replies are matched to pending
requests by correlation id; the artificial link delay is applied by a
per-connection sender thread, so queued messages still overlap in flight.
"""

from __future__ import annotations

import itertools
import logging
import queue
import socket
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor

from .base import (
    REPLY_BIT,
    ControlOp,
    Handler,
    ReplyFuture,
    SimClock,
    TrafficStats,
    TransportConfig,
    TransportError,
    TransportTimeout,
    control,
    error_reply,
)
from .framing import HEADER_SIZE, Envelope, FramingError, MsgType, frame, parse_header

log = logging.getLogger(__name__)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed the connection")
        buf.extend(chunk)
    return bytes(buf)


class _Connection:
    def __init__(self, endpoint: "SocketEndpoint", sock: socket.socket, peer: int | None = None):
        self.ep = endpoint
        self.sock = sock
        self.peer = peer
        self._outbox: queue.Queue = queue.Queue()
        self._closed = threading.Event()
        self._sender = threading.Thread(target=self._send_loop, daemon=True)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)

    def start(self) -> None:
        self._sender.start()
        self._reader.start()

    def send(self, data: bytes) -> None:
        due = time.monotonic() + self.ep.config.delay(len(data))
        self._outbox.put((due, data))

    def _send_loop(self) -> None:
        while not self._closed.is_set():
            item = self._outbox.get()
            if item is None:
                return
            due, data = item
            pause = due - time.monotonic()
            if pause > 0:
                time.sleep(pause)
            try:
                self.sock.sendall(data)
            except OSError:
                self.close()
                return

    def _read_loop(self) -> None:
        try:
            while not self._closed.is_set():
                head = _recv_exact(self.sock, HEADER_SIZE)
                env, length = parse_header(head)
                payload = _recv_exact(self.sock, length)
                env = Envelope(env.msg_type, payload, env.session_id, env.tree_id, env.node_id, env.correlation_id, env.version)
                self.ep._on_frame(self, env, head + payload)
        except (ConnectionError, OSError, FramingError) as exc:
            if not self._closed.is_set():
                log.debug("connection to party %s closed: %s", self.peer, exc)
        finally:
            self.close()

    def close(self) -> None:
        if self._closed.is_set():
            return
        self._closed.set()
        self._outbox.put(None)
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
        self.ep._on_close(self)


class SocketEndpoint:
    def __init__(self, party: int, config: TransportConfig | None = None, *, workers: int = 8,
                 stats: TrafficStats | None = None) -> None:
        self.party = party
        self.config = config or TransportConfig(mode="socket")
        self.stats = stats or TrafficStats()
        self.clock = SimClock()  # real sockets: the logical clock is never advanced
        self._handler: Handler | None = None
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix=f"sock{party}")
        self._peers: dict[int, _Connection] = {}
        self._pending: dict[int, ReplyFuture] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._peer_ready = threading.Condition(self._lock)
        self._server: socket.socket | None = None

    def serve(self, handler: Handler) -> None:
        self._handler = handler

    def listen(self, host: str = "127.0.0.1", port: int = 0) -> int:
        srv = socket.create_server((host, port))
        self._server = srv
        threading.Thread(target=self._accept_loop, args=(srv,), daemon=True).start()
        return srv.getsockname()[1]

    def _accept_loop(self, srv: socket.socket) -> None:
        while True:
            try:
                sock, _ = srv.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            _Connection(self, sock).start()

    def connect(self, peer: int, host: str, port: int, *, retry_for: float = 10.0) -> None:
        deadline = time.monotonic() + retry_for
        while True:
            try:
                sock = socket.create_connection((host, port), timeout=5)
                break
            except OSError:
                if time.monotonic() > deadline:
                    raise TransportError(f"cannot reach party {peer} at {host}:{port}") from None
                time.sleep(0.05)
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        conn = _Connection(self, sock, peer)
        self._register(peer, conn)
        conn.start()
        hello = Envelope(MsgType.CONTROL, control(ControlOp.HELLO, struct.pack("<I", self.party)))
        conn.send(frame(hello))

    def wait_for_peer(self, peer: int, timeout: float = 10.0) -> None:
        with self._peer_ready:
            if not self._peer_ready.wait_for(lambda: peer in self._peers, timeout):
                raise TransportTimeout(f"party {peer} never connected")

    def _register(self, peer: int, conn: _Connection) -> None:
        with self._peer_ready:
            conn.peer = peer
            self._peers[peer] = conn
            self._peer_ready.notify_all()

    def _on_close(self, conn: _Connection) -> None:
        with self._lock:
            if conn.peer is not None and self._peers.get(conn.peer) is conn:
                del self._peers[conn.peer]

    def request(self, dst: int, env: Envelope) -> ReplyFuture:
        with self._lock:
            corr = next(self._ids)
            conn = self._peers.get(dst)
        env = Envelope(env.msg_type, env.payload, env.session_id, env.tree_id, env.node_id, corr, env.version)
        fut = ReplyFuture(None, self.config.timeout, on_abandon=lambda: self._pending.pop(corr, None))
        if conn is None:
            fut.fail(TransportError(f"no connection to party {dst}"))
            return fut
        data = frame(env)
        with self._lock:
            self._pending[corr] = fut
        self.stats.record(self.party, dst, env.msg_type, data)
        conn.send(data)
        return fut

    def _on_frame(self, conn: _Connection, env: Envelope, raw: bytes) -> None:
        if conn.peer is None:
            if env.msg_type is MsgType.CONTROL and env.payload[:1] == bytes([ControlOp.HELLO]):
                self._register(struct.unpack("<I", env.payload[1:5])[0], conn)
                return
            raise FramingError("first frame on a connection must be HELLO")
        if env.correlation_id & REPLY_BIT:
            with self._lock:
                fut = self._pending.pop(env.correlation_id & ~REPLY_BIT, None)
            if fut is None:
                self.stats.note_drop()  # late reply after a timeout
            elif not fut.done():
                fut.resolve(env, None)
            return
        self._pool.submit(self._handle, conn, env)

    def _handle(self, conn: _Connection, req: Envelope) -> None:
        try:
            if self._handler is None:
                raise TransportError(f"party {self.party} has no handler")
            reply = self._handler(conn.peer, req)
        except Exception as exc:  # noqa: BLE001 - reported to the requester
            reply = error_reply(req, f"{type(exc).__name__}: {exc}")
        reply = Envelope(reply.msg_type, reply.payload, req.session_id, req.tree_id, req.node_id,
                         req.correlation_id | REPLY_BIT, reply.version)
        data = frame(reply)
        self.stats.record(self.party, conn.peer, reply.msg_type, data)
        conn.send(data)

    def close(self) -> None:
        if self._server is not None:
            self._server.close()
        for conn in list(self._peers.values()):
            conn.close()
        self._pool.shutdown(wait=False, cancel_futures=True)
