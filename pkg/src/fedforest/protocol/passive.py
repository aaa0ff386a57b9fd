"""Passive party: holds feature columns, never labels or the key."""

from __future__ import annotations

import hashlib
import logging
import random
import threading
from dataclasses import dataclass

import numpy as np

from ..crypto.riac import RiacContext
from ..forest.binning import nearest_rank_thresholds
from ..forest.instance_space import InstanceSpace
from ..forest.split import DegenerateSplit, split_instance_space, threshold_for_bin
from ..forest.tree import left_child, right_child
from ..psi import PsiPassive, random_secret
from ..transport.base import ControlOp, control, gather
from ..transport.framing import Envelope, MsgType
from ..wire import Reader, WireError, Writer
from .messages import (
    EncryptedBins,
    FlipPolicy,
    InferRequest,
    InferResponse,
    InstanceBroadcast,
    LabelBroadcast,
    PsiFinish,
    PsiOfferReply,
    SplitAck,
    SplitCommand,
    StatsRequest,
    StatsResponse,
    read_psi,
)

log = logging.getLogger(__name__)

RECORDS_MAGIC = b"VFNR"
RECORDS_VERSION = 1


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class NodeRecord:
    record_id: bytes
    tree_id: int
    node_id: int
    feature: int
    threshold: float
    flip: bool


class PassiveParty:
    """Serves statistics, splits and inference for one passive party.

    ``ids``/``features`` are the party's own rows before alignment.  The
    party also answers inference queries for any rows registered with
    :meth:`register_rows` (training rows are registered automatically).
    """

    def __init__(self, party: int, ids, features: np.ndarray, endpoint, *, seed: int | None = None) -> None:
        if party < 1:
            raise ValueError("passive parties are numbered from 1")
        self.party = party
        self.ids = [str(i) for i in ids]
        self.raw_features = np.asarray(features, dtype=np.float64)
        if self.raw_features.shape[0] != len(self.ids):
            raise ValueError("one feature row per id is required")
        self.endpoint = endpoint
        self._seed = seed
        self._psi = PsiPassive(self.ids, party, random_secret(None if seed is None else random.Random(seed * 7919 + party)))
        self._salt = hashlib.blake2b(f"{seed}:{party}".encode() if seed is not None else np.random.bytes(16), digest_size=16).digest()
        self.session_id: int | None = None
        self.x: np.ndarray | None = None  # aligned rows
        self.context: RiacContext | None = None
        self.c1 = self.c2 = None
        self.peers: list[int] = []
        self.scheme = None
        self.records: dict[bytes, NodeRecord] = {}
        self._generation: dict[tuple[int, int], int] = {}
        self.on_shutdown = None
        self._spaces: dict[int, dict[int, InstanceSpace]] = {}
        self._bins: dict[int, int] = {}  # tree -> bin count its stats used
        self._lock = threading.Lock()
        self._serve_index: dict[str, int] = {}
        self._serve_rows = np.empty((0, self.raw_features.shape[1]))
        self.register_rows(self.ids, self.raw_features)
        endpoint.serve(self.handle)

    # serving rows

    def register_rows(self, ids, features: np.ndarray) -> None:
        features = np.asarray(features, dtype=np.float64)
        with self._lock:
            base = self._serve_rows.shape[0]
            self._serve_rows = np.vstack([self._serve_rows, features])
            for j, i in enumerate(ids):
                self._serve_index[str(i)] = base + j

    # dispatch

    def handle(self, src: int, env: Envelope) -> Envelope:
        if env.msg_type is MsgType.PSI:
            return self._on_psi(env)
        if env.msg_type is MsgType.CONTROL:
            return self._on_control(env)
        if env.msg_type is MsgType.INFER_REQUEST:
            # serving is independent of any training session
            resp = self.eval_inference(InferRequest.from_bytes(env.payload))
            return env.reply(MsgType.INFER_RESPONSE, resp.to_bytes())
        if env.msg_type is MsgType.LABEL_BROADCAST:
            return self._on_labels(env)
        if self.session_id is None or env.session_id != self.session_id:
            raise ProtocolError(f"unknown session {env.session_id}")
        if env.msg_type is MsgType.STATS_REQUEST:
            resp = self.compute_statistics(env.tree_id, env.node_id, StatsRequest.from_bytes(env.payload))
            return env.reply(MsgType.STATS_RESPONSE, resp.to_bytes(self.context))
        if env.msg_type is MsgType.SPLIT_COMMAND:
            ack = self.apply_split(env, SplitCommand.from_bytes(env.payload))
            return env.reply(MsgType.SPLIT_ACK, ack.to_bytes(self.scheme))
        raise ProtocolError(f"passive party cannot handle {env.msg_type.name}")

    def _on_psi(self, env: Envelope) -> Envelope:
        msg = read_psi(env.payload)
        if isinstance(msg, PsiFinish):
            self._psi.receive(msg.spoke_double)
            rows = self._psi.rows_for(msg.ordered)
            with self._lock:
                self.session_id = env.session_id
                self.x = self.raw_features[rows]
                self.aligned_ids = [self.ids[r] for r in rows]
            return env.reply(MsgType.PSI, control(ControlOp.ACK, len(rows).to_bytes(8, "little")))
        reply = PsiOfferReply(self._psi.blinded(), self._psi.answer(msg.values))
        return env.reply(MsgType.PSI, reply.to_bytes())

    def _on_labels(self, env: Envelope) -> Envelope:
        if self.x is None or env.session_id != self.session_id:
            raise ProtocolError("labels arrived before ID alignment")
        msg = LabelBroadcast.from_bytes(env.payload)
        if msg.c1.size != self.x.shape[0]:
            raise ProtocolError(f"{msg.c1.size} ciphertexts for {self.x.shape[0]} aligned rows")
        if msg.c1.size > msg.context.max_addends:
            raise ProtocolError("more samples than the cipher can add exactly")
        self.context, self.c1, self.c2 = msg.context, msg.c1, msg.c2
        self.peers = [p for p in msg.peers if p != self.party]
        self.scheme = msg.scheme
        return env.reply(MsgType.CONTROL, control(ControlOp.ACK))

    def _on_control(self, env: Envelope) -> Envelope:
        op = env.payload[0] if env.payload else None
        if op == ControlOp.INSTANCE_BROADCAST:
            msg = InstanceBroadcast.from_bytes(env.payload[1:])
            self._store_children(env.tree_id, env.node_id, msg.left, msg.right)
        elif op == ControlOp.END_TREE:
            with self._lock:
                self._spaces.pop(env.tree_id, None)
                self._bins.pop(env.tree_id, None)
        elif op == ControlOp.PING:
            pass
        elif op == ControlOp.SHUTDOWN:
            if self.on_shutdown is not None:
                self.on_shutdown()
        else:
            raise ProtocolError(f"unexpected control op {op}")
        return env.reply(MsgType.CONTROL, control(ControlOp.ACK))

    # training

    def _store_children(self, tree_id: int, node_id: int, left: InstanceSpace, right: InstanceSpace) -> None:
        with self._lock:
            cache = self._spaces.setdefault(tree_id, {})
            cache[left_child(node_id)] = left
            cache[right_child(node_id)] = right

    def _space(self, tree_id: int, node_id: int) -> InstanceSpace:
        with self._lock:
            try:
                return self._spaces[tree_id][node_id]
            except KeyError:
                raise ProtocolError(f"no instance space for tree {tree_id} node {node_id}") from None

    def compute_statistics(self, tree_id: int, node_id: int, req: StatsRequest) -> StatsResponse:
        if req.space is not None:
            if req.space.universe != self.x.shape[0]:
                raise ProtocolError("instance space does not match the aligned sample count")
            with self._lock:
                self._spaces.setdefault(tree_id, {})[node_id] = req.space
        with self._lock:
            self._bins[tree_id] = req.n_bins
        space = self._space(tree_id, node_id)
        return encrypted_bin_sums(self.x, space, self.c1, self.c2, self.context, req.n_bins)

    def apply_split(self, env: Envelope, cmd: SplitCommand) -> SplitAck:
        tree_id, node_id = env.tree_id, env.node_id
        space = self._space(tree_id, node_id)
        if not 0 <= cmd.feature < self.x.shape[1]:
            return SplitAck(reason=f"no feature {cmd.feature}")
        col = self.x[:, cmd.feature]
        # recomputed from the same space and bin count, so it matches the stats
        with self._lock:
            n_bins = self._bins.get(tree_id)
        if n_bins is None:
            return SplitAck(reason=f"no statistics were computed for tree {tree_id}")
        thr = nearest_rank_thresholds(np.sort(col[space.indices]), n_bins)
        try:
            v = threshold_for_bin(thr, cmd.bin)
            left, right = split_instance_space(space, col, v)
        except DegenerateSplit as exc:
            return SplitAck(reason=str(exc))
        flip = self._draw_flip(cmd.flip, tree_id, node_id)
        if flip:
            left, right = right, left
        with self._lock:
            # retraining a tree id must not clobber records an older model uses
            gen = self._generation.get((tree_id, node_id), 0)
            self._generation[tree_id, node_id] = gen + 1
            rid = self._record_id(tree_id, node_id, gen)
            if rid in self.records:
                raise ProtocolError("record id collision")
            self.records[rid] = NodeRecord(rid, tree_id, node_id, cmd.feature, v, flip)
        if cmd.broadcast:
            self._store_children(tree_id, node_id, left, right)
            body = control(ControlOp.INSTANCE_BROADCAST, InstanceBroadcast(left, right).to_bytes(self.scheme))
            futs = [
                self.endpoint.request(p, Envelope(MsgType.CONTROL, body, self.session_id, tree_id, node_id))
                for p in self.peers
            ]
            gather(futs)
        return SplitAck(rid, left, right)

    def _draw_flip(self, policy: FlipPolicy, tree_id: int, node_id: int) -> bool:
        if policy is FlipPolicy.ALWAYS:
            return True
        if policy is FlipPolicy.NEVER:
            return False
        if self._seed is None:
            return bool(np.random.default_rng().integers(2))
        rng = np.random.default_rng(np.random.SeedSequence([self._seed, self.party, tree_id, node_id, 2]))
        return bool(rng.integers(2))

    def _record_id(self, tree_id: int, node_id: int, generation: int) -> bytes:
        msg = b"".join(v.to_bytes(8, "little") for v in (tree_id, node_id, generation))
        return hashlib.blake2b(msg, key=self._salt, digest_size=12).digest()

    # persistence

    def save_records(self, path: str) -> None:
        with self._lock:
            recs = sorted(self.records.values(), key=lambda r: (r.tree_id, r.node_id, r.record_id))
        w = Writer().raw(RECORDS_MAGIC).u8(RECORDS_VERSION).u32(self.party).u32(len(recs))
        for r in recs:
            w.blob(r.record_id).u64(r.tree_id).u64(r.node_id).u32(r.feature).f64(r.threshold).u8(r.flip)
        with open(path, "wb") as fh:
            fh.write(w.getvalue())

    def load_records(self, path: str) -> int:
        with open(path, "rb") as fh:
            r = Reader(fh.read())
        if r.raw(4) != RECORDS_MAGIC or r.u8() != RECORDS_VERSION:
            raise WireError(f"{path} is not a node-record file")
        if r.u32() != self.party:
            raise WireError(f"{path} belongs to another party")
        loaded = {}
        for _ in range(r.u32()):
            rid = r.blob()
            loaded[rid] = NodeRecord(rid, r.u64(), r.u64(), r.u32(), r.f64(), bool(r.u8()))
        r.expect_end()
        with self._lock:
            self.records.update(loaded)
        return len(loaded)

    # inference

    def eval_inference(self, req: InferRequest) -> InferResponse:
        missing = [r.hex() for r in req.record_ids if r not in self.records]
        if missing:
            raise ProtocolError(f"unknown record ids: {', '.join(missing)}")
        try:
            rows = np.array([self._serve_index[i] for i in req.row_ids], dtype=np.int64)
        except KeyError as exc:
            raise ProtocolError(f"unknown row id {exc.args[0]!r}") from None
        recs = [self.records[r] for r in req.record_ids]
        if not recs:
            return InferResponse(np.zeros((len(rows), 0), dtype=bool))
        feats = np.array([r.feature for r in recs], dtype=np.int64)
        thr = np.array([r.threshold for r in recs])
        flip = np.array([r.flip for r in recs], dtype=bool)
        x = self._serve_rows[rows][:, feats]
        return InferResponse((x < thr) ^ flip)


def encrypted_bin_sums(
    x: np.ndarray,
    space: InstanceSpace,
    c1: np.ndarray,
    c2: np.ndarray,
    context: RiacContext,
    n_bins: int,
) -> StatsResponse:
    """Encrypted per-bin label sums and plain counts for every local column.

    The node total is summed once; each feature then sums every bin except
    its largest and gets that one by subtraction, which keeps the work
    proportional to the samples outside the dominant bin.
    """
    idx = space.indices
    n0, nl = context.n0, context.nl
    a1, a2 = c1[idx], c2[idx]
    t1, t2 = sum(a1), sum(a2)
    sub = x[idx]
    order = np.argsort(sub, axis=0, kind="stable")
    out = StatsResponse()
    for k in range(sub.shape[1]):
        sorted_col = sub[order[:, k], k]
        thr = nearest_rank_thresholds(sorted_col, n_bins)
        edges = np.concatenate(([0], np.searchsorted(sorted_col, thr, side="left")))
        counts = np.diff(np.append(edges, sorted_col.size)).astype(np.int64)
        big = int(np.argmax(counts))
        s1 = [0] * counts.size
        s2 = [0] * counts.size
        for b in range(counts.size):
            if b == big:
                continue
            rows = order[edges[b] : edges[b] + counts[b], k]
            s1[b] = sum(a1[rows])
            s2[b] = sum(a2[rows])
        s1[big] = t1 - sum(s1)
        s2[big] = t2 - sum(s2)
        out.features.append(EncryptedBins(k, counts, [v % n0 for v in s1], [v % nl for v in s2]))
    return out
