"""Active party: owns the labels and the cipher key, drives training and
assembles predictions."""

from __future__ import annotations

import logging
import random
import secrets
from dataclasses import dataclass

import numpy as np

from ..crypto.fixedpoint import FixedPointCodec
from ..crypto.riac import RiacKey, decrypt_raw, encrypt, generate_key
from ..forest.params import TrainParams, is_active_only, sample_rows
from ..forest.split import (
    BinStatistics,
    FeatureBins,
    choose_best_split,
    is_pure,
    leaf_value,
    local_statistics,
    split_instance_space,
    threshold_for_bin,
)
from ..forest.tree import (
    DecisionTree,
    ForestModel,
    Leaf,
    LocalSplit,
    RemoteSplit,
    depth_of,
    left_child,
    right_child,
)
from ..psi import PsiActive, random_secret
from ..transport.base import ControlOp, TransportError, control, gather
from ..transport.codec import Scheme
from ..transport.framing import Envelope, MsgType
from .messages import (
    FlipPolicy,
    InferRequest,
    InferResponse,
    InstanceBroadcast,
    LabelBroadcast,
    PsiFinish,
    PsiOffer,
    PsiOfferReply,
    SplitAck,
    SplitCommand,
    StatsRequest,
    StatsResponse,
)
from .passive import ProtocolError

log = logging.getLogger(__name__)


class NoResolvableTrees(ProtocolError):
    """Raised in degraded mode when no tree avoids the unavailable parties."""


@dataclass(frozen=True)
class CryptoConfig:
    rounds: int = 2
    modulus_bits: int = 1024
    headroom_bits: int = 40
    scale_bits: int = 24

    def __post_init__(self) -> None:
        if self.rounds < 1 or self.modulus_bits < 256 or self.headroom_bits < 1:
            raise ValueError("need rounds >= 1, modulus_bits >= 256, headroom_bits >= 1")
        if not 0 <= self.scale_bits <= 52:
            raise ValueError("scale_bits must be in [0, 52]")


class ActiveParty:
    def __init__(
        self,
        ids,
        features: np.ndarray,
        labels: np.ndarray,
        endpoint,
        passives: list[int],
        *,
        crypto: CryptoConfig | None = None,
        scheme: Scheme | None = None,
        seed: int | None = None,
        key: RiacKey | None = None,
    ) -> None:
        if not passives:
            raise ValueError("training needs at least one passive party")
        self.ids = [str(i) for i in ids]
        self.raw_features = np.asarray(features, dtype=np.float64)
        self.raw_labels = np.asarray(labels, dtype=np.float64)
        if not self.raw_features.shape[0] == self.raw_labels.shape[0] == len(self.ids):
            raise ValueError("ids, features and labels must have the same length")
        self.endpoint = endpoint
        self.passives = sorted(passives)
        self.crypto = crypto or CryptoConfig()
        self.codec = FixedPointCodec(self.crypto.scale_bits)
        self.scheme = scheme
        self.seed = seed
        self._key = key
        self.session_id = 0
        self.flip_override: FlipPolicy | None = None
        self.x: np.ndarray | None = None
        self.y: np.ndarray | None = None
        self.aligned_ids: list[str] = []
        endpoint.serve(self._refuse)

    def _refuse(self, src: int, env: Envelope) -> Envelope:
        raise ProtocolError("the active party does not take requests")

    @property
    def n(self) -> int:
        return 0 if self.y is None else int(self.y.shape[0])

    def _rng(self, stream: int) -> random.Random | None:
        return None if self.seed is None else random.Random(self.seed * 1_000_003 + stream)

    def _send(self, dst: int, mtype: MsgType, payload: bytes, tree_id: int = 0, node_id: int = 0):
        return self.endpoint.request(dst, Envelope(mtype, payload, self.session_id, tree_id, node_id))

    # session setup

    def init_session(self) -> None:
        rng = self._rng(0)
        self.session_id = rng.getrandbits(63) if rng else secrets.randbits(63)
        self._align(rng)
        self._broadcast_labels()

    def _align(self, rng) -> None:
        hub = PsiActive(self.ids, random_secret(rng))
        offer = PsiOffer(hub.own_blinded()).to_bytes()
        replies = gather([self._send(p, MsgType.PSI, offer) for p in self.passives])
        for p, env in zip(self.passives, replies):
            msg = PsiOfferReply.from_bytes(env.payload)
            hub.receive(p, msg.hub_double)
            hub.answer(p, msg.own_blinded)
        rows, ordered = hub.intersect()
        futs = [
            self._send(p, MsgType.PSI, PsiFinish(hub.peer_double(p), ordered[p]).to_bytes())
            for p in self.passives
        ]
        for env in gather(futs):
            if int.from_bytes(env.payload[1:9], "little") != rows.size:
                raise ProtocolError("parties disagree on the intersection size")
        self.x = self.raw_features[rows]
        self.y = self.raw_labels[rows]
        self.aligned_ids = [self.ids[r] for r in rows]

    def _broadcast_labels(self) -> None:
        if self._key is None:
            c = self.crypto
            key_seed = None if self.seed is None else self.seed * 1_000_003 + 1
            self._key = generate_key(c.rounds, c.modulus_bits, c.headroom_bits, seed=key_seed)
        self.y_fp = self.codec.encode_array(self.y)
        cts = [encrypt(self._key, int(m)) for m in self.y_fp]
        c1 = np.array([c.c1 for c in cts], dtype=object)
        c2 = np.array([c.c2 for c in cts], dtype=object)
        msg = LabelBroadcast(self._key.context, c1, c2, self.passives, self.scheme, self.crypto.scale_bits).to_bytes()
        gather([self._send(p, MsgType.LABEL_BROADCAST, msg) for p in self.passives])

    # training

    def _flip_policy(self, params: TrainParams) -> FlipPolicy:
        if self.flip_override is not None:
            return self.flip_override
        return FlipPolicy.RANDOM if params.shuffle else FlipPolicy.NEVER

    def _decrypt_stats(self, party: int, resp: StatsResponse, expected: int) -> BinStatistics:
        st = BinStatistics(party)
        for fb in resp.features:
            if int(fb.counts.sum()) != expected:
                raise ProtocolError(f"party {party} feature {fb.feature}: bin counts do not add up to {expected}")
            sums = np.empty(len(fb.c1), dtype=object)
            sums[:] = [decrypt_raw(self._key, a, b) for a, b in zip(fb.c1, fb.c2)]
            st.features.append(FeatureBins(fb.feature, fb.counts, sums))
        return st

    def train_tree(self, tree_id: int, params: TrainParams) -> DecisionTree:
        """Grow one tree level by level; all requests of a level are in flight together."""
        if self.y is None:
            raise ProtocolError("init_session() has not run")
        term = params.termination
        parties = [] if is_active_only(params, tree_id) else self.passives
        flip = self._flip_policy(params)
        tree = DecisionTree(tree_id)
        frontier = [(0, sample_rows(self.n, params, tree_id))]
        try:
            while frontier:
                work = []
                for nid, space in frontier:
                    y = self.y[space.indices]
                    if depth_of(nid) >= term.max_depth or space.count < term.min_samples_split or is_pure(y):
                        tree.nodes[nid] = Leaf(leaf_value(y))
                    else:
                        work.append((nid, space))
                if not work:
                    break
                pending = {}
                for nid, space in work:
                    req = StatsRequest(params.n_bins, space if nid == 0 else None, self.scheme).to_bytes()
                    for p in parties:
                        pending[nid, p] = self._send(p, MsgType.STATS_REQUEST, req, tree_id, nid)
                local = {nid: local_statistics(0, self.x, space, self.y_fp, params.n_bins) for nid, space in work}
                frontier, acks = [], {}
                for nid, space in work:
                    stats = [local[nid][0]]
                    for p in parties:
                        resp = StatsResponse.from_bytes(pending[nid, p].result().payload, self._key.context)
                        stats.append(self._decrypt_stats(p, resp, space.count))
                    cand = choose_best_split(stats, term, params.task, self.crypto.scale_bits)
                    if cand is None:
                        tree.nodes[nid] = Leaf(leaf_value(self.y[space.indices]))
                        continue
                    grow = depth_of(nid) + 1 < term.max_depth and max(cand.n_left, cand.n_right) >= term.min_samples_split
                    if cand.party == 0:
                        v = threshold_for_bin(local[nid][1][cand.feature], cand.bin)
                        left, right = split_instance_space(space, self.x[:, cand.feature], v)
                        tree.nodes[nid] = LocalSplit(cand.feature, v)
                        frontier += [(left_child(nid), left), (right_child(nid), right)]
                        if grow and parties:
                            body = control(ControlOp.INSTANCE_BROADCAST, InstanceBroadcast(left, right).to_bytes(self.scheme))
                            acks[nid] = [self._send(p, MsgType.CONTROL, body, tree_id, nid) for p in parties]
                    else:
                        cmd = SplitCommand(cand.feature, cand.bin, flip, grow).to_bytes()
                        acks[nid] = (cand.party, space, self._send(cand.party, MsgType.SPLIT_COMMAND, cmd, tree_id, nid))
                for nid, a in acks.items():
                    if isinstance(a, list):
                        gather(a)
                        continue
                    party, space, fut = a
                    ack = SplitAck.from_bytes(fut.result().payload)
                    if not ack.ok:
                        log.warning("tree %d node %d: party %d refused the split (%s)", tree_id, nid, party, ack.reason)
                        tree.nodes[nid] = Leaf(leaf_value(self.y[space.indices]))
                        continue
                    if ack.left.count + ack.right.count != space.count or not ack.left.union(ack.right) == space:
                        raise ProtocolError(f"party {party} returned children that do not partition node {nid}")
                    tree.nodes[nid] = RemoteSplit(party, ack.record_id)
                    frontier += [(left_child(nid), ack.left), (right_child(nid), ack.right)]
        finally:
            if parties:
                self._end_tree(tree_id, parties)
        return tree

    def _end_tree(self, tree_id: int, parties: list[int]) -> None:
        try:
            gather([self._send(p, MsgType.CONTROL, control(ControlOp.END_TREE), tree_id) for p in parties])
        except TransportError:
            log.debug("end-of-tree notice to parties %s failed", parties, exc_info=True)

    def train(self, params: TrainParams) -> ForestModel:
        trees = [self.train_tree(t, params) for t in range(params.n_trees)]
        return ForestModel(trees, params.task, params.termination)

    # inference

    def predict(
        self,
        model: ForestModel,
        row_ids: list[str],
        local_rows: np.ndarray,
        *,
        degraded_ok: bool = False,
    ) -> tuple[np.ndarray, list[int]]:
        return federated_predict(self.endpoint, model, row_ids, local_rows, degraded_ok=degraded_ok)


def federated_predict(
    endpoint,
    model: ForestModel,
    row_ids: list[str],
    local_rows: np.ndarray,
    *,
    degraded_ok: bool = False,
) -> tuple[np.ndarray, list[int]]:
    """One request and one response per passive party, then a local walk.

    Returns the predictions and the ids of trees left out because a party
    did not answer (empty unless ``degraded_ok``).
    """
    local_rows = np.asarray(local_rows, dtype=np.float64)
    parties = sorted(model.remote_parties())
    futs = {}
    for p in parties:
        req = InferRequest(list(row_ids), model.records(p)).to_bytes()
        futs[p] = endpoint.request(p, Envelope(MsgType.INFER_REQUEST, req))
    remote, down = {}, set()
    for p, fut in futs.items():
        try:
            resp = InferResponse.from_bytes(fut.result().payload)
        except TransportError:
            if not degraded_ok:
                raise
            log.warning("party %d did not answer; dropping the trees that need it", p)
            down.add(p)
            continue
        recs = model.records(p)
        if resp.bits.shape != (len(row_ids), len(recs)):
            raise ProtocolError(f"party {p} answered with a {resp.bits.shape} bitmap")
        for j, rid in enumerate(recs):
            remote[p, rid] = resp.bits[:, j]
    if down and all(t.parties() & down for t in model.trees):
        raise NoResolvableTrees(f"every tree needs an unavailable party ({sorted(down)})")
    return model.predict(len(row_ids), [local_rows], remote, skip_parties=down)
