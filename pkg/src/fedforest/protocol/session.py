"""Wiring helpers: build every party of a federation over one network."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..forest.tree import DecisionTree, ForestModel, LocalSplit, RemoteSplit, left_child, right_child, swap_subtrees
from ..transport.base import TransportConfig
from ..transport.codec import Scheme
from ..transport.loopback import LoopbackNetwork
from .active import ActiveParty, CryptoConfig
from .passive import PassiveParty


@dataclass
class FederatedSession:
    network: LoopbackNetwork
    active: ActiveParty
    passives: dict[int, PassiveParty] = field(default_factory=dict)

    def close(self) -> None:
        self.network.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def init_session(
    active_data: tuple,
    passive_data: list[tuple],
    *,
    transport: TransportConfig | None = None,
    crypto: CryptoConfig | None = None,
    scheme: Scheme | None = None,
    seed: int | None = None,
    keep_transcript: bool = False,
    workers: int = 8,
) -> FederatedSession:
    """Create parties on a loopback network, align ids and broadcast labels.

    ``active_data`` is ``(ids, features, labels)``; each passive entry is
    ``(ids, features)`` and becomes party 1, 2, ...
    """
    net = LoopbackNetwork(transport, keep_transcript=keep_transcript, workers=workers)
    passives = {}
    for i, (ids, x) in enumerate(passive_data, start=1):
        passives[i] = PassiveParty(i, ids, x, net.endpoint(i), seed=seed)
    ids, x, y = active_data
    active = ActiveParty(ids, x, y, net.endpoint(0), list(passives), crypto=crypto, scheme=scheme, seed=seed)
    try:
        active.init_session()
    except BaseException:
        net.close()
        raise
    return FederatedSession(net, active, passives)


def reveal_tree(tree: DecisionTree, passives: dict[int, PassiveParty]) -> DecisionTree:
    """Replace remote handles by the owners' records and undo orientation flips.

    Only for audits and equivalence checks: it gathers every party's secrets
    in one place.
    """
    out = DecisionTree(tree.tree_id, dict(tree.nodes))
    queue = deque([0])
    while queue:
        nid = queue.popleft()
        node = out.nodes.get(nid)
        if isinstance(node, RemoteSplit):
            rec = passives[node.party].records[node.record_id]
            out.nodes[nid] = LocalSplit(rec.feature, rec.threshold, node.party)
            if rec.flip:
                swap_subtrees(out, nid)
        if isinstance(out.nodes.get(nid), LocalSplit):
            queue += [left_child(nid), right_child(nid)]
    return out


def reveal_model(model: ForestModel, passives: dict[int, PassiveParty]) -> ForestModel:
    return ForestModel([reveal_tree(t, passives) for t in model.trees], model.task, model.termination)


def partition_columns(x: np.ndarray, columns: list[np.ndarray]) -> list[np.ndarray]:
    return [x[:, c] for c in columns]
