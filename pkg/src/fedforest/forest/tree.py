"""Tree and forest structures, prediction and the binary model format.

Nodes are numbered heap style: the root is 0 and node ``i`` has children
``2i+1`` (left) and ``2i+2`` (right).  Left always means "decision bit 1".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from ..wire import Reader, WireError, Writer
from .params import TASKS, TerminationCriteria

MODEL_MAGIC = b"VFFM"
MODEL_VERSION = 1


def left_child(node_id: int) -> int:
    return 2 * node_id + 1


def right_child(node_id: int) -> int:
    return 2 * node_id + 2


def depth_of(node_id: int) -> int:
    return (node_id + 1).bit_length() - 1


@dataclass(frozen=True)
class Leaf:
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError("leaf values must be finite")


@dataclass(frozen=True)
class LocalSplit:
    """Split on a feature whose threshold this model knows.

    ``party`` is 0 in federated models; the centralized reference uses it to
    say whose column the feature is.
    """

    feature: int
    threshold: float
    party: int = 0


@dataclass(frozen=True)
class RemoteSplit:
    """Split owned by another party; only a handle to its record is kept."""

    party: int
    record_id: bytes


Node = Union[Leaf, LocalSplit, RemoteSplit]
Resolver = Callable[[int, Node], bool]


@dataclass
class DecisionTree:
    tree_id: int
    nodes: dict[int, Node] = field(default_factory=dict)

    def validate(self) -> None:
        if 0 not in self.nodes:
            raise ValueError(f"tree {self.tree_id} has no root")
        for nid, node in self.nodes.items():
            kids = (left_child(nid) in self.nodes, right_child(nid) in self.nodes)
            if isinstance(node, Leaf):
                if any(kids):
                    raise ValueError(f"leaf {nid} has children")
            elif not all(kids):
                raise ValueError(f"split {nid} is missing a child")
            if nid and (nid - 1) // 2 not in self.nodes:
                raise ValueError(f"node {nid} is unreachable")

    @property
    def depth(self) -> int:
        return max(depth_of(n) for n in self.nodes)

    def parties(self) -> set[int]:
        return {n.party for n in self.nodes.values() if isinstance(n, RemoteSplit)}

    def leaves(self) -> int:
        return sum(isinstance(n, Leaf) for n in self.nodes.values())


def predict_tree(tree: DecisionTree, resolver: Resolver) -> float:
    nid = 0
    while True:
        node = tree.nodes[nid]
        if isinstance(node, Leaf):
            return node.value
        go_left = resolver(nid, node)
        if go_left is None:
            raise LookupError(f"no decision for node {nid} of tree {tree.tree_id}")
        nid = left_child(nid) if go_left else right_child(nid)


def local_resolver(rows: list[np.ndarray], remote: Optional[dict] = None) -> Resolver:
    """Resolver for a single sample: ``rows[p]`` is party p's feature vector;
    ``remote`` maps ``(party, record_id)`` to a decision bit."""

    def resolve(nid: int, node: Node):
        if isinstance(node, LocalSplit):
            return bool(rows[node.party][node.feature] < node.threshold)
        if remote is None:
            return None
        return remote.get((node.party, node.record_id))

    return resolve


def predict_batch(
    tree: DecisionTree,
    n_rows: int,
    local: list[np.ndarray] | None,
    remote: dict | None = None,
) -> np.ndarray:
    """Vectorised walk.

    ``local[p]`` is party p's (n_rows, d_p) matrix, ``remote`` maps
    ``(party, record_id)`` to a bool array of decision bits over the rows.
    """
    ids = sorted(tree.nodes)
    slot = {nid: s for s, nid in enumerate(ids)}
    m = len(ids)
    value = np.zeros(m)
    leaf = np.zeros(m, dtype=bool)
    left = np.zeros(m, dtype=np.int64)
    right = np.zeros(m, dtype=np.int64)
    decisions = np.zeros((n_rows, m), dtype=bool)
    for s, nid in enumerate(ids):
        node = tree.nodes[nid]
        if isinstance(node, Leaf):
            leaf[s], value[s] = True, node.value
            continue
        left[s], right[s] = slot[left_child(nid)], slot[right_child(nid)]
        if isinstance(node, LocalSplit):
            decisions[:, s] = local[node.party][:, node.feature] < node.threshold
        else:
            key = (node.party, node.record_id)
            if remote is None or key not in remote:
                raise LookupError(f"no decisions for party {node.party} record {node.record_id.hex()}")
            decisions[:, s] = remote[key]
    cur = np.zeros(n_rows, dtype=np.int64)
    rows = np.arange(n_rows)
    for _ in range(tree.depth):
        go = decisions[rows, cur]
        cur = np.where(leaf[cur], cur, np.where(go, left[cur], right[cur]))
    return value[cur]


def aggregate(outputs) -> float:
    present = [o for o in outputs if o is not None]
    if not present:
        raise ValueError("no tree produced an output")
    return float(np.mean(present))


def aggregate_matrix(preds: np.ndarray, present: np.ndarray | None = None) -> np.ndarray:
    """Column-wise mean over trees (rows of ``preds``), skipping absent trees."""
    if present is None:
        present = np.ones(preds.shape[0], dtype=bool)
    if not present.any():
        raise ValueError("no tree produced an output")
    return preds[present].mean(axis=0)


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    task: str = "binary"
    termination: TerminationCriteria = field(default_factory=TerminationCriteria)
    aggregation: str = "mean"

    def __post_init__(self) -> None:
        ids = [t.tree_id for t in self.trees]
        if len(set(ids)) != len(ids):
            raise ValueError("tree ids must be unique")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.aggregation != "mean":
            raise ValueError("only mean aggregation is supported")

    def records(self, party: int) -> list[bytes]:
        out = []
        for t in self.trees:
            for nid in sorted(t.nodes):
                n = t.nodes[nid]
                if isinstance(n, RemoteSplit) and n.party == party:
                    out.append(n.record_id)
        return out

    def remote_parties(self) -> set[int]:
        return set().union(*(t.parties() for t in self.trees)) if self.trees else set()

    def predict(
        self,
        n_rows: int,
        local: list[np.ndarray] | None,
        remote: dict | None = None,
        skip_parties: set[int] = frozenset(),
    ) -> tuple[np.ndarray, list[int]]:
        """Mean over trees; trees that need a party in ``skip_parties`` are
        excluded and their ids returned."""
        excluded = [t.tree_id for t in self.trees if t.parties() & set(skip_parties)]
        kept = [t for t in self.trees if t.tree_id not in excluded]
        if not kept:
            raise ValueError("no tree can be evaluated")
        preds = np.stack([predict_batch(t, n_rows, local, remote) for t in kept])
        return preds.mean(axis=0), excluded

    def to_bytes(self) -> bytes:
        w = Writer().raw(MODEL_MAGIC).u8(MODEL_VERSION)
        w.u8(TASKS.index(self.task)).u8(0)
        tc = self.termination
        w.u32(tc.max_depth).u64(tc.min_samples_split).u64(tc.min_samples_leaf).f64(tc.min_gain)
        w.u32(len(self.trees))
        for t in sorted(self.trees, key=lambda t: t.tree_id):
            w.u64(t.tree_id).u32(len(t.nodes))
            for nid in sorted(t.nodes):
                node = t.nodes[nid]
                w.u64(nid)
                if isinstance(node, Leaf):
                    w.u8(0).f64(node.value)
                elif isinstance(node, LocalSplit):
                    w.u8(1).u32(node.party).u32(node.feature).f64(node.threshold)
                else:
                    w.u8(2).u32(node.party).blob(node.record_id)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ForestModel":
        r = Reader(data)
        if r.raw(4) != MODEL_MAGIC:
            raise WireError("not a model file (bad magic)")
        version = r.u8()
        if version != MODEL_VERSION:
            raise WireError(f"unsupported model version {version}")
        task_idx, agg = r.u8(), r.u8()
        if task_idx >= len(TASKS) or agg != 0:
            raise WireError("unknown task or aggregation code")
        tc = TerminationCriteria(r.u32(), r.u64(), r.u64(), r.f64())
        trees = []
        for _ in range(r.u32()):
            t = DecisionTree(r.u64())
            for _ in range(r.u32()):
                nid, kind = r.u64(), r.u8()
                if kind == 0:
                    t.nodes[nid] = Leaf(r.f64())
                elif kind == 1:
                    party, feat = r.u32(), r.u32()
                    t.nodes[nid] = LocalSplit(feat, r.f64(), party)
                elif kind == 2:
                    t.nodes[nid] = RemoteSplit(r.u32(), r.blob())
                else:
                    raise WireError(f"unknown node kind {kind}")
            t.validate()
            trees.append(t)
        r.expect_end()
        return cls(trees, TASKS[task_idx], tc)


def swap_subtrees(tree: DecisionTree, node_id: int) -> None:
    """Exchange the left and right subtrees below ``node_id`` in place."""

    def collect(root: int) -> dict[int, Node]:
        out, stack = {}, [root]
        while stack:
            nid = stack.pop()
            if nid in tree.nodes:
                out[nid] = tree.nodes[nid]
                stack += [left_child(nid), right_child(nid)]
        return out

    def relocate(nid: int, old_root: int, new_root: int) -> int:
        # walk the path from old_root down to nid and replay it from new_root
        path = []
        while nid != old_root:
            path.append(nid == left_child((nid - 1) // 2))
            nid = (nid - 1) // 2
        for is_left in reversed(path):
            new_root = left_child(new_root) if is_left else right_child(new_root)
        return new_root

    lo, ro = left_child(node_id), right_child(node_id)
    lsub, rsub = collect(lo), collect(ro)
    for nid in (*lsub, *rsub):
        del tree.nodes[nid]
    for nid, node in lsub.items():
        tree.nodes[relocate(nid, lo, ro)] = node
    for nid, node in rsub.items():
        tree.nodes[relocate(nid, ro, lo)] = node


def trees_equivalent(a: DecisionTree, b: DecisionTree, leaf_tol: float = 2.0**-24) -> bool:
    if a.nodes.keys() != b.nodes.keys():
        return False
    for nid, x in a.nodes.items():
        y = b.nodes[nid]
        if type(x) is not type(y):
            return False
        if isinstance(x, Leaf):
            if abs(x.value - y.value) > leaf_tol:
                return False
        elif x != y:
            return False
    return True
