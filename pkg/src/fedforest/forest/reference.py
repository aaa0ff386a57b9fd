"""Plaintext trainer with every column in one place.

Uses the same binning, scores, tie-breaks, termination and row sampling as
the federated trainer, so with orientation shuffling off both produce the
same trees.  Columns stay grouped by party because the tie-break order
depends on it.
"""

from __future__ import annotations

import numpy as np

from ..crypto.fixedpoint import FixedPointCodec
from .instance_space import InstanceSpace
from .params import TrainParams, is_active_only, sample_rows
from .split import choose_best_split, is_pure, leaf_value, local_statistics, split_instance_space, threshold_for_bin
from .tree import DecisionTree, ForestModel, Leaf, LocalSplit, depth_of, left_child, right_child


def train_tree_centralized(
    tree_id: int,
    parties: list[np.ndarray],
    labels: np.ndarray,
    labels_fp: np.ndarray,
    params: TrainParams,
    scale_bits: int = 24,
) -> DecisionTree:
    n = labels.shape[0]
    term = params.termination
    usable = parties[:1] if is_active_only(params, tree_id) else parties
    tree = DecisionTree(tree_id)
    frontier: list[tuple[int, InstanceSpace]] = [(0, sample_rows(n, params, tree_id))]
    while frontier:
        nxt = []
        for nid, space in frontier:
            y = labels[space.indices]
            if depth_of(nid) >= term.max_depth or space.count < term.min_samples_split or is_pure(y):
                tree.nodes[nid] = Leaf(leaf_value(y))
                continue
            stats, thresholds = [], []
            for p, x in enumerate(usable):
                st, thr = local_statistics(p, x, space, labels_fp, params.n_bins)
                stats.append(st)
                thresholds.append(thr)
            cand = choose_best_split(stats, term, params.task, scale_bits)
            if cand is None:
                tree.nodes[nid] = Leaf(leaf_value(y))
                continue
            v = threshold_for_bin(thresholds[cand.party][cand.feature], cand.bin)
            sl, sr = split_instance_space(space, usable[cand.party][:, cand.feature], v)
            tree.nodes[nid] = LocalSplit(cand.feature, v, cand.party)
            nxt += [(left_child(nid), sl), (right_child(nid), sr)]
        frontier = nxt
    return tree


def reference_train_centralized(
    parties: list[np.ndarray],
    labels: np.ndarray,
    params: TrainParams,
    codec: FixedPointCodec | None = None,
) -> ForestModel:
    codec = codec or FixedPointCodec()
    labels = np.asarray(labels, dtype=np.float64)
    if any(x.shape[0] != labels.shape[0] for x in parties):
        raise ValueError("every party matrix needs one row per label")
    labels_fp = codec.encode_array(labels)
    trees = [
        train_tree_centralized(t, parties, labels, labels_fp, params, codec.scale_bits)
        for t in range(params.n_trees)
    ]
    return ForestModel(trees, params.task, params.termination)
