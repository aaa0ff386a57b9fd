from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .criteria import GAINS
from .instance_space import InstanceSpace
from .params import TerminationCriteria


class DegenerateSplit(ValueError):
    """A split left one side empty."""


@dataclass
class FeatureBins:
    feature: int
    counts: np.ndarray
    sums: np.ndarray  # exact fixed-point integers, int64 or object


@dataclass
class BinStatistics:
    party: int
    features: list[FeatureBins] = field(default_factory=list)


@dataclass(frozen=True)
class SplitCandidate:
    party: int
    feature: int
    bin: int  # left = bins < bin
    gain: float
    n_left: int
    n_right: int


def _prefix(sums: np.ndarray) -> np.ndarray:
    # exact integer prefix sums first, then a single rounding to float
    return np.cumsum(sums).astype(np.float64)


def feature_gains(fb: FeatureBins, task: str, scale: float, min_leaf: int) -> np.ndarray:
    """Gain for every candidate bin 1..B-1 of one feature; invalid ones are -inf."""
    counts = np.asarray(fb.counts, dtype=np.int64)
    if counts.size < 2:
        return np.empty(0)
    n = int(counts.sum())
    cs = _prefix(fb.sums) / scale
    n_l = np.cumsum(counts)[:-1]
    gains = GAINS[task](cs[:-1], n_l, cs[-1], n)
    ok = (n_l >= min_leaf) & (n - n_l >= min_leaf)
    return np.where(ok, gains, -np.inf)


def choose_best_split(
    stats: list[BinStatistics],
    termination: TerminationCriteria,
    task: str,
    scale_bits: int = 24,
) -> SplitCandidate | None:
    """Best gain over every party, feature and bin boundary.

    Ties go to the lowest (party, feature, bin); a split is taken only when
    its gain exceeds ``termination.min_gain``.
    """
    scale = float(1 << scale_bits)
    best: tuple | None = None
    for st in sorted(stats, key=lambda s: s.party):
        for fb in sorted(st.features, key=lambda f: f.feature):
            g = feature_gains(fb, task, scale, termination.min_samples_leaf)
            if g.size == 0:
                continue
            j = int(np.argmax(g))
            if not np.isfinite(g[j]):
                continue
            if best is None or g[j] > best[0]:
                n_l = int(np.asarray(fb.counts)[: j + 1].sum())
                best = (float(g[j]), st.party, fb.feature, j + 1, n_l, int(np.asarray(fb.counts).sum()) - n_l)
    if best is None or not best[0] > termination.min_gain:
        return None
    gain, party, feature, b, n_l, n_r = best
    return SplitCandidate(party, feature, b, gain, n_l, n_r)


def threshold_for_bin(thresholds: np.ndarray, b: int) -> float:
    if not 1 <= b <= len(thresholds):
        raise DegenerateSplit(f"bin {b} is not a boundary of {len(thresholds) + 1} bins")
    return float(thresholds[b - 1])


def split_instance_space(space: InstanceSpace, column: np.ndarray, threshold: float) -> tuple[InstanceSpace, InstanceSpace]:
    left = np.asarray(column)[space.indices] < threshold
    n_l = int(left.sum())
    if n_l == 0 or n_l == space.count:
        raise DegenerateSplit(f"threshold {threshold!r} puts all {space.count} samples on one side")
    return space.take(left), space.take(~left)


def leaf_value(labels: np.ndarray) -> float:
    labels = np.asarray(labels, dtype=np.float64)
    if labels.size == 0:
        raise ValueError("leaf with no samples")
    return float(labels.mean())


def is_pure(labels: np.ndarray) -> bool:
    return bool(labels.size == 0 or np.all(labels == labels[0]))


def local_statistics(
    party: int,
    matrix: np.ndarray,
    space: InstanceSpace,
    labels_fp: np.ndarray,
    n_bins: int,
) -> tuple[BinStatistics, list[np.ndarray]]:
    """Plaintext bin statistics for every column of ``matrix`` over ``space``."""
    from .binning import nearest_rank_thresholds

    sub = matrix[space.indices]
    lab = labels_fp[space.indices]
    if lab.dtype != object and lab.size and int(np.abs(lab).max()) * lab.size >= 1 << 62:
        lab = lab.astype(object)
    order = np.argsort(sub, axis=0, kind="stable")
    st = BinStatistics(party)
    thresholds = []
    for k in range(sub.shape[1]):
        sorted_col = sub[order[:, k], k]
        thr = nearest_rank_thresholds(sorted_col, n_bins)
        thresholds.append(thr)
        # every bin holds at least its own lower threshold, so none is empty
        starts = np.searchsorted(sorted_col, thr, side="left")
        edges = np.concatenate(([0], starts))
        counts = np.diff(np.append(edges, sorted_col.size)).astype(np.int64)
        sums = np.add.reduceat(lab[order[:, k]], edges)
        st.features.append(FeatureBins(k, counts, sums))
    return st, thresholds
