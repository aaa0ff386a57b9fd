"""Percentile binning.

Thresholds are nearest-rank percentiles of the node's values.  A value ``x``
falls into bin ``searchsorted(thresholds, x, side="right")``, so bin ``b``
holds ``thresholds[b-1] <= x < thresholds[b]`` and splitting at bin ``b``
sends ``x < thresholds[b-1]`` left.
"""

from __future__ import annotations

import numpy as np

from .instance_space import InstanceSpace


def compute_percentiles(column: np.ndarray, space: InstanceSpace | None, n_bins: int) -> np.ndarray:
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    values = np.asarray(column, dtype=np.float64)
    if space is not None:
        values = values[space.indices]
    if values.size == 0:
        raise ValueError("cannot bin an empty instance space")
    return nearest_rank_thresholds(np.sort(values), n_bins)


def nearest_rank_thresholds(sorted_values: np.ndarray, n_bins: int) -> np.ndarray:
    n = sorted_values.size
    p = np.arange(1, n_bins, dtype=np.int64)
    ranks = -(-p * n // n_bins)  # ceil(p*n/P)
    thr = np.unique(sorted_values[ranks - 1])
    # a threshold at the minimum would leave the first bin empty
    return thr[thr > sorted_values[0]]


def bin_index(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    return np.searchsorted(thresholds, values, side="right")


def bin_label_sums(column, space: InstanceSpace | None, labels, thresholds) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin label sums and counts over ``space``.

    ``labels`` are aligned with the column (one per aligned sample).  Integer
    labels are summed exactly; object arrays of Python ints stay exact too.
    """
    col = np.asarray(column, dtype=np.float64)
    lab = np.asarray(labels)
    if space is not None:
        col, lab = col[space.indices], lab[space.indices]
    nb = len(thresholds) + 1
    bins = bin_index(col, thresholds)
    counts = np.bincount(bins, minlength=nb).astype(np.int64)
    if lab.dtype == object:
        sums = np.zeros(nb, dtype=object)
        np.add.at(sums, bins, lab)
    elif np.issubdtype(lab.dtype, np.integer):
        sums = np.zeros(nb, dtype=np.int64)
        np.add.at(sums, bins, lab.astype(np.int64))
    else:
        sums = np.bincount(bins, weights=lab, minlength=nb)
    return sums, counts
