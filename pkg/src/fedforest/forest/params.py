from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TASKS = ("regression", "binary")
MAX_DEPTH_LIMIT = 60  # heap node ids must fit in a u64


@dataclass(frozen=True)
class TerminationCriteria:
    max_depth: int = 10
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    min_gain: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.max_depth <= MAX_DEPTH_LIMIT:
            raise ValueError(f"max_depth must be in [0, {MAX_DEPTH_LIMIT}]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2 * self.min_samples_leaf:
            raise ValueError("min_samples_split must be >= 2 * min_samples_leaf")
        if self.min_gain < 0:
            raise ValueError("min_gain must be >= 0")


@dataclass(frozen=True)
class TrainParams:
    n_trees: int = 50
    termination: TerminationCriteria = field(default_factory=TerminationCriteria)
    n_bins: int = 100
    row_sample_rate: float = 0.8
    task: str = "binary"
    shuffle: bool = True
    active_only_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        if not 0 < self.row_sample_rate <= 1:
            raise ValueError("row_sample_rate must be in (0, 1]")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if not 0 <= self.active_only_fraction <= 1:
            raise ValueError("active_only_fraction must be in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


def tree_rng(seed: int, tree_id: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tree_id, stream]))


def sample_rows(n: int, params: TrainParams, tree_id: int):
    """Rows drawn without replacement for one tree, sorted."""
    from .instance_space import InstanceSpace

    if params.row_sample_rate >= 1:
        return InstanceSpace.full(n)
    k = max(1, int(round(params.row_sample_rate * n)))
    idx = tree_rng(params.seed, tree_id).choice(n, size=k, replace=False)
    return InstanceSpace(np.sort(idx), n, _trusted=True)


def is_active_only(params: TrainParams, tree_id: int) -> bool:
    if params.active_only_fraction <= 0:
        return False
    return bool(tree_rng(params.seed, tree_id, 1).random() < params.active_only_fraction)
