from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass
class PartyDataset:
    party: int
    features: np.ndarray
    columns: np.ndarray  # original column of each local feature
    ids: list[str]

    @property
    def feature_names(self) -> list[str]:
        return [f"f{c + 1}" for c in self.columns]

    @property
    def is_active(self) -> bool:
        return self.party == 0


def partition_columns(d: int, m: int, seed: int) -> list[np.ndarray]:
    """Seeded random disjoint split of ``d`` columns into ``m`` non-empty groups."""
    if m < 2:
        raise ValueError("a federation needs at least two parties")
    if d < m:
        raise ValueError(f"{d} columns cannot be shared by {m} parties")
    perm = np.random.default_rng(seed).permutation(d)
    return [np.sort(c) for c in np.array_split(perm, m)]


def vertical_partition(x: np.ndarray, m: int, seed: int, ids: list[str] | None = None) -> list[PartyDataset]:
    """Party 0 is the active party and keeps the labels (held by the caller)."""
    x = np.asarray(x)
    ids = [str(i) for i in range(x.shape[0])] if ids is None else list(ids)
    return [PartyDataset(p, x[:, cols], cols, ids) for p, cols in enumerate(partition_columns(x.shape[1], m, seed))]


def reassemble(parts: list[PartyDataset]) -> np.ndarray:
    d = sum(p.columns.size for p in parts)
    out = np.zeros((parts[0].features.shape[0], d))
    for p in parts:
        out[:, p.columns] = p.features
    return out


def id_digest(ids: list[str]) -> str:
    h = hashlib.sha256()
    for i in ids:
        h.update(i.encode("utf-8") + b"\n")
    return h.hexdigest()
