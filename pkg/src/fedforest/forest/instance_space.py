from __future__ import annotations

import numpy as np


class InstanceSpace:
    """A subset of the aligned sample indices ``0 .. universe-1``.

    Stored as a sorted, duplicate-free int64 index array; :attr:`bits`
    gives the equivalent bitmap.
    """

    __slots__ = ("indices", "universe")

    def __init__(self, indices, universe: int, *, _trusted: bool = False) -> None:
        idx = np.asarray(indices, dtype=np.int64)
        if not _trusted:
            idx = np.unique(idx)
            if idx.size and (idx[0] < 0 or idx[-1] >= universe):
                raise ValueError(f"indices must lie in [0, {universe})")
        idx.setflags(write=False)
        self.indices = idx
        self.universe = int(universe)

    @classmethod
    def full(cls, universe: int) -> "InstanceSpace":
        return cls(np.arange(universe, dtype=np.int64), universe, _trusted=True)

    @classmethod
    def empty(cls, universe: int) -> "InstanceSpace":
        return cls(np.empty(0, dtype=np.int64), universe, _trusted=True)

    @classmethod
    def from_bits(cls, bits) -> "InstanceSpace":
        bits = np.asarray(bits, dtype=bool)
        return cls(np.flatnonzero(bits).astype(np.int64), bits.size, _trusted=True)

    @property
    def bits(self) -> np.ndarray:
        mask = np.zeros(self.universe, dtype=bool)
        mask[self.indices] = True
        return mask

    @property
    def count(self) -> int:
        return int(self.indices.size)

    @property
    def density(self) -> float:
        return self.count / self.universe if self.universe else 0.0

    def __len__(self) -> int:
        return self.count

    def __contains__(self, i: int) -> bool:
        pos = np.searchsorted(self.indices, i)
        return bool(pos < self.indices.size and self.indices[pos] == i)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InstanceSpace):
            return NotImplemented
        return self.universe == other.universe and np.array_equal(self.indices, other.indices)

    def __hash__(self) -> int:
        return hash((self.universe, self.indices.tobytes()))

    def __repr__(self) -> str:
        return f"InstanceSpace(count={self.count}, universe={self.universe})"

    def _check(self, other: "InstanceSpace") -> None:
        if other.universe != self.universe:
            raise ValueError("instance spaces over different universes")

    def issubset(self, other: "InstanceSpace") -> bool:
        self._check(other)
        return bool(np.isin(self.indices, other.indices, assume_unique=True).all())

    def union(self, other: "InstanceSpace") -> "InstanceSpace":
        self._check(other)
        return InstanceSpace(np.union1d(self.indices, other.indices), self.universe, _trusted=True)

    def intersection(self, other: "InstanceSpace") -> "InstanceSpace":
        self._check(other)
        return InstanceSpace(np.intersect1d(self.indices, other.indices, assume_unique=True), self.universe, _trusted=True)

    def difference(self, other: "InstanceSpace") -> "InstanceSpace":
        self._check(other)
        return InstanceSpace(np.setdiff1d(self.indices, other.indices, assume_unique=True), self.universe, _trusted=True)

    def take(self, mask: np.ndarray) -> "InstanceSpace":
        """Sub-space selected by a boolean mask aligned with :attr:`indices`."""
        return InstanceSpace(self.indices[mask], self.universe, _trusted=True)
