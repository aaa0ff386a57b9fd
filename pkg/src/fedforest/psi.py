"""Diffie-Hellman private set intersection, star topology.

Ids are hashed into the quadratic residues of the 2048-bit MODP group and
exponentiated by each party's secret.  Because exponentiation commutes,
``H(x)^(a*b)`` is the same whichever party blinds first, so double-blinded
values can be compared without either side seeing the other's raw ids.

The active party (index 0) is the hub.  With every passive party ``i`` it
swaps singly-blinded lists and returns them raised to its own secret, giving
each side the double-blinded values of both sets.  Rows present in every
pairwise intersection form the aligned space, ordered by the double-blinded
value shared with the lowest-numbered passive party.
"""

from __future__ import annotations

import hashlib
import random
import secrets as _secrets
from dataclasses import dataclass
from typing import Sequence

import gmpy2
import numpy as np

# RFC 3526 group 14
GROUP_PRIME = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
SECRET_BITS = 256
_P = gmpy2.mpz(GROUP_PRIME)


class EmptyIntersection(ValueError):
    """The parties share no ids, so there is nothing to train on."""


@dataclass(frozen=True)
class IdSet:
    ids: tuple[str, ...]
    party: int

    def __post_init__(self) -> None:
        if len(set(self.ids)) != len(self.ids):
            raise ValueError(f"party {self.party} has duplicate ids")


def hash_to_group(id_: str) -> int:
    digest = hashlib.shake_256(id_.encode("utf-8")).digest(GROUP_PRIME.bit_length() // 8 + 16)
    h = int.from_bytes(digest, "big") % GROUP_PRIME
    return int(gmpy2.powmod(h, 2, _P)) or 1


def random_secret(rng: random.Random | None = None) -> int:
    """Uniform exponent in [2, p-2]; seeded when ``rng`` is given."""
    bits = rng.getrandbits(SECRET_BITS) if rng is not None else _secrets.randbits(SECRET_BITS)
    return 2 + bits % (GROUP_PRIME - 3)


def _check_secret(secret: int) -> None:
    if not 2 <= secret <= GROUP_PRIME - 2:
        if secret != 1:  # 1 is allowed as the identity for tests
            raise ValueError("secret must lie in [2, p-2]")


def blind(ids: Sequence[str] | IdSet, secret: int) -> list[int]:
    _check_secret(secret)
    if isinstance(ids, IdSet):
        ids = ids.ids
    k = gmpy2.mpz(secret)
    return [int(gmpy2.powmod(hash_to_group(i), k, _P)) for i in ids]


def double_blind(blinded: Sequence[int], secret: int) -> list[int]:
    _check_secret(secret)
    k = gmpy2.mpz(secret)
    out = []
    for v in blinded:
        if not 1 <= v < GROUP_PRIME:
            raise ValueError("blinded value outside the group")
        out.append(int(gmpy2.powmod(v, k, _P)))
    return out


class PsiActive:
    """Hub side.  Holds its own ids and secret."""

    def __init__(self, ids: Sequence[str], secret: int | None = None) -> None:
        self.ids = IdSet(tuple(ids), 0)
        self.secret = secret if secret is not None else random_secret()
        self._own: list[int] | None = None
        self._theirs: dict[int, list[int]] = {}  # peer ids, double-blinded
        self._ours: dict[int, list[int]] = {}  # our ids, double-blinded by peer

    def own_blinded(self) -> list[int]:
        if self._own is None:
            self._own = blind(self.ids, self.secret)
        return self._own

    def answer(self, party: int, peer_blinded: Sequence[int]) -> list[int]:
        """Raise the peer's singly-blinded ids to our secret (returned in its order)."""
        self._theirs[party] = double_blind(peer_blinded, self.secret)
        return self._theirs[party]

    def peer_double(self, party: int) -> list[int]:
        """The peer's ids double-blinded, in the peer's order."""
        return self._theirs[party]

    def receive(self, party: int, own_double: Sequence[int]) -> None:
        """Our own ids, double-blinded by ``party``, in our row order."""
        if len(own_double) != len(self.ids.ids):
            raise ValueError("peer returned a list of the wrong length")
        self._ours[party] = list(own_double)

    def intersect(self) -> tuple[np.ndarray, dict[int, list[int]]]:
        """Aligned local rows plus, per passive party, the ordered values it needs."""
        if not self._ours or self._ours.keys() != self._theirs.keys():
            raise ValueError("PSI needs both exchanges with at least one passive party")
        keep = np.ones(len(self.ids.ids), dtype=bool)
        for party, e in self._ours.items():
            peer = set(self._theirs[party])
            keep &= np.fromiter((v in peer for v in e), dtype=bool, count=len(e))
        rows = np.flatnonzero(keep)
        if rows.size == 0:
            raise EmptyIntersection("the parties share no ids")
        key = self._ours[min(self._ours)]
        rows = np.array(sorted(rows.tolist(), key=lambda r: key[r]), dtype=np.int64)
        return rows, {p: [e[r] for r in rows] for p, e in self._ours.items()}


class PsiPassive:
    def __init__(self, ids: Sequence[str], party: int, secret: int | None = None) -> None:
        self.ids = IdSet(tuple(ids), party)
        self.secret = secret if secret is not None else random_secret()
        self._double: dict[int, int] | None = None

    def blinded(self) -> list[int]:
        return blind(self.ids, self.secret)

    def answer(self, active_blinded: Sequence[int]) -> list[int]:
        return double_blind(active_blinded, self.secret)

    def receive(self, own_double: Sequence[int]) -> None:
        """Our ids double-blinded by the hub, in our row order."""
        if len(own_double) != len(self.ids.ids):
            raise ValueError("hub returned a list of the wrong length")
        self._double = {v: r for r, v in enumerate(own_double)}

    def rows_for(self, ordered: Sequence[int]) -> np.ndarray:
        """Local rows for the hub's ordered intersection values."""
        if self._double is None:
            raise RuntimeError("receive() must come first")
        try:
            return np.array([self._double[v] for v in ordered], dtype=np.int64)
        except KeyError:
            raise ValueError("hub sent a value outside our set") from None


def align(parties: Sequence[Sequence[str] | IdSet], rng: random.Random | None = None) -> list[np.ndarray]:
    """Run the whole exchange in-process; returns each party's local rows in
    aligned order (entry ``j`` is the row holding aligned sample ``j``)."""
    if len(parties) < 2:
        raise ValueError("alignment needs at least two parties")
    ids = [p.ids if isinstance(p, IdSet) else tuple(p) for p in parties]
    hub = PsiActive(ids[0], random_secret(rng))
    spokes = [PsiPassive(ids[i], i, random_secret(rng)) for i in range(1, len(ids))]
    mine = hub.own_blinded()
    for s in spokes:
        s.receive(hub.answer(s.ids.party, s.blinded()))
        hub.receive(s.ids.party, s.answer(mine))
    rows, ordered = hub.intersect()
    return [rows] + [s.rows_for(ordered[s.ids.party]) for s in spokes]
