"""Randomized Iterative Affine Cipher (RIAC).

A symmetric, additively homomorphic cipher.  The base layer turns an integer
``m`` into the pair ``(y*s mod n0, (m + y*h) mod n0)`` with ``h = s*r`` and a
fresh random ``y``; the second component is then pushed through ``l``
affine rounds ``c <- a_i * c mod n_i`` over a strictly growing moduli chain.

Each modulus is at least ``2**(headroom_bits + 1)`` times the previous one.
That gap is what keeps homomorphic sums exact: a sum of ``N <= 2**headroom``
round-``i`` values stays below ``n_{i+1} / 2``, so undoing round ``i+1`` and
reading the residue in centred form recovers the integer sum without wrap.
The same argument covers negative scalar multiples, which is why decryption
lifts every intermediate residue to its centred representative.

Only the active party ever holds a :class:`RiacKey`.  Passive parties get a
:class:`RiacContext` (the outermost moduli and the headroom) so they can add
ciphertexts and reduce them, nothing more.
"""

from __future__ import annotations

import hashlib
import random
import secrets
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..wire import Reader, WireError, Writer
from .bigmath import invmod, random_prime, random_prime_in

CIPHERTEXT_WIRE_VERSION = 1
KEY_MAGIC = b"RIAK"
KEY_VERSION = 1

DEFAULT_ROUNDS = 2
DEFAULT_MODULUS_BITS = 1024
DEFAULT_HEADROOM_BITS = 40


class HeadroomExhausted(OverflowError):
    """A homomorphic operation would exceed the exact-addition budget."""


class PlaintextOutOfRange(ValueError):
    pass


class KeyMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RiacContext:
    """What a ciphertext holder needs to operate on ciphertexts."""

    n0: int
    nl: int
    headroom_bits: int

    @property
    def max_addends(self) -> int:
        return 1 << self.headroom_bits

    @property
    def fingerprint(self) -> bytes:
        return hashlib.sha256(Writer().bigint(self.n0).bigint(self.nl).u32(self.headroom_bits).getvalue()).digest()[:8]

    def to_bytes(self) -> bytes:
        return Writer().bigint(self.n0).bigint(self.nl).u32(self.headroom_bits).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "RiacContext":
        return cls(r.bigint(), r.bigint(), r.u32())


@dataclass(frozen=True)
class RiacKey:
    n: tuple[int, ...]
    a: tuple[int, ...]
    a_inv: tuple[int, ...]
    r: int
    s: int
    h: int
    headroom_bits: int
    context: RiacContext = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.n) < 2 or len(self.a) != len(self.n) - 1 or len(self.a_inv) != len(self.a):
            raise ValueError("key needs n_0..n_l and l multipliers with inverses")
        object.__setattr__(self, "context", RiacContext(self.n[0], self.n[-1], self.headroom_bits))

    @property
    def rounds(self) -> int:
        return len(self.a)

    @property
    def plaintext_bound(self) -> int:
        return self.n[0] >> (self.headroom_bits + 1)

    def validate(self) -> None:
        """Check every structural invariant; raises ``ValueError``."""
        n0 = self.n[0]
        for i, (ai, ainv) in enumerate(zip(self.a, self.a_inv), start=1):
            if (ai * ainv) % self.n[i] != 1:
                raise ValueError(f"a_{i} * a_inv_{i} != 1 mod n_{i}")
        for lo, hi in zip(self.n, self.n[1:]):
            if hi < (lo << self.headroom_bits):
                raise ValueError("moduli gap smaller than 2**headroom_bits")
        if not (1 <= self.r < n0 and 1 <= self.s < n0):
            raise ValueError("r and s must lie in [1, n0)")
        if self.h != (self.s * self.r) % n0:
            raise ValueError("h != s*r mod n0")

    def to_bytes(self) -> bytes:
        w = Writer().raw(KEY_MAGIC).u8(KEY_VERSION).u32(self.headroom_bits).u32(self.rounds)
        for v in self.n:
            w.bigint(v)
        for v in self.a:
            w.bigint(v)
        for v in self.a_inv:
            w.bigint(v)
        w.bigint(self.r).bigint(self.s).bigint(self.h)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RiacKey":
        rd = Reader(data)
        if rd.raw(4) != KEY_MAGIC:
            raise WireError("not a RIAC key file")
        if (v := rd.u8()) != KEY_VERSION:
            raise WireError(f"unsupported key version {v}")
        headroom = rd.u32()
        rounds = rd.u32()
        n = tuple(rd.bigint() for _ in range(rounds + 1))
        a = tuple(rd.bigint() for _ in range(rounds))
        a_inv = tuple(rd.bigint() for _ in range(rounds))
        r, s, h = rd.bigint(), rd.bigint(), rd.bigint()
        rd.expect_end()
        key = cls(n, a, a_inv, r, s, h, headroom)
        key.validate()
        return key


@dataclass(frozen=True, slots=True)
class Ciphertext:
    c1: int
    c2: int
    addend_count: int
    context: RiacContext

    def __add__(self, other: "Ciphertext") -> "Ciphertext":
        return ct_add(self, other)

    def __mul__(self, k: int) -> "Ciphertext":
        return ct_scalar_mul(self, k)

    __rmul__ = __mul__

    def to_bytes(self) -> bytes:
        return write_ciphertext(Writer(), self).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes, context: RiacContext) -> "Ciphertext":
        rd = Reader(data)
        ct = read_ciphertext(rd, context)
        rd.expect_end()
        return ct


def generate_key(
    rounds: int = DEFAULT_ROUNDS,
    base_modulus_bits: int = DEFAULT_MODULUS_BITS,
    headroom_bits: int = DEFAULT_HEADROOM_BITS,
    seed: int | None = None,
) -> RiacKey:
    """Create a key; identical ``seed`` gives an identical key.

    ``seed=None`` draws from the OS entropy pool.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if base_modulus_bits < 256:
        raise ValueError("base_modulus_bits must be >= 256")
    if headroom_bits < 1:
        raise ValueError("headroom_bits must be >= 1")
    rng: random.Random = random.SystemRandom() if seed is None else random.Random(seed)

    n = [random_prime(base_modulus_bits, rng)]
    for _ in range(rounds):
        lo = n[-1] << (headroom_bits + 1)
        n.append(random_prime_in(lo, lo << 1, rng))
    a, a_inv = [], []
    for ni in n[1:]:
        ai = 2 + rng.randrange(ni - 3)  # prime modulus: any non-zero residue is a unit
        a.append(ai)
        a_inv.append(invmod(ai, ni))
    n0 = n[0]
    r = 1 + rng.randrange(n0 - 1)
    s = 1 + rng.randrange(n0 - 1)
    key = RiacKey(tuple(n), tuple(a), tuple(a_inv), r, s, (s * r) % n0, headroom_bits)
    key.validate()
    return key


def encrypt(key: RiacKey, m: int, rng: random.Random | None = None) -> Ciphertext:
    if abs(m) > key.plaintext_bound:
        raise PlaintextOutOfRange(f"|m| must be <= n0 / 2**{key.headroom_bits + 1}")
    n0 = key.n[0]
    y = 1 + (rng.randrange(n0 - 1) if rng is not None else secrets.randbelow(n0 - 1))
    c1 = (y * key.s) % n0
    c2 = (m + y * key.h) % n0
    for ai, ni in zip(key.a, key.n[1:]):
        c2 = (ai * c2) % ni
    return Ciphertext(c1, c2, 1, key.context)


def encrypt_many(key: RiacKey, ms: Iterable[int], rng: random.Random | None = None) -> list[Ciphertext]:
    return [encrypt(key, int(m), rng) for m in ms]


def _centred(v: int, modulus: int) -> int:
    return v - modulus if v > modulus >> 1 else v


def decrypt_raw(key: RiacKey, c1: int, c2: int) -> int:
    """Decrypt a bare component pair (already reduced or not)."""
    x = c2
    for ai_inv, ni in zip(reversed(key.a_inv), reversed(key.n[1:])):
        x = _centred((ai_inv * x) % ni, ni)
    n0 = key.n[0]
    return _centred((x - key.r * c1) % n0, n0)


def decrypt(key: RiacKey, c: Ciphertext) -> int:
    if c.context != key.context:
        raise KeyMismatch("ciphertext was not produced under this key")
    return decrypt_raw(key, c.c1, c.c2)


def _check_budget(count: int, ctx: RiacContext) -> None:
    if count > ctx.max_addends:
        raise HeadroomExhausted(f"{count} addends exceeds the 2**{ctx.headroom_bits} exact-addition budget")


def ct_add(x: Ciphertext, y: Ciphertext) -> Ciphertext:
    if x.context != y.context:
        raise KeyMismatch("cannot add ciphertexts from different keys")
    ctx = x.context
    count = x.addend_count + y.addend_count
    _check_budget(count, ctx)
    return Ciphertext((x.c1 + y.c1) % ctx.n0, (x.c2 + y.c2) % ctx.nl, count, ctx)


def ct_scalar_mul(x: Ciphertext, k: int) -> Ciphertext:
    ctx = x.context
    count = abs(k) * x.addend_count
    _check_budget(count, ctx)
    return Ciphertext((x.c1 * k) % ctx.n0, (x.c2 * k) % ctx.nl, max(count, 1), ctx)


def ct_sum(cts: Sequence[Ciphertext]) -> Ciphertext:
    """Fold of :func:`ct_add` with a single final reduction."""
    if not cts:
        raise ValueError("cannot sum an empty ciphertext list")
    ctx = cts[0].context
    if any(c.context != ctx for c in cts):
        raise KeyMismatch("cannot add ciphertexts from different keys")
    count = sum(c.addend_count for c in cts)
    _check_budget(count, ctx)
    return Ciphertext(sum(c.c1 for c in cts) % ctx.n0, sum(c.c2 for c in cts) % ctx.nl, count, ctx)


def write_ciphertext(w: Writer, c: Ciphertext) -> Writer:
    return w.u8(CIPHERTEXT_WIRE_VERSION).bigint(c.c1).bigint(c.c2).u64(c.addend_count)


def read_ciphertext(rd: Reader, context: RiacContext) -> Ciphertext:
    if (v := rd.u8()) != CIPHERTEXT_WIRE_VERSION:
        raise WireError(f"unsupported ciphertext wire version {v}")
    c1, c2, count = rd.bigint(), rd.bigint(), rd.u64()
    if not (0 <= c1 < context.n0 and 0 <= c2 < context.nl) or count < 1:
        raise WireError("ciphertext components out of range for this key")
    return Ciphertext(c1, c2, count, context)
