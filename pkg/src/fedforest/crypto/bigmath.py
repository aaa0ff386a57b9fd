"""Modular arithmetic on arbitrary-precision integers.

Python ints carry the arithmetic; gmpy2 (GMP bindings) is used for modular
exponentiation and primality, which dominate cipher and PSI cost.
"""

from __future__ import annotations

import random

import gmpy2


class NotInvertibleError(ArithmeticError):
    pass


def _check_modulus(modulus: int) -> None:
    if modulus <= 1:
        raise ValueError(f"modulus must be > 1, got {modulus}")


def mulmod(a: int, b: int, modulus: int) -> int:
    _check_modulus(modulus)
    return (a * b) % modulus


def powmod(base: int, exp: int, modulus: int) -> int:
    _check_modulus(modulus)
    if exp < 0:
        return int(gmpy2.powmod(invmod(base, modulus), -exp, modulus))
    return int(gmpy2.powmod(base, exp, modulus))


def invmod(a: int, modulus: int) -> int:
    _check_modulus(modulus)
    try:
        return pow(a, -1, modulus)
    except ValueError:
        raise NotInvertibleError(f"{a} has no inverse modulo {modulus}") from None


_OPS = {"mulmod": mulmod, "powmod": powmod, "invmod": invmod}


def mod_arith(op: str, *operands: int, modulus: int) -> int:
    """Dispatch ``mulmod(a, b)``, ``powmod(base, exp)`` or ``invmod(a)``.

    The result is always the canonical residue in ``[0, modulus)``.
    """
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown modular op {op!r}; expected one of {sorted(_OPS)}") from None
    return fn(*operands, modulus)


def random_prime(bits: int, rng: random.Random) -> int:
    """Prime with exactly ``bits`` bits, deterministic for a seeded ``rng``."""
    if bits < 2:
        raise ValueError("need at least 2 bits for a prime")
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if gmpy2.is_prime(cand, 40):
            return cand


def random_prime_in(lo: int, hi: int, rng: random.Random) -> int:
    """Prime p with lo <= p < hi."""
    if hi - lo < 2:
        raise ValueError("empty prime range")
    while True:
        cand = lo + rng.randrange(hi - lo)
        p = int(gmpy2.next_prime(cand - 1)) if cand > 2 else 2
        if lo <= p < hi:
            return p
