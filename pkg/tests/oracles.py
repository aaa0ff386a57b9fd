"""Independent reference implementations used only by the tests.

Nothing here touches the package under test.
"""

from __future__ import annotations

import math
from itertools import combinations

BASE_BITS = 16
BASE = 1 << BASE_BITS


# --- schoolbook multi-precision arithmetic on little-endian 16-bit limbs ---

def to_limbs(x: int) -> list[int]:
    if x < 0:
        raise ValueError("non-negative only")
    limbs = []
    digits = str(x)  # go through decimal text so we never reuse int internals
    value = [0]
    for ch in digits:
        value = limb_add(limb_mul_small(value, 10), [int(ch)])
    limbs = value
    return normalize(limbs)


def from_limbs(limbs: list[int]) -> int:
    out = 0
    for limb in reversed(limbs):
        out = out * BASE + limb
    return out


def normalize(a: list[int]) -> list[int]:
    a = list(a)
    while len(a) > 1 and a[-1] == 0:
        a.pop()
    return a or [0]


def limb_add(a: list[int], b: list[int]) -> list[int]:
    out, carry = [], 0
    for i in range(max(len(a), len(b))):
        s = (a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) + carry
        out.append(s % BASE)
        carry = s // BASE
    if carry:
        out.append(carry)
    return normalize(out)


def limb_mul_small(a: list[int], k: int) -> list[int]:
    out, carry = [], 0
    for limb in a:
        p = limb * k + carry
        out.append(p % BASE)
        carry = p // BASE
    while carry:
        out.append(carry % BASE)
        carry //= BASE
    return normalize(out)


def limb_mul(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) + 1)
    for i, x in enumerate(a):
        carry = 0
        for j, y in enumerate(b):
            t = out[i + j] + x * y + carry
            out[i + j] = t % BASE
            carry = t // BASE
        k = i + len(b)
        while carry:
            t = out[k] + carry
            out[k] = t % BASE
            carry = t // BASE
            k += 1
    return normalize(out)


def limb_cmp(a: list[int], b: list[int]) -> int:
    a, b = normalize(a), normalize(b)
    if len(a) != len(b):
        return -1 if len(a) < len(b) else 1
    for x, y in zip(reversed(a), reversed(b)):
        if x != y:
            return -1 if x < y else 1
    return 0


def limb_sub(a: list[int], b: list[int]) -> list[int]:
    out, borrow = [], 0
    for i in range(len(a)):
        d = a[i] - (b[i] if i < len(b) else 0) - borrow
        borrow = 1 if d < 0 else 0
        out.append(d + BASE if d < 0 else d)
    return normalize(out)


def limb_bits(a: list[int]) -> list[int]:
    bits = []
    for limb in a:
        bits.extend((limb >> k) & 1 for k in range(BASE_BITS))
    return bits


def limb_mod(a: list[int], m: list[int]) -> list[int]:
    """Binary long division remainder."""
    rem = [0]
    for bit in reversed(limb_bits(a)):
        rem = limb_add(limb_mul_small(rem, 2), [bit])
        if limb_cmp(rem, m) >= 0:
            rem = limb_sub(rem, m)
    return rem


def naive_mulmod(a: int, b: int, m: int) -> int:
    return from_limbs(limb_mod(limb_mul(to_limbs(a), to_limbs(b)), to_limbs(m)))


def naive_powmod(base: int, exp: int, m: int) -> int:
    lm = to_limbs(m)
    result = limb_mod([1], lm)
    b = limb_mod(to_limbs(base), lm)
    for _ in range(exp):  # repeated multiplication, no square-and-multiply
        result = limb_mod(limb_mul(result, b), lm)
    return from_limbs(result)


# --- statistics oracles -----------------------------------------------------

def population_variance(ys) -> float:
    ys = list(ys)
    mu = sum(ys) / len(ys)
    return sum((y - mu) ** 2 for y in ys) / len(ys)


def variance_reduction(left, right) -> float:
    both = list(left) + list(right)
    n = len(both)
    return (
        population_variance(both)
        - len(left) / n * population_variance(left)
        - len(right) / n * population_variance(right)
    )


def binary_entropy(p: float) -> float:
    out = 0.0
    for q in (p, 1.0 - p):
        if q > 0:
            out -= q * math.log(q)
    return out


def entropy_reduction(left, right) -> float:
    both = list(left) + list(right)
    n = len(both)
    return (
        binary_entropy(sum(both) / n)
        - len(left) / n * binary_entropy(sum(left) / len(left))
        - len(right) / n * binary_entropy(sum(right) / len(right))
    )


def nearest_rank_thresholds(values, P):
    """Interior p/P nearest-rank quantiles, distinct, strictly above the minimum."""
    s = sorted(values)
    n = len(s)
    out = []
    for p in range(1, P):
        rank = math.ceil(p * n / P)
        v = s[max(rank, 1) - 1]
        if v > s[0] and v not in out:
            out.append(v)
    return sorted(out)


def pairwise_auc(labels, scores) -> float:
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def all_pairs(xs):
    return list(combinations(xs, 2))
