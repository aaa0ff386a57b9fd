import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedforest.psi import (
    GROUP_PRIME,
    EmptyIntersection,
    IdSet,
    align,
    blind,
    double_blind,
    hash_to_group,
    random_secret,
)

RNG = random.Random(1234)
K1, K2 = random_secret(RNG), random_secret(RNG)


def test_group_constant():
    assert GROUP_PRIME.bit_length() == 2048
    assert pow(2, GROUP_PRIME - 1, GROUP_PRIME) == 1
    assert pow(2, (GROUP_PRIME - 1) // 2 - 1, (GROUP_PRIME - 1) // 2) == 1  # safe prime


def test_hash_lands_in_quadratic_residues():
    for x in ["", "a", "user-17"]:
        h = hash_to_group(x)
        assert 1 <= h < GROUP_PRIME
        assert pow(h, (GROUP_PRIME - 1) // 2, GROUP_PRIME) == 1


def test_blind_basics():
    assert blind([], K1) == []
    assert blind(["x", "y"], K1) == blind(["x", "y"], K1)
    assert blind(["x"], K1) != blind(["y"], K1)
    assert double_blind(blind(["x"], K1), 1) == blind(["x"], K1)
    with pytest.raises(ValueError):
        blind(["x"], GROUP_PRIME)


@settings(max_examples=10, deadline=None)
@given(st.text(max_size=20))
def test_blinding_commutes(x):
    assert double_blind(blind([x], K1), K2) == double_blind(blind([x], K2), K1)


def test_common_ids_match_and_disjoint_sets_do_not():
    a = double_blind(blind(["p", "q", "r"], K1), K2)
    b = double_blind(blind(["q", "r", "s"], K2), K1)
    assert set(a) & set(b) == {a[1], a[2]}
    c = double_blind(blind(["t", "u"], K2), K1)
    assert not set(a) & set(c)


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        IdSet(("a", "a"), 0)


def test_align_examples():
    rows = align([["a", "b", "c"], ["b", "c", "d"]], random.Random(0))
    assert sorted(rows[0].tolist()) == [1, 2]
    assert [["a", "b", "c"][i] for i in rows[0]] == [["b", "c", "d"][i] for i in rows[1]]
    rows = align([["a", "b"], ["b", "c"], ["b", "d"]], random.Random(0))
    assert [r.tolist() for r in rows] == [[1], [0], [0]]
    ids = [f"id{i}" for i in range(30)]
    assert all(r.size == 30 for r in align([ids, ids[::-1]], random.Random(0)))


def test_align_errors():
    with pytest.raises(EmptyIntersection):
        align([["a"], ["b"]], random.Random(0))
    with pytest.raises(ValueError):
        align([["a"]])


def test_align_matches_plaintext_intersection():
    rng = random.Random(99)
    universe = [f"u{i}" for i in range(25)]
    for _ in range(100):
        sets = [rng.sample(universe, rng.randint(8, 20)) for _ in range(3)]
        common = set(sets[0]) & set(sets[1]) & set(sets[2])
        if not common:
            with pytest.raises(EmptyIntersection):
                align(sets, rng)
            continue
        rows = align(sets, rng)
        aligned = [[s[i] for i in r] for s, r in zip(sets, rows)]
        assert aligned[0] == aligned[1] == aligned[2]
        assert set(aligned[0]) == common and len(aligned[0]) == len(common)


def test_order_is_shared_and_independent_of_input_order():
    ids = [f"id{i}" for i in range(40)]
    shuffled = ids[:]
    random.Random(3).shuffle(shuffled)
    r1 = align([ids, shuffled], random.Random(5))
    r2 = align([shuffled, ids], random.Random(5))
    assert [ids[i] for i in r1[0]] == [ids[i] for i in r2[1]]
    assert np.array_equal(np.sort(r1[0]), np.arange(40))
