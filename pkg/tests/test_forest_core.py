import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedforest.forest import (
    DecisionTree,
    DegenerateSplit,
    ForestModel,
    InstanceSpace,
    Leaf,
    LocalSplit,
    RemoteSplit,
    TerminationCriteria,
    TrainParams,
    aggregate,
    bin_label_sums,
    choose_best_split,
    compute_percentiles,
    cross_entropy_gain,
    leaf_value,
    predict_batch,
    predict_tree,
    reference_train_centralized,
    sample_rows,
    split_instance_space,
    variance_gain,
)
from fedforest.forest.binning import bin_index
from fedforest.forest.split import local_statistics
from fedforest.forest.tree import local_resolver, swap_subtrees, trees_equivalent
from fedforest.wire import WireError

from .oracles import entropy_reduction, nearest_rank_thresholds, variance_reduction

SCALE = 1 << 24
TERM = TerminationCriteria()


# percentiles

def test_constant_column_has_no_thresholds():
    assert compute_percentiles(np.full(50, 3.0), None, 100).size == 0


def test_nearest_rank_quartiles():
    thr = compute_percentiles(np.arange(1, 101, dtype=float), None, 4)
    assert thr.tolist() == [25.0, 50.0, 75.0]


def test_more_bins_than_samples_gives_singleton_bins():
    col = np.array([5.0, 1.0, 3.0])
    thr = compute_percentiles(col, None, 10)
    assert np.bincount(bin_index(col, thr)).max() == 1


def test_percentiles_restricted_to_instance_space():
    col = np.arange(10, dtype=float)
    thr = compute_percentiles(col, InstanceSpace([0, 1, 8, 9], 10), 2)
    assert thr.tolist() == [1.0]  # the full column would give 4.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=80), st.integers(1, 30))
def test_percentiles_match_oracle(values, P):
    got = compute_percentiles(np.array(values, dtype=float), None, P)
    assert got.tolist() == nearest_rank_thresholds(values, P)
    assert np.all(np.diff(got) > 0)


# bin sums

def test_single_bin_sum():
    col = np.array([1.0, 2.0, 3.0])
    sums, counts = bin_label_sums(col, None, np.array([4, 5, 6]), np.array([]))
    assert sums.tolist() == [15] and counts.tolist() == [3]


def test_half_open_bins_and_empty_bin():
    col = np.array([0.0, 1.0, 2.0, 5.0])
    sums, counts = bin_label_sums(col, None, np.array([1, 2, 3, 4]), np.array([1.0, 3.0, 4.0]))
    assert counts.tolist() == [1, 2, 0, 1]
    assert sums.tolist() == [1, 5, 0, 4]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32))
def test_local_statistics_conserve_counts_and_match_plain_sums(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 120))
    x = rng.integers(0, 6, size=(n, 3)).astype(float)
    y = rng.integers(-1000, 1000, size=n)
    space = InstanceSpace(rng.choice(n, size=max(1, n // 2), replace=False), n)
    stats, thresholds = local_statistics(0, x, space, y, 5)
    for fb, thr in zip(stats.features, thresholds):
        assert fb.counts.sum() == space.count
        sums, counts = bin_label_sums(x[:, fb.feature], space, y, thr)
        assert counts.tolist() == fb.counts.tolist()
        assert sums.tolist() == list(fb.sums)


# criteria

def test_variance_gain_worked_example():
    assert variance_gain(4.0, 2, 2.0, 2) == pytest.approx(0.25, abs=1e-12)
    assert variance_reduction([1, 3], [0, 2]) == pytest.approx(0.25)


def test_variance_gain_equal_labels_is_zero():
    assert variance_gain(6.0, 3, 4.0, 2) == pytest.approx(0.0, abs=1e-12)


def test_variance_gain_identity_random():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        yl = rng.normal(size=rng.integers(1, 20)) * 10
        yr = rng.normal(size=rng.integers(1, 20)) * 10
        eq2 = variance_gain(yl.sum(), yl.size, yr.sum(), yr.size)
        assert eq2 == pytest.approx(variance_reduction(yl, yr), abs=1e-9)


def test_zero_count_side_rejected():
    with pytest.raises(ValueError):
        variance_gain(0.0, 0, 1.0, 1)
    with pytest.raises(ValueError):
        cross_entropy_gain(1.0, 1, 0.0, 0)


def test_cross_entropy_pure_split_recovers_parent_entropy():
    p = 3 / 7
    h = -p * np.log(p) - (1 - p) * np.log(1 - p)
    assert cross_entropy_gain(0.0, 4, 3.0, 3) == pytest.approx(h, abs=1e-12)


def test_cross_entropy_no_information_is_zero():
    assert cross_entropy_gain(1.0, 4, 2.0, 8) == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_matches_oracle():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        yl = rng.integers(0, 2, size=rng.integers(1, 30))
        yr = rng.integers(0, 2, size=rng.integers(1, 30))
        got = cross_entropy_gain(float(yl.sum()), yl.size, float(yr.sum()), yr.size)
        assert got == pytest.approx(entropy_reduction(yl.tolist(), yr.tolist()), abs=1e-9)


# split search

def _stats(party, columns, y, P=10):
    x = np.column_stack(columns).astype(float)
    st, thr = local_statistics(party, x, InstanceSpace.full(len(y)), np.asarray(y, dtype=np.int64) * SCALE, P)
    return st, thr


def test_constant_features_give_no_split():
    st, _ = _stats(0, [np.ones(10), np.zeros(10)], [0, 1] * 5)
    assert choose_best_split([st], TERM, "binary") is None


def test_separating_feature_wins():
    y = np.array([0] * 10 + [1] * 10)
    noise = np.random.default_rng(0).permutation(20)
    st, _ = _stats(0, [noise, np.arange(20)], y, P=20)
    c = choose_best_split([st], TERM, "binary")
    assert (c.party, c.feature, c.n_left, c.n_right) == (0, 1, 10, 10)
    assert c.gain == pytest.approx(np.log(2))


def test_tie_goes_to_lowest_party_and_feature():
    y = [0, 0, 1, 1]
    col = np.arange(4)
    a, _ = _stats(0, [col[::-1] * 0, col], y)
    b, _ = _stats(1, [col], y)
    c = choose_best_split([b, a], TERM, "binary")
    assert (c.party, c.feature) == (0, 1)


def test_min_gain_and_min_leaf_respected():
    y = [0, 0, 1, 1]
    st, _ = _stats(0, [np.arange(4)], y)
    assert choose_best_split([st], TerminationCriteria(min_gain=10.0), "binary") is None
    assert choose_best_split([st], TerminationCriteria(min_samples_split=6, min_samples_leaf=3), "binary") is None


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["binary", "regression"]))
def test_split_search_matches_exhaustive_oracle(seed, task):
    rng = np.random.default_rng(seed)
    n, d, P = int(rng.integers(4, 200)), int(rng.integers(1, 5)), int(rng.integers(2, 12))
    x = rng.integers(0, 8, size=(n, d)).astype(float)
    y = rng.integers(0, 2, size=n).astype(float) if task == "binary" else np.round(rng.normal(size=n), 3)
    yfp = np.floor(y * SCALE + 0.5).astype(np.int64)
    st, thr = local_statistics(0, x, InstanceSpace.full(n), yfp, P)
    got = choose_best_split([st], TERM, task)
    y = yfp / SCALE  # compare on the quantized labels the trainer sees
    oracle = entropy_reduction if task == "binary" else variance_reduction
    best = None
    for k in range(d):
        for v in nearest_rank_thresholds(x[:, k].tolist(), P):
            left, right = y[x[:, k] < v], y[x[:, k] >= v]
            g = oracle(left.tolist(), right.tolist())
            if best is None or g > best + 1e-9:
                best = g
    if best is None or best <= 1e-9:
        assert got is None or got.gain <= 1e-9
    else:
        assert got is not None and got.gain == pytest.approx(best, abs=1e-9)


def test_split_instance_space_examples():
    space = InstanceSpace.full(4)
    col = np.array([1.0, 2.0, 3.0, 4.0])
    left, right = split_instance_space(space, col, 2.5)
    assert (left.count, right.count) == (2, 2)
    with pytest.raises(DegenerateSplit):
        split_instance_space(space, col, 0.5)
    with pytest.raises(DegenerateSplit):
        split_instance_space(space, col, 9.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=2, max_size=60), st.integers(0, 50))
def test_split_is_disjoint_cover(values, v):
    col = np.array(values, dtype=float)
    space = InstanceSpace.full(len(values))
    try:
        left, right = split_instance_space(space, col, float(v))
    except DegenerateSplit:
        return
    assert left.union(right) == space and left.intersection(right).count == 0
    assert left.count < space.count and right.count < space.count


# leaves, aggregation

def test_leaf_value():
    assert leaf_value([1, 1, 1]) == 1.0
    assert leaf_value([0, 1]) == 0.5
    y = np.random.default_rng(1).normal(size=37)
    assert leaf_value(y) == pytest.approx(sum(y) / len(y))


def test_aggregate_skips_missing():
    assert aggregate([0.2, 0.4, None]) == pytest.approx(0.3)
    assert aggregate([0.7, None, 0.7, None]) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        aggregate([None, None])


def test_dropping_one_output_is_bounded():
    rng = np.random.default_rng(5)
    for _ in range(100):
        outs = rng.random(50)
        drop = int(rng.integers(50))
        rest = [o if i != drop else None for i, o in enumerate(outs)]
        assert abs(aggregate(rest) - aggregate(list(outs))) <= (outs.max() - outs.min()) / 49 + 1e-12


# trees

def _hand_tree():
    t = DecisionTree(0)
    t.nodes[0] = LocalSplit(0, 5.0)
    t.nodes[1] = LocalSplit(1, 0.5)
    t.nodes[2] = RemoteSplit(1, b"r2")
    t.nodes[3], t.nodes[4] = Leaf(1.0), Leaf(2.0)
    t.nodes[5], t.nodes[6] = Leaf(3.0), Leaf(4.0)
    return t


def test_single_leaf_tree_ignores_resolver():
    t = DecisionTree(0, {0: Leaf(0.25)})
    assert predict_tree(t, lambda nid, node: None) == 0.25


def test_hand_walked_prediction():
    t = _hand_tree()
    assert predict_tree(t, local_resolver([np.array([3.0, 0.9])])) == 2.0
    assert predict_tree(t, local_resolver([np.array([6.0, 0.0])], {(1, b"r2"): False})) == 4.0
    with pytest.raises(LookupError):
        predict_tree(t, local_resolver([np.array([6.0, 0.0])]))


def test_batch_walk_matches_single_walk():
    rng = np.random.default_rng(2)
    x = rng.random((50, 2)) * np.array([10, 1])
    bits = rng.random(50) < 0.5
    t = _hand_tree()
    batch = predict_batch(t, 50, [x], {(1, b"r2"): bits})
    single = [predict_tree(t, local_resolver([x[i]], {(1, b"r2"): bool(bits[i])})) for i in range(50)]
    assert batch.tolist() == single


def test_swap_subtrees_is_an_involution_and_mirrors_decisions():
    t = _hand_tree()
    before = dict(t.nodes)
    swap_subtrees(t, 0)
    assert t.nodes[1] == before[2] and t.nodes[5] == before[3]
    swap_subtrees(t, 0)
    assert t.nodes == before


def test_model_roundtrip_and_validation():
    m = ForestModel([_hand_tree(), DecisionTree(7, {0: Leaf(-1.5)})], "regression", TerminationCriteria(3, 4, 2, 0.1))
    data = m.to_bytes()
    back = ForestModel.from_bytes(data)
    assert back.to_bytes() == data
    assert back.termination == m.termination and back.records(1) == [b"r2"]
    with pytest.raises(WireError):
        ForestModel.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(WireError):
        ForestModel.from_bytes(data + b"\x00")
    with pytest.raises(ValueError):
        ForestModel([DecisionTree(1, {0: Leaf(0)}), DecisionTree(1, {0: Leaf(1)})])


def test_termination_validation():
    with pytest.raises(ValueError):
        TerminationCriteria(min_samples_split=3, min_samples_leaf=2)
    with pytest.raises(ValueError):
        TerminationCriteria(max_depth=-1)
    TerminationCriteria(max_depth=0)


# centralized reference

def _dataset(seed, n=200):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=(n, 3))
    x1 = rng.integers(0, 4, size=(n, 2)).astype(float)
    y = ((x0[:, 0] + x1[:, 0] + rng.normal(scale=0.5, size=n)) > 1.5).astype(float)
    return [x0, x1], y


def test_pure_labels_give_single_leaf_trees():
    parts, _ = _dataset(0)
    m = reference_train_centralized(parts, np.ones(200), TrainParams(n_trees=3))
    assert all(t.nodes == {0: Leaf(1.0)} for t in m.trees)


def test_max_depth_zero_gives_leaves():
    parts, y = _dataset(0)
    m = reference_train_centralized(parts, y, TrainParams(n_trees=2, termination=TerminationCriteria(max_depth=0)))
    assert all(len(t.nodes) == 1 for t in m.trees)


def test_reference_is_deterministic_and_learns():
    parts, y = _dataset(1)
    p = TrainParams(n_trees=5, termination=TerminationCriteria(max_depth=4), n_bins=16, seed=9)
    a = reference_train_centralized(parts, y, p)
    b = reference_train_centralized(parts, y, p)
    assert a.to_bytes() == b.to_bytes()
    assert all(trees_equivalent(s, t) for s, t in zip(a.trees, b.trees))
    pred, _ = a.predict(200, parts)
    assert ((pred > 0.5) == y).mean() > 0.85
    for t in a.trees:
        t.validate()
        assert t.depth <= 4


def test_row_sampling_is_seeded_per_tree():
    p = TrainParams(row_sample_rate=0.5, seed=4)
    assert sample_rows(100, p, 3) == sample_rows(100, p, 3)
    assert sample_rows(100, p, 3) != sample_rows(100, p, 4)
    assert sample_rows(100, p, 3).count == 50
    assert sample_rows(10, TrainParams(row_sample_rate=1.0), 0) == InstanceSpace.full(10)
