from .binning import bin_index, bin_label_sums, compute_percentiles
from .criteria import cross_entropy_gain, variance_gain
from .instance_space import InstanceSpace
from .params import TerminationCriteria, TrainParams, sample_rows
from .reference import reference_train_centralized
from .split import (
    BinStatistics,
    DegenerateSplit,
    FeatureBins,
    SplitCandidate,
    choose_best_split,
    leaf_value,
    split_instance_space,
)
from .tree import (
    DecisionTree,
    ForestModel,
    Leaf,
    LocalSplit,
    RemoteSplit,
    aggregate,
    predict_batch,
    predict_tree,
)

__all__ = [
    "BinStatistics",
    "DecisionTree",
    "DegenerateSplit",
    "FeatureBins",
    "ForestModel",
    "InstanceSpace",
    "Leaf",
    "LocalSplit",
    "RemoteSplit",
    "SplitCandidate",
    "TerminationCriteria",
    "TrainParams",
    "aggregate",
    "bin_index",
    "bin_label_sums",
    "choose_best_split",
    "compute_percentiles",
    "cross_entropy_gain",
    "leaf_value",
    "predict_batch",
    "predict_tree",
    "reference_train_centralized",
    "sample_rows",
    "split_instance_space",
    "variance_gain",
]
