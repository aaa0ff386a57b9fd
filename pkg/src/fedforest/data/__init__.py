from .config import ConfigError, RunConfig, config_from_dict, load_config
from .files import PartyData, load_party, write_partition
from .libsvm import LibsvmError, load_libsvm, write_libsvm
from .metrics import auc
from .partition import PartyDataset, partition_columns, reassemble, vertical_partition

__all__ = [
    "ConfigError",
    "LibsvmError",
    "PartyData",
    "PartyDataset",
    "RunConfig",
    "auc",
    "config_from_dict",
    "load_config",
    "load_libsvm",
    "load_party",
    "partition_columns",
    "reassemble",
    "vertical_partition",
    "write_libsvm",
    "write_partition",
]
