from .bench import Metric, Scenario, bench, write_report
from .pool import AllWorkersFailed, TrainResult, WorkerFailure, WorkerPool, train_forest_parallel
from .serving import Prediction, PredictionService, ServingConfig

__all__ = [
    "AllWorkersFailed",
    "Metric",
    "Prediction",
    "PredictionService",
    "Scenario",
    "ServingConfig",
    "TrainResult",
    "WorkerFailure",
    "WorkerPool",
    "bench",
    "train_forest_parallel",
    "write_report",
]
