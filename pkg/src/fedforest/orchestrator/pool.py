"""Tree-parallel training: each tree belongs to exactly one worker."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field

from ..forest.params import TrainParams
from ..forest.tree import DecisionTree, ForestModel
from ..transport.base import TransportError

log = logging.getLogger(__name__)


class WorkerFailure(RuntimeError):
    pass


class AllWorkersFailed(RuntimeError):
    pass


@dataclass
class WorkerPool:
    """``fail_after[w] = k`` makes worker ``w`` die after finishing k trees."""

    n_workers: int = 1
    fail_after: dict[int, int] = field(default_factory=dict)
    health: dict[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_workers < 1:
            raise ValueError("a pool needs at least one worker")
        self.health = {w: "live" for w in range(self.n_workers)}

    def worker_for(self, tree_id: int) -> int:
        return tree_id % self.n_workers

    def assignment(self, tree_ids) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {w: [] for w in range(self.n_workers)}
        for t in tree_ids:
            out[self.worker_for(t)].append(t)
        return out


@dataclass
class TrainResult:
    model: ForestModel
    status: dict[int, str]  # tree id -> ok | failed | lost
    wall_seconds: float
    simulated_seconds: float

    @property
    def warnings(self) -> list[str]:
        bad = sorted(t for t, s in self.status.items() if s != "ok")
        return [f"{len(bad)} of {len(self.status)} trees missing: {bad}"] if bad else []


def train_forest_parallel(active, params: TrainParams, pool: WorkerPool | None = None) -> TrainResult:
    pool = pool or WorkerPool()
    plan = pool.assignment(range(params.n_trees))
    trees: dict[int, DecisionTree] = {}
    status: dict[int, str] = {t: "lost" for t in range(params.n_trees)}
    clocks: dict[int, float] = {}
    lock = threading.Lock()

    def run(worker: int) -> None:
        clock = active.endpoint.clock
        clock.set(0.0)
        done = 0
        try:
            for t in plan[worker]:
                if worker in pool.fail_after and done >= pool.fail_after[worker]:
                    raise WorkerFailure(f"worker {worker} went down")
                try:
                    tree = active.train_tree(t, params)
                except TransportError as exc:
                    log.warning("tree %d failed on worker %d: %s", t, worker, exc)
                    with lock:
                        status[t] = "failed"
                    continue
                with lock:
                    trees[t] = tree
                    status[t] = "ok"
                done += 1
        except WorkerFailure as exc:
            log.warning("%s; its remaining trees are lost", exc)
            with lock:
                pool.health[worker] = "failed"
        finally:
            with lock:
                clocks[worker] = clock.now()

    start = time.perf_counter()
    threads = [threading.Thread(target=run, args=(w,), name=f"worker{w}") for w in plan]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    wall = time.perf_counter() - start
    if not trees:
        raise AllWorkersFailed("no tree was trained")
    model = ForestModel([trees[t] for t in sorted(trees)], params.task, params.termination)
    return TrainResult(model, status, wall, max(clocks.values(), default=0.0))
