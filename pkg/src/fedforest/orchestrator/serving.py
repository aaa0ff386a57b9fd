from __future__ import annotations

import logging
import queue
import threading
from concurrent.futures import Future
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..forest.tree import ForestModel

log = logging.getLogger(__name__)

MODES = ("streaming", "batching")


@dataclass(frozen=True)
class ServingConfig:
    mode: str = "batching"
    batch_size: int = 100
    degraded_ok: bool = True
    linger: float = 0.005

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.linger < 0:
            raise ValueError("linger must be >= 0")


@dataclass(frozen=True)
class Prediction:
    value: float
    excluded_trees: tuple[int, ...] = ()

    @property
    def degraded(self) -> bool:
        return bool(self.excluded_trees)


class PredictionService:
    """Front end over :meth:`ActiveParty.predict`.

    ``lookup(ids)`` returns the active party's own feature rows.  In
    streaming mode each query is its own exchange; in batching mode queries
    queue up and are flushed together at ``batch_size`` or after ``linger``
    seconds, whichever comes first.
    """

    def __init__(self, active, model: ForestModel, lookup: Callable[[list[str]], np.ndarray], config: ServingConfig | None = None) -> None:
        self.active = active
        self.model = model
        self.lookup = lookup
        self.config = config or ServingConfig()
        self.exchanges = 0
        self._queue: queue.Queue = queue.Queue()
        self._closed = threading.Event()
        self._thread = None
        if self.config.mode == "batching":
            self._thread = threading.Thread(target=self._batch_loop, name="batcher", daemon=True)
            self._thread.start()

    def predict_many(self, ids: list[str]) -> list[Prediction]:
        """One exchange for the whole list."""
        ids = [str(i) for i in ids]
        self.exchanges += 1
        preds, excluded = self.active.predict(self.model, ids, self.lookup(ids), degraded_ok=self.config.degraded_ok)
        ex = tuple(excluded)
        return [Prediction(float(v), ex) for v in preds]

    def submit(self, row_id: str) -> Future:
        fut: Future = Future()
        if self.config.mode == "streaming":
            try:
                fut.set_result(self.predict_many([row_id])[0])
            except Exception as exc:  # noqa: BLE001 - handed to the caller
                fut.set_exception(exc)
        else:
            if self._closed.is_set():
                raise RuntimeError("service is closed")
            self._queue.put((str(row_id), fut))
        return fut

    def _batch_loop(self) -> None:
        while not self._closed.is_set() or not self._queue.empty():
            try:
                first = self._queue.get(timeout=0.05)
            except queue.Empty:
                continue
            batch = [first]
            deadline = threading.Event()
            timer = threading.Timer(self.config.linger, deadline.set)
            timer.start()
            while len(batch) < self.config.batch_size and not deadline.is_set():
                try:
                    batch.append(self._queue.get(timeout=max(self.config.linger / 5, 1e-4)))
                except queue.Empty:
                    continue
            timer.cancel()
            self._flush(batch)

    def _flush(self, batch) -> None:
        try:
            results = self.predict_many([i for i, _ in batch])
        except Exception as exc:  # noqa: BLE001
            for _, fut in batch:
                fut.set_exception(exc)
            return
        for (_, fut), res in zip(batch, results):
            fut.set_result(res)

    def close(self) -> None:
        self._closed.set()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
