"""Benchmark harness.

Byte counts are exact and deterministic.  Wall-clock figures depend on the
machine; simulated figures come from the transport's logical clock and
only reflect the configured link model.
"""

from __future__ import annotations

import csv
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from ..forest.params import TerminationCriteria, TrainParams
from ..protocol.active import CryptoConfig
from ..protocol.session import init_session
from ..transport.base import TransportConfig
from ..transport.codec import Scheme
from ..transport.framing import MsgType
from .pool import WorkerPool, train_forest_parallel
from .serving import PredictionService, ServingConfig


@dataclass(frozen=True)
class Metric:
    name: str
    value: float | str
    unit: str

    def line(self) -> str:
        v = f"{self.value:.6g}" if isinstance(self.value, float) else str(self.value)
        return f"{self.name} {v} {self.unit}"


@dataclass
class Scenario:
    n_samples: int = 400
    n_features: int = 12
    n_parties: int = 3
    latency: float = 0.05
    bandwidth: float | None = None
    params: TrainParams = field(
        default_factory=lambda: TrainParams(n_trees=5, termination=TerminationCriteria(max_depth=4), n_bins=32, seed=0)
    )
    crypto: CryptoConfig = field(default_factory=lambda: CryptoConfig(modulus_bits=512))
    n_queries: int = 200
    batch_size: int = 100
    workers: int = 1
    compare_v0: bool = True
    seed: int = 0
    data: tuple | None = None  # (x, y); synthetic when None


def synthetic(n: int, d: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    w = rng.normal(size=d)
    y = (x @ w + rng.normal(scale=0.5, size=n) > 0).astype(np.float64)
    return x, y


def _columns(d: int, m: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(d)
    return [np.sort(c) for c in np.array_split(perm, m)]


def _train(sc: Scenario, x, y, cols, scheme):
    ids = [str(i) for i in range(x.shape[0])]
    sess = init_session(
        (ids, x[:, cols[0]], y),
        [(ids, x[:, c]) for c in cols[1:]],
        transport=TransportConfig(latency=sc.latency, bandwidth=sc.bandwidth, timeout=max(30.0, 10 * sc.latency)),
        crypto=sc.crypto,
        scheme=scheme,
        seed=sc.seed,
    )
    sess.network.stats.reset()
    res = train_forest_parallel(sess.active, sc.params, WorkerPool(sc.workers))
    return sess, res


def bench(sc: Scenario) -> list[Metric]:
    x, y = sc.data if sc.data is not None else synthetic(sc.n_samples, sc.n_features, sc.seed)
    cols = _columns(x.shape[1], sc.n_parties, sc.seed)
    out = [
        Metric("env.python", platform.python_version(), "version"),
        Metric("env.cpus", float(os.cpu_count() or 1), "cpus"),
        Metric("env.machine", platform.machine() or "unknown", "arch"),
        Metric("scenario.samples", float(x.shape[0]), "rows"),
        Metric("scenario.parties", float(sc.n_parties), "parties"),
        Metric("scenario.latency", sc.latency * 1000, "ms"),
    ]

    sess, res = _train(sc, x, y, cols, None)
    stats = sess.network.stats
    out += [
        Metric("train.trees", float(len(res.model.trees)), "trees"),
        Metric("train.wall", res.wall_seconds, "s"),
        Metric("train.simulated", res.simulated_seconds, "s"),
        Metric("train.bytes.auto", float(stats.total_bytes()), "bytes"),
        Metric("train.messages", float(stats.count()), "messages"),
    ]
    if sc.compare_v0:
        sess0, _ = _train(sc, x, y, cols, Scheme.V0)
        out.append(Metric("train.bytes.v0", float(sess0.network.stats.total_bytes()), "bytes"))
        sess0.close()

    active = sess.active
    order = {i: k for k, i in enumerate(active.aligned_ids)}

    def lookup(ids):
        return active.x[[order[i] for i in ids]]

    queries = active.aligned_ids[: sc.n_queries]
    clock = active.endpoint.clock
    n_passive = sc.n_parties - 1

    # streaming: one exchange per query, issued back to back
    lat_sim, lat_wall = [], []
    with PredictionService(active, res.model, lookup, ServingConfig("streaming")) as svc:
        stats.reset()
        t0 = time.perf_counter()
        for q in queries:
            clock.set(0.0)
            w = time.perf_counter()
            svc.submit(q).result()
            lat_wall.append(time.perf_counter() - w)
            lat_sim.append(clock.now())
        stream_wall = time.perf_counter() - t0
        stream_msgs = stats.count(msg_type=MsgType.INFER_REQUEST) + stats.count(msg_type=MsgType.INFER_RESPONSE)
    out += [
        Metric("serve.streaming.qps", len(queries) / stream_wall, "queries/s"),
        Metric("serve.streaming.qps_simulated", len(queries) / sum(lat_sim) if sum(lat_sim) else float("inf"), "queries/s"),
        Metric("serve.streaming.latency_p50", float(np.percentile(lat_sim, 50)) * 1000, "ms_simulated"),
        Metric("serve.streaming.latency_p99", float(np.percentile(lat_sim, 99)) * 1000, "ms_simulated"),
        Metric("serve.streaming.latency_wall_p50", float(np.percentile(lat_wall, 50)) * 1000, "ms"),
        Metric("serve.streaming.messages_per_query", stream_msgs / len(queries), "messages"),
    ]

    # batching: one exchange per batch
    with PredictionService(active, res.model, lookup, ServingConfig("batching", sc.batch_size)) as svc:
        stats.reset()
        sim = 0.0
        t0 = time.perf_counter()
        for s in range(0, len(queries), sc.batch_size):
            clock.set(0.0)
            svc.predict_many(queries[s : s + sc.batch_size])
            sim += clock.now()
        batch_wall = time.perf_counter() - t0
        n_batches = svc.exchanges
        batch_msgs = stats.count(msg_type=MsgType.INFER_REQUEST) + stats.count(msg_type=MsgType.INFER_RESPONSE)
    out += [
        Metric("serve.batching.qps", len(queries) / batch_wall, "queries/s"),
        Metric("serve.batching.qps_simulated", len(queries) / sim if sim else float("inf"), "queries/s"),
        Metric("serve.batching.messages_per_batch_per_party", batch_msgs / max(n_batches, 1) / max(n_passive, 1), "messages"),
    ]
    sess.close()
    return out


def write_report(metrics: list[Metric], path: str, csv_path: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in metrics:
            fh.write(m.line() + "\n")
    if csv_path:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["name", "value", "unit"])
            for m in metrics:
                wr.writerow([m.name, m.value, m.unit])
