"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or configuration, 2 protocol or
transport failure, 3 finished with a degraded result (missing trees or an
unreachable party).
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
import time

import numpy as np

from .crypto.riac import generate_key
from .data.config import ConfigError, RunConfig, load_config
from .data.files import PartyData, load_party, write_partition
from .data.libsvm import LibsvmError
from .data.metrics import auc
from .forest.params import TerminationCriteria
from .forest.reference import reference_train_centralized
from .forest.tree import ForestModel, trees_equivalent
from .orchestrator.bench import Scenario, bench, write_report
from .orchestrator.pool import AllWorkersFailed, WorkerPool, train_forest_parallel
from .orchestrator.serving import PredictionService
from .protocol.active import ActiveParty, federated_predict
from .protocol.messages import FlipPolicy
from .protocol.passive import PassiveParty, ProtocolError
from .protocol.session import reveal_model
from .transport.base import ControlOp, TransportError, control
from .transport.framing import Envelope, MsgType
from .transport.loopback import LoopbackNetwork
from .transport.tcp import SocketEndpoint
from .wire import WireError

log = logging.getLogger("fedforest")

EXIT_OK, EXIT_INVALID, EXIT_PROTOCOL, EXIT_DEGRADED = 0, 1, 2, 3


def records_path(model_path: str, party: int) -> str:
    return f"{model_path}.party{party}.records"


def _load(cfg: RunConfig, path: str, party: int, prefix: str = "") -> PartyData:
    d = cfg.data
    return load_party(
        path, party, len(cfg.parties), d.partition_seed,
        n_features=d.n_features or None, task=cfg.hyperparams.task, id_prefix=prefix,
    )


def _emit(name: str, value, unit: str = "") -> None:
    print(f"{name} {value} {unit}".rstrip(), flush=True)


# federation wiring

class Federation:
    """The active side plus, in loopback mode, every passive party in-process."""

    def __init__(self, cfg: RunConfig) -> None:
        self.cfg = cfg
        self.passives: dict[int, PassiveParty] = {}
        tc = cfg.transport_config()
        if tc.mode == "loopback":
            self.net = LoopbackNetwork(tc, workers=8)
            self.endpoint = self.net.endpoint(0)
        else:
            self.net = None
            self.endpoint = SocketEndpoint(0, tc)
            for i, spec in enumerate(cfg.parties[1:], start=1):
                host, port = spec.address
                self.endpoint.connect(i, host, port)

    @property
    def stats(self):
        return self.net.stats if self.net is not None else self.endpoint.stats

    def add_local_passive(self, data: PartyData) -> PassiveParty:
        p = PassiveParty(data.party, data.ids, data.x, self.net.endpoint(data.party), seed=self.cfg.seed)
        self.passives[data.party] = p
        return p

    def close(self) -> None:
        if self.net is not None:
            self.net.close()
        else:
            self.endpoint.close()


def _setup_serving(cfg: RunConfig, model_path: str, data_path: str, prefix: str):
    fed = Federation(cfg)
    if fed.net is not None:
        for i in range(1, len(cfg.parties)):
            p = fed.add_local_passive(_load(cfg, data_path, i, prefix))
            p.load_records(records_path(model_path, i))
    return fed, _load(cfg, data_path, 0, prefix)


# commands

def cmd_keygen(args, cfg: RunConfig | None) -> int:
    c = cfg.crypto if cfg else None
    key = generate_key(
        args.rounds or (c.rounds if c else 2),
        args.modulus_bits or (c.modulus_bits if c else 1024),
        args.headroom_bits or (c.headroom_bits if c else 40),
        seed=args.seed,
    )
    with open(args.out, "wb") as fh:
        fh.write(key.to_bytes())
    _emit("key.rounds", key.rounds)
    _emit("key.modulus_bits", key.n[0].bit_length(), "bits")
    _emit("key.fingerprint", key.context.fingerprint.hex())
    return EXIT_OK


def cmd_partition(args, cfg: RunConfig | None) -> int:
    m = write_partition(args.data, args.out_dir, args.parties, args.seed, args.n_features, args.task)
    for e in m["parties"]:
        _emit(f"party{e['party']}.columns", len(e["columns"]))
    _emit("rows", m["rows"])
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    if not cfg.data.train:
        raise ConfigError("data.train is required for training")
    params = cfg.train_params()
    active_data = _load(cfg, cfg.data.train, 0)
    fed = Federation(cfg)
    try:
        if fed.net is not None:
            for i in range(1, len(cfg.parties)):
                fed.add_local_passive(_load(cfg, cfg.data.train, i))
        active = ActiveParty(
            active_data.ids, active_data.x, active_data.y, fed.endpoint, list(range(1, len(cfg.parties))),
            crypto=cfg.crypto, scheme=cfg.scheme(), seed=cfg.seed,
        )
        t0 = time.perf_counter()
        active.init_session()
        _emit("session.aligned", active.n, "rows")
        _emit("session.setup_wall", f"{time.perf_counter() - t0:.3f}", "s")
        fed.stats.reset()
        res = train_forest_parallel(active, params, WorkerPool(cfg.workers))
        with open(args.model_out, "wb") as fh:
            fh.write(res.model.to_bytes())
        for i, p in fed.passives.items():
            p.save_records(records_path(args.model_out, i))
        _emit("train.trees", len(res.model.trees))
        _emit("train.wall", f"{res.wall_seconds:.3f}", "s")
        _emit("train.bytes", fed.stats.total_bytes(), "bytes")
        _emit("train.messages", fed.stats.count(), "messages")
        if cfg.data.test and fed.net is not None:
            test = _load(cfg, cfg.data.test, 0, "t")
            for i, p in fed.passives.items():
                td = _load(cfg, cfg.data.test, i, "t")
                p.register_rows(td.ids, td.x)
            preds, _ = active.predict(res.model, test.ids, test.x)
            _emit("test.auc", f"{auc(test.y, preds):.6f}")
        if args.shutdown_parties and fed.net is None:
            for i in range(1, len(cfg.parties)):
                fed.endpoint.request(i, Envelope(MsgType.CONTROL, control(ControlOp.SHUTDOWN))).result()
        for w in res.warnings:
            log.warning(w)
        return EXIT_DEGRADED if res.warnings else EXIT_OK
    finally:
        fed.close()


def _read_model(path: str) -> ForestModel:
    with open(path, "rb") as fh:
        return ForestModel.from_bytes(fh.read())


def cmd_predict(args, cfg: RunConfig) -> int:
    model = _read_model(args.model)
    fed, data = _setup_serving(cfg, args.model, args.data, args.id_prefix)
    try:
        bs = cfg.serving.batch_size
        preds, degraded = [], set()
        for s in range(0, len(data.ids), bs):
            p, excluded = federated_predict(
                fed.endpoint, model, data.ids[s : s + bs], data.x[s : s + bs], degraded_ok=cfg.serving.degraded_ok
            )
            preds.append(p)
            degraded.update(excluded)
        preds = np.concatenate(preds) if preds else np.empty(0)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                for i, v in zip(data.ids, preds):
                    fh.write(f"{i} {v!r}\n")
        _emit("predict.rows", len(preds))
        if data.y is not None and cfg.hyperparams.task == "binary" and len(set(data.y.tolist())) == 2:
            _emit("predict.auc", f"{auc(data.y, preds):.6f}")
        if degraded:
            log.warning("%d trees were excluded because a party did not answer", len(degraded))
            return EXIT_DEGRADED
        return EXIT_OK
    finally:
        fed.close()


def cmd_serve(args, cfg: RunConfig) -> int:
    model = _read_model(args.model)
    fed, data = _setup_serving(cfg, args.model, args.data, args.id_prefix)
    index = {i: k for k, i in enumerate(data.ids)}

    class _Front:
        endpoint = fed.endpoint

        def predict(self, model, ids, rows, degraded_ok=False):
            return federated_predict(fed.endpoint, model, ids, rows, degraded_ok=degraded_ok)

    degraded = False
    try:
        with PredictionService(_Front(), model, lambda ids: data.x[[index[i] for i in ids]], cfg.serving_config()) as svc:
            pending = []
            for line in sys.stdin:
                q = line.strip()
                if not q:
                    continue
                if q not in index:
                    print(f"{q} error unknown-id", flush=True)
                    continue
                pending.append((q, svc.submit(q)))
                if cfg.serving.mode == "streaming" or len(pending) >= cfg.serving.batch_size:
                    degraded |= _drain(pending)
            degraded |= _drain(pending)
    finally:
        fed.close()
    return EXIT_DEGRADED if degraded else EXIT_OK


def _drain(pending) -> bool:
    degraded = False
    for q, fut in pending:
        try:
            res = fut.result()
        except (TransportError, ProtocolError) as exc:
            print(f"{q} error {exc}", flush=True)
            degraded = True
            continue
        degraded |= res.degraded
        print(f"{q} {res.value!r}" + (" degraded" if res.degraded else ""), flush=True)
    pending.clear()
    return degraded


def cmd_bench(args, cfg: RunConfig | None) -> int:
    sc = Scenario()
    if cfg is not None:
        sc = Scenario(
            n_parties=len(cfg.parties),
            latency=cfg.transport.latency,
            bandwidth=cfg.transport.bandwidth or None,
            params=cfg.train_params(),
            crypto=cfg.crypto,
            batch_size=cfg.serving.batch_size,
            workers=cfg.workers,
            seed=cfg.seed,
        )
        if cfg.data.train and not args.synthetic:
            from .data.libsvm import load_libsvm

            x, y, _ = load_libsvm(cfg.data.train, cfg.data.n_features or None, task=cfg.hyperparams.task)
            if args.rows:
                x, y = x[: args.rows], y[: args.rows]
            sc.data = (x, y)
    if args.queries:
        sc.n_queries = args.queries
    metrics = bench(sc)
    for m in metrics:
        print(m.line(), flush=True)
    if args.out:
        write_report(metrics, args.out, args.csv)
    return EXIT_OK


def cmd_oracle_check(args, cfg: RunConfig | None) -> int:
    from .protocol.session import init_session

    rng = np.random.default_rng(args.seed)
    x = rng.normal(size=(args.samples, args.features))
    x[:, ::3] = np.round(x[:, ::3])  # some coarse columns to exercise ties
    w = rng.normal(size=args.features)
    y = (x @ w + rng.normal(scale=0.5, size=args.samples) > 0).astype(float)
    cols = np.array_split(rng.permutation(args.features), args.parties)
    cols = [np.sort(c) for c in cols]
    ids = [str(i) for i in range(args.samples)]
    base = cfg.train_params() if cfg else None
    from .forest.params import TrainParams

    params = TrainParams(
        n_trees=args.trees,
        termination=base.termination if base else TerminationCriteria(max_depth=args.max_depth),
        n_bins=base.n_bins if base else 32,
        row_sample_rate=base.row_sample_rate if base else 0.8,
        task="binary",
        shuffle=False,
        seed=args.seed,
    )
    crypto = cfg.crypto if cfg else None
    with init_session((ids, x[:, cols[0]], y), [(ids, x[:, c]) for c in cols[1:]], crypto=crypto, seed=args.seed) as sess:
        sess.active.flip_override = FlipPolicy.NEVER
        fed_model = reveal_model(sess.active.train(params), sess.passives)
        order = np.array([int(i) for i in sess.active.aligned_ids])
    ref = reference_train_centralized([x[order][:, c] for c in cols], y[order], params)
    same = all(trees_equivalent(a, b) for a, b in zip(fed_model.trees, ref.trees))
    nodes = sum(len(t.nodes) for t in ref.trees)
    _emit("oracle.trees", len(ref.trees))
    _emit("oracle.nodes", nodes)
    print("IDENTICAL" if same else "DIFFERENT", flush=True)
    return EXIT_OK if same else EXIT_PROTOCOL


def cmd_party(args, cfg: RunConfig) -> int:
    """Run one passive party as a socket server until told to shut down."""
    if cfg.transport.mode != "socket":
        raise ConfigError("the party command needs transport.mode = \"socket\"")
    i = args.index
    if not 1 <= i < len(cfg.parties):
        raise ConfigError(f"--index must be between 1 and {len(cfg.parties) - 1}")
    data = _load(cfg, args.data or cfg.data.train, i)
    ep = SocketEndpoint(i, cfg.transport_config())
    host, port = cfg.parties[i].address
    ep.listen(host, port)
    party = PassiveParty(i, data.ids, data.x, ep, seed=cfg.seed)
    if args.serve_data:
        sd = _load(cfg, args.serve_data, i, args.id_prefix)
        party.register_rows(sd.ids, sd.x)
    if args.records and args.load_records:
        party.load_records(args.records)
    # lower-numbered passive parties are reached directly for instance broadcasts
    for j in range(1, i):
        h, p = cfg.parties[j].address
        ep.connect(j, h, p, retry_for=60)
    stop = threading.Event()
    party.on_shutdown = stop.set
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    _emit("party.listening", f"{host}:{port}")
    try:
        while not stop.wait(0.2):
            pass
    except KeyboardInterrupt:
        pass
    finally:
        if args.records:
            party.save_records(args.records)
        time.sleep(0.1)  # let the shutdown acknowledgement go out
        ep.close()
    return EXIT_OK


# argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fedforest", description="Vertically federated random forest.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p, required=True):
        p.add_argument("--config", required=required, help="TOML run configuration")
        return p

    p = with_config(sub.add_parser("keygen", help="write a cipher key file"), required=False)
    p.add_argument("--out", required=True)
    p.add_argument("--rounds", type=int)
    p.add_argument("--modulus-bits", type=int)
    p.add_argument("--headroom-bits", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("partition", help="split a LIBSVM file into per-party files")
    p.add_argument("data")
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-features", type=int)
    p.add_argument("--task", choices=("binary", "regression"), default="binary")
    p.add_argument("--out-dir", required=True)

    p = with_config(sub.add_parser("train", help="train a federated forest"))
    p.add_argument("--model-out", required=True)
    p.add_argument("--shutdown-parties", action="store_true", help="stop socket parties afterwards")

    for name, help_ in (("predict", "batch inference from a file"), ("serve", "answer ids read from stdin")):
        p = with_config(sub.add_parser(name, help=help_))
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True, help="LIBSVM file or partition directory with the rows")
        p.add_argument("--id-prefix", default="t")
        if name == "predict":
            p.add_argument("--out")

    p = with_config(sub.add_parser("bench", help="training and serving benchmark"), required=False)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.add_argument("--rows", type=int, help="use only the first N training rows")
    p.add_argument("--queries", type=int)
    p.add_argument("--synthetic", action="store_true", help="ignore data.train")

    p = with_config(sub.add_parser("oracle-check", help="compare federated and centralized training"), required=False)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--features", type=int, default=10)
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--trees", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = with_config(sub.add_parser("party", help="run a passive party over TCP"))
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--data", help="training rows (defaults to data.train)")
    p.add_argument("--serve-data", help="extra rows to answer inference for")
    p.add_argument("--id-prefix", default="t")
    p.add_argument("--records", help="node-record file to save on exit")
    p.add_argument("--load-records", action="store_true")
    return ap


COMMANDS = {
    "keygen": cmd_keygen,
    "partition": cmd_partition,
    "train": cmd_train,
    "predict": cmd_predict,
    "serve": cmd_serve,
    "bench": cmd_bench,
    "oracle-check": cmd_oracle_check,
    "party": cmd_party,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config) if getattr(args, "config", None) else None
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, LibsvmError, WireError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TransportError, ProtocolError, AllWorkersFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
