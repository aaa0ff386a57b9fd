"""Run configuration from a TOML file.

Every section maps onto a dataclass; unknown sections or keys are errors so
that a typo in a hyperparameter cannot silently fall back to a default.

Example::

    seed = 7
    [data]
    train = "data/a9a"
    test = "data/a9a.t"
    [hyperparams]
    n_trees = 50
    max_depth = 10
    [[parties]]
    name = "bank"
    [[parties]]
    name = "shop"
    endpoint = "127.0.0.1:7101"
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..forest.params import TerminationCriteria, TrainParams
from ..orchestrator.serving import ServingConfig
from ..protocol.active import CryptoConfig
from ..transport.base import TransportConfig
from ..transport.codec import Scheme


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PartySpec:
    name: str
    endpoint: str = "loopback"

    @property
    def address(self) -> tuple[str, int]:
        host, _, port = self.endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"party {self.name!r}: endpoint must be host:port or 'loopback'")
        return host, int(port)


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 50
    max_depth: int = 10
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    min_gain: float = 0.0
    n_bins: int = 100
    row_sample_rate: float = 0.8
    task: str = "binary"
    shuffle: bool = True
    active_only_fraction: float = 0.0


@dataclass(frozen=True)
class DataSection:
    train: str = ""
    test: str = ""
    n_features: int = 0  # 0 means infer from the file
    partition_seed: int = 0


@dataclass(frozen=True)
class TransportSection:
    mode: str = "loopback"
    latency: float = 0.0
    bandwidth: float = 0.0  # 0 means unlimited
    timeout: float = 120.0
    scheme: str = "auto"


@dataclass(frozen=True)
class ServingSection:
    mode: str = "batching"
    batch_size: int = 100
    degraded_ok: bool = True
    linger: float = 0.005


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1
    parties: tuple[PartySpec, ...] = (PartySpec("active"), PartySpec("passive1"), PartySpec("passive2"))
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    crypto: CryptoConfig = field(default_factory=CryptoConfig)
    transport: TransportSection = field(default_factory=TransportSection)
    data: DataSection = field(default_factory=DataSection)
    serving: ServingSection = field(default_factory=ServingSection)

    def train_params(self) -> TrainParams:
        h = self.hyperparams
        return TrainParams(
            n_trees=h.n_trees,
            termination=TerminationCriteria(h.max_depth, h.min_samples_split, h.min_samples_leaf, h.min_gain),
            n_bins=h.n_bins,
            row_sample_rate=h.row_sample_rate,
            task=h.task,
            shuffle=h.shuffle,
            active_only_fraction=h.active_only_fraction,
            seed=self.seed,
        )

    def transport_config(self) -> TransportConfig:
        t = self.transport
        return TransportConfig(t.mode, t.latency, t.bandwidth or None, t.timeout)

    def scheme(self) -> Scheme | None:
        s = self.transport.scheme.lower()
        if s == "auto":
            return None
        try:
            return Scheme[s.upper()]
        except KeyError:
            raise ConfigError(f"transport.scheme must be auto, v0, v1 or v2, not {s!r}") from None

    def serving_config(self) -> ServingConfig:
        s = self.serving
        return ServingConfig(s.mode, s.batch_size, s.degraded_ok, s.linger)

    def validate(self) -> "RunConfig":
        try:
            self.train_params()
            self.transport_config()
            self.serving_config()
            self.scheme()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if len(self.parties) < 2:
            raise ConfigError("at least two parties (one active, one passive) are required")
        if len({p.name for p in self.parties}) != len(self.parties):
            raise ConfigError("party names must be unique")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.transport.mode == "socket":
            for p in self.parties[1:]:
                p.address
        return self


def _build(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{where}] must be a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kwargs = {}
    for k, v in raw.items():
        default = _default(fields[k])
        if isinstance(default, bool) and not isinstance(v, bool):
            raise ConfigError(f"{where}.{k} must be true or false")
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{where}.{k} must be a number")
            if isinstance(default, int) and not isinstance(v, int):
                raise ConfigError(f"{where}.{k} must be an integer")
        if isinstance(default, str) and not isinstance(v, str):
            raise ConfigError(f"{where}.{k} must be a string")
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def _default(f):
    # a sample value of the field's type, used only for type checks
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    return "" if f.type in ("str", str) else None


SECTIONS = {
    "hyperparams": Hyperparams,
    "crypto": CryptoConfig,
    "transport": TransportSection,
    "data": DataSection,
    "serving": ServingSection,
}


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    kwargs = {}
    for key in ("seed", "workers"):
        if key in raw:
            v = raw.pop(key)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{key} must be an integer")
            kwargs[key] = v
    if "parties" in raw:
        parties = raw.pop("parties")
        if not isinstance(parties, list):
            raise ConfigError("parties must be an array of tables ([[parties]])")
        kwargs["parties"] = tuple(_build(PartySpec, p, f"parties[{i}]") for i, p in enumerate(parties))
    for name, cls in SECTIONS.items():
        if name in raw:
            kwargs[name] = _build(cls, raw.pop(name), name)
    if raw:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(raw))}")
    return RunConfig(**kwargs).validate()


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw)
