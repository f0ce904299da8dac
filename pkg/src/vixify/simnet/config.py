"""Simulation configuration and its JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Any

from vixify.consensus import ConsensusConfig, ConsensusError

BEHAVIORS = ("honest", "timestamp_liar")
VDF_MODES = ("abstract", "real")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class MinerSpec:
    name: str
    stake: int  # coins at genesis
    vdf_speed: float = 1e6  # steps per second
    behavior: str = "honest"
    liar_offset: float = 0.0  # seconds added to timestamps by a timestamp liar
    group: str | None = None  # sybil group label; shares are aggregated per group

    def __post_init__(self):
        if self.vdf_speed <= 0:
            raise ConfigError("vdf_speed", "must be positive")
        if self.stake < 0:
            raise ConfigError("stake", "must be non-negative")
        if self.behavior not in BEHAVIORS:
            raise ConfigError("behavior", f"expected one of {BEHAVIORS}")


@dataclass(frozen=True)
class NetworkModel:
    latency: tuple[float, float] = (0.05, 0.2)  # uniform range in seconds
    drop_rate: float = 0.0

    def __post_init__(self):
        lo, hi = self.latency
        if lo < 0 or hi < lo:
            raise ConfigError("latency", "need 0 <= low <= high")
        if not 0 <= self.drop_rate < 1:
            raise ConfigError("drop_rate", "must lie in [0, 1)")


@dataclass(frozen=True)
class StakeEvent:
    """Move ``amount`` coins from ``src`` to ``dst`` right after block ``height``."""

    height: int
    src: str
    dst: str
    amount: int


@dataclass(frozen=True)
class SpeedEvent:
    """Multiply a miner's VDF speed for all blocks above ``height``."""

    height: int
    miner: str
    factor: float


@dataclass(frozen=True)
class Tolerances:
    oracle_points: float | None = None  # absolute, in share units; None -> 3 sigma
    stake_points: float | None = None  # None -> no stake-share check
    pairing_points: float = 0.02
    fast_hardware_points: float = 0.03
    rolling_window: int = 1000
    band: float = 0.10
    warmup: int = 2000


@dataclass(frozen=True)
class SimConfig:
    miners: tuple[MinerSpec, ...]
    network: NetworkModel = NetworkModel()
    consensus: ConsensusConfig = ConsensusConfig()
    blocks_to_run: int = 100
    seed: int = 0
    vdf_mode: str = "abstract"
    receive_window: float = 1.0
    unallocated_stake: int = 0  # coins held by a passive account that never mines
    confirmations: int = 6
    vdf_bits: int = 128
    stake_events: tuple[StakeEvent, ...] = ()
    speed_events: tuple[SpeedEvent, ...] = ()
    experiments: tuple[dict[str, Any], ...] = ()  # {"name": ..., **params}
    tolerances: Tolerances = Tolerances()

    def __post_init__(self):
        if not self.miners:
            raise ConfigError("miners", "at least one miner required")
        names = [m.name for m in self.miners]
        if len(set(names)) != len(names):
            raise ConfigError("miners", "duplicate miner names")
        if sum(m.stake for m in self.miners) <= 0:
            raise ConfigError("miners", "total stake must be positive")
        if self.blocks_to_run < 1:
            raise ConfigError("blocks_to_run", "must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if self.vdf_mode not in VDF_MODES:
            raise ConfigError("vdf_mode", f"expected one of {VDF_MODES}")
        if self.receive_window < 0 or self.confirmations < 0 or self.unallocated_stake < 0:
            raise ConfigError("receive_window", "negative timing or stake parameter")
        known = set(names) | {PASSIVE}
        for i, ev in enumerate(self.stake_events):
            if ev.src not in known or ev.dst not in known:
                raise ConfigError(f"stake_events[{i}]", "unknown account")
        for i, ev in enumerate(self.speed_events):
            if ev.miner not in names or ev.factor <= 0:
                raise ConfigError(f"speed_events[{i}]", "unknown miner or bad factor")

    def miner(self, name: str) -> MinerSpec:
        for m in self.miners:
            if m.name == name:
                return m
        raise KeyError(name)


PASSIVE = "__passive__"


# -- JSON ----------------------------------------------------------------------


def _typed(path: str, value: Any, kind: type) -> Any:
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
        return value
    if not isinstance(value, kind):
        raise ConfigError(path, f"expected {kind.__name__}")
    return value


def _object(path: str, obj: Any, cls: type, types: dict[str, type]) -> Any:
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    kwargs = {}
    for key, value in obj.items():
        if key not in types:
            raise ConfigError(f"{path}.{key}", "unknown field")
        if value is None:
            kwargs[key] = None
        else:
            kwargs[key] = _typed(f"{path}.{key}", value, types[key])
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}.{exc.path}", str(exc).split(": ", 1)[-1]) from None
    except TypeError as exc:
        raise ConfigError(path, str(exc)) from None


def config_from_json(obj: Any) -> SimConfig:
    if not isinstance(obj, dict):
        raise ConfigError("$", "expected an object")
    allowed = {f.name for f in fields(SimConfig)}
    for key in obj:
        if key not in allowed:
            raise ConfigError(key, "unknown field")
    if "miners" not in obj or not isinstance(obj["miners"], list):
        raise ConfigError("miners", "expected a list")
    miner_types = {"name": str, "stake": int, "vdf_speed": float, "behavior": str,
                   "liar_offset": float, "group": str}
    miners = tuple(
        _object(f"miners[{i}]", m, MinerSpec, miner_types) for i, m in enumerate(obj["miners"])
    )
    kwargs: dict[str, Any] = {"miners": miners}
    if "network" in obj:
        net = dict(obj["network"]) if isinstance(obj["network"], dict) else obj["network"]
        if isinstance(net, dict) and "latency" in net:
            lat = net["latency"]
            if isinstance(lat, (int, float)) and not isinstance(lat, bool):
                net["latency"] = (float(lat), float(lat))
            elif isinstance(lat, list) and len(lat) == 2:
                net["latency"] = tuple(_typed("network.latency", x, float) for x in lat)
            else:
                raise ConfigError("network.latency", "expected a number or [low, high]")
        kwargs["network"] = _object("network", net, NetworkModel, {"latency": tuple, "drop_rate": float})
    if "consensus" in obj:
        try:
            kwargs["consensus"] = ConsensusConfig.from_json(obj["consensus"])
        except (ConsensusError, ValueError, TypeError, ZeroDivisionError) as exc:
            raise ConfigError("consensus", str(exc)) from None
    scalars = {"blocks_to_run": int, "seed": int, "vdf_mode": str, "receive_window": float,
               "unallocated_stake": int, "confirmations": int, "vdf_bits": int}
    for key, kind in scalars.items():
        if key in obj:
            kwargs[key] = _typed(key, obj[key], kind)
    events = (("stake_events", StakeEvent, {"height": int, "src": str, "dst": str, "amount": int}),
              ("speed_events", SpeedEvent, {"height": int, "miner": str, "factor": float}))
    for key, cls, types in events:
        if key in obj:
            if not isinstance(obj[key], list):
                raise ConfigError(key, "expected a list")
            kwargs[key] = tuple(_object(f"{key}[{i}]", e, cls, types) for i, e in enumerate(obj[key]))
    if "experiments" in obj:
        exps = obj["experiments"]
        if not isinstance(exps, list):
            raise ConfigError("experiments", "expected a list")
        parsed = []
        for i, e in enumerate(exps):
            if isinstance(e, str):
                e = {"name": e}
            if not isinstance(e, dict) or not isinstance(e.get("name"), str):
                raise ConfigError(f"experiments[{i}]", "expected a name or an object with a name")
            parsed.append(dict(e))
        kwargs["experiments"] = tuple(parsed)
    if "tolerances" in obj:
        tol_types = {"oracle_points": float, "stake_points": float, "pairing_points": float,
                     "fast_hardware_points": float, "rolling_window": int, "band": float,
                     "warmup": int}
        kwargs["tolerances"] = _object("tolerances", obj["tolerances"], Tolerances, tol_types)
    return SimConfig(**kwargs)


def config_to_json(cfg: SimConfig) -> dict[str, Any]:
    def plain(dc) -> dict[str, Any]:
        return {f.name: getattr(dc, f.name) for f in fields(dc)}

    return {
        "miners": [plain(m) for m in cfg.miners],
        "network": {"latency": list(cfg.network.latency), "drop_rate": cfg.network.drop_rate},
        "consensus": cfg.consensus.to_json(),
        "blocks_to_run": cfg.blocks_to_run,
        "seed": cfg.seed,
        "vdf_mode": cfg.vdf_mode,
        "receive_window": cfg.receive_window,
        "unallocated_stake": cfg.unallocated_stake,
        "confirmations": cfg.confirmations,
        "vdf_bits": cfg.vdf_bits,
        "stake_events": [plain(e) for e in cfg.stake_events],
        "speed_events": [plain(e) for e in cfg.speed_events],
        "experiments": [dict(e) for e in cfg.experiments],
        "tolerances": plain(cfg.tolerances),
    }


def load_config(path: str | Path) -> SimConfig:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from None
    return config_from_json(obj)


def stake_shares(cfg: SimConfig) -> list[Fraction]:
    total = sum(m.stake for m in cfg.miners) + cfg.unallocated_stake
    return [Fraction(m.stake, total) for m in cfg.miners]

