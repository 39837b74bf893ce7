"""Experiment configuration: a tree of dataclasses loaded from YAML/JSON.

Unknown keys are rejected at every level. ``resolved()`` fills in values
that are derived from other parameters so a manifest records what ran.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import yaml

from .agents import UtilityWeights
from .channel import ChannelParams
from .errors import ConfigurationError
from .mac import MacParams, ObservationCaps
from .routing import Protocol


@dataclass(frozen=True)
class DeploymentConfig:
    n_blue: int = 40
    m_cj: int = 3
    m_aj: int = 3
    m_t: int = 4
    radius: float = 10000.0
    n_flows: int = 5
    speed: float = 1.0
    slot_duration: float = 1.0


@dataclass(frozen=True)
class RoutingConfig:
    protocol: str = "jamming_aware"
    comm_range: float = 5000.0

    def __post_init__(self):
        Protocol.parse(self.protocol)
        if not self.comm_range > 0:
            raise ConfigurationError("routing.comm_range must be > 0")


@dataclass(frozen=True)
class RedForceConfig:
    activation_slot: int = 5000
    # red receivers hear their own peer as if it were this far away
    red_link_distance: float = 2500.0
    # whether red data signals reach blue receivers
    tx_interferes: bool = False


@dataclass(frozen=True)
class RewardGeometry:
    cj_range: float = 5000.0
    aj_range: float = 5000.0
    eaves_range: float | None = None  # None -> zero-shadow decode range of a blue frame


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "fixed"  # fixed | learner
    learner: str = "actor_critic"  # actor_critic | tabular
    cj_fraction: float = 0.1
    aj_fraction: float = 0.1

    def __post_init__(self):
        if self.kind not in ("fixed", "learner"):
            raise ConfigurationError(f"policy.kind must be 'fixed' or 'learner', got {self.kind!r}")
        if self.learner not in ("actor_critic", "tabular"):
            raise ConfigurationError(f"unknown learner {self.learner!r}")
        if not (0 <= self.cj_fraction and 0 <= self.aj_fraction and self.cj_fraction + self.aj_fraction <= 1):
            raise ConfigurationError("role fractions must be non-negative and sum to at most 1")


@dataclass(frozen=True)
class LearningConfig:
    hidden: tuple = (64, 64)
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    gamma: float = 0.9
    q_alpha: float = 0.1
    memory_capacity: int = 10000
    batch_size: int = 2
    episode_size: int = 8
    # slots between replay cycles; 1 = every slot, episode_size = once per episode
    replay_interval: int = 1
    max_grad_norm: float | None = 1.0  # per-update step norm cap; None disables
    act_on: str = "actor"  # scores used for epsilon-greedy: actor | critic
    eps_breakpoints: tuple = (500, 800)
    eps_values: tuple = (1.0, 0.2, 0.01)

    def __post_init__(self):
        if len(self.hidden) != 2:
            raise ConfigurationError("learning.hidden must list exactly two layer widths")
        if len(self.eps_values) != len(self.eps_breakpoints) + 1:
            raise ConfigurationError("eps_values needs one more entry than eps_breakpoints")
        if self.act_on not in ("actor", "critic"):
            raise ConfigurationError(f"learning.act_on must be 'actor' or 'critic', got {self.act_on!r}")
        if not 0 <= self.gamma < 1:
            raise ConfigurationError("learning.gamma must lie in [0, 1)")
        if self.episode_size < 1 or self.batch_size < 1 or self.replay_interval < 1:
            raise ConfigurationError("episode and batch sizes must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    horizon: int = 3000
    repetitions: int = 10
    base_seed: int = 0
    deployment: DeploymentConfig = field(default_factory=DeploymentConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    mac: MacParams = field(default_factory=MacParams)
    caps: ObservationCaps = field(default_factory=ObservationCaps)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    red: RedForceConfig = field(default_factory=RedForceConfig)
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    rewards: RewardGeometry = field(default_factory=RewardGeometry)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        """Dotted keys (``routing.protocol``) or top-level names."""
        return from_dict(merge(to_dict(self), unflatten(kwargs)))

    @property
    def eaves_range(self) -> float:
        if self.rewards.eaves_range is not None:
            return self.rewards.eaves_range
        return self.channel.decode_range()

    def resolved(self) -> dict:
        d = to_dict(self)
        d["resolved"] = {
            "eaves_range": self.eaves_range,
            "jam_detect_threshold": self.channel.detect_threshold,
        }
        return d


PROFILES = {
    # routing comparison: every blue node is a communication node
    "paper": {"horizon": 15000, "repetitions": 30, "policy": {"cj_fraction": 0.0, "aj_fraction": 0.0}},
    # learning curves: red force active from the start so security rewards exist throughout
    "paper-learning": {"horizon": 6000, "repetitions": 10, "red": {"activation_slot": 0},
                       "policy": {"kind": "learner"}},
    "desk": {"horizon": 3000, "repetitions": 10, "deployment": {"n_blue": 20}},
}


def to_dict(obj) -> dict:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if is_dataclass(v):
            out[f.name] = to_dict(v)
        elif isinstance(v, tuple):
            out[f.name] = list(v)
        else:
            out[f.name] = v
    return out


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigurationError(f"unknown configuration key(s) at {path or 'top level'}: {unknown}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        default = getattr(defaults, name)
        where = f"{path}.{name}" if path else name
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, where)
        elif isinstance(default, tuple):
            kwargs[name] = tuple(value)
        elif isinstance(default, bool):
            kwargs[name] = bool(value)
        elif isinstance(default, int) and not isinstance(value, bool):
            if isinstance(value, float) and not value.is_integer():
                raise ConfigurationError(f"{where}: expected an integer, got {value}")
            kwargs[name] = int(value)
        elif isinstance(default, float) and value is not None:
            kwargs[name] = float(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{path or 'config'}: {exc}") from None


def from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    data.pop("resolved", None)
    return _build(ExperimentConfig, data, "")


def unflatten(flat: dict) -> dict:
    out: dict = {}
    for key, value in flat.items():
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return out


def merge(base: dict, update: dict) -> dict:
    out = dict(base)
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, profile: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    data: dict = {}
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigurationError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        data = merge(data, PROFILES[profile])
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        try:
            loaded = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse config {path}: {exc}") from None
        data = merge(data, loaded)
    if overrides:
        data = merge(data, unflatten(overrides))
    return from_dict(data)


def dump_json(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.resolved(), indent=2, sort_keys=True)


replace = dataclasses.replace
