"""Run configuration: nested dataclasses round-tripped through YAML."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .bandit import BanditConfig
from .env import GeometryConfig, SpawnConfig, SvBehaviorConfig
from .mdp import RewardConfig, TaskConfig

BASELINES = ("rd-acppo", "fixed-ppo", "manual-cppo", "random-cppo")


@dataclass
class TrainerConfig:
    n_sv_max: int = 6
    episodes: int = 7000
    baseline: str = "rd-acppo"
    gamma: float = 0.9
    gae_lambda: float = 0.95
    clip: float = 0.2
    epochs: int = 20
    actor_lr: float = 5e-4
    critic_lr: float = 1e-3
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    actor_hidden: int = 128
    critic_hidden: int = 64
    checkpoint_every: int = 500

    def validate(self) -> None:
        if not 0 < self.gamma < 1 or not 0 < self.gae_lambda < 1:
            raise ValueError("gamma and gae_lambda must lie in (0, 1)")
        if not self.clip > 0:
            raise ValueError("clip must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.n_sv_max < 0:
            raise ValueError("n_sv_max must be >= 0")
        if self.baseline not in BASELINES:
            raise ValueError(f"unknown baseline {self.baseline!r}; expected one of {BASELINES}")


@dataclass
class RunConfig:
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    bandit: BanditConfig = field(default_factory=BanditConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    behavior: SvBehaviorConfig = field(default_factory=SvBehaviorConfig)
    spawn: SpawnConfig = field(default_factory=SpawnConfig)
    seed: int = 0
    out: str = "runs/default"
    label: str = "run"

    def __post_init__(self):
        # the spawner must accept every curriculum the trainer can draw
        if self.spawn.n_sv_max != self.trainer.n_sv_max:
            self.spawn = dataclasses.replace(self.spawn, n_sv_max=self.trainer.n_sv_max)

    def validate(self) -> "RunConfig":
        self.trainer.validate()
        self.bandit.validate()
        self.reward.validate()
        self.geometry.validate()
        self.behavior.validate()
        return self

    @property
    def pos_scale(self) -> float:
        return self.geometry.arm_length

    @property
    def speed_scale(self) -> float:
        return self.task.v_max


def desk_profile(**overrides) -> RunConfig:
    """Workstation-sized setup: two SVs at most, 3000 episodes."""
    cfg = RunConfig(trainer=TrainerConfig(n_sv_max=2, episodes=3000, checkpoint_every=1000),
                    bandit=BanditConfig(sync_interval=300))
    return apply_overrides(cfg, overrides)


def smoke_profile(**overrides) -> RunConfig:
    cfg = desk_profile()
    cfg.trainer.episodes = 10
    cfg.trainer.epochs = 4
    cfg.bandit.sync_interval = 3
    return apply_overrides(cfg, overrides)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(x) for x in obj]
    return obj


def to_dict(cfg: RunConfig) -> Dict[str, Any]:
    return _to_plain(cfg)


def _from_plain(cls, data):
    if not isinstance(data, dict):
        raise TypeError(f"expected a mapping for {cls.__name__}, got {type(data).__name__}")
    kwargs = {}
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in known:
            raise KeyError(f"unknown key {key!r} in {cls.__name__}")
        default = getattr(cls(), key) if _has_default(known[key]) else None
        if dataclasses.is_dataclass(default):
            kwargs[key] = _from_plain(type(default), value)
        elif isinstance(default, tuple):
            kwargs[key] = tuple(value)
        elif isinstance(default, float) and isinstance(value, int):
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def _has_default(f) -> bool:
    return (f.default is not dataclasses.MISSING
            or f.default_factory is not dataclasses.MISSING)


def from_dict(data: Optional[Dict[str, Any]]) -> RunConfig:
    return _from_plain(RunConfig, data or {})


def dump_yaml(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def load_yaml(path) -> RunConfig:
    text = Path(path).read_text()
    return from_dict(yaml.safe_load(text))


def apply_overrides(cfg: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """Set dotted keys, e.g. ``{"trainer.episodes": 10, "seed": 3}``."""
    data = to_dict(cfg)
    for key, value in overrides.items():
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node:
                raise KeyError(f"unknown config section {p!r}")
            node = node[p]
        if parts[-1] not in node:
            raise KeyError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    return from_dict(data)
