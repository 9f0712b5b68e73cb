"""Experiment configuration: Table-style defaults, TOML parsing, variants."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

ENVIRONMENTS = ("keylock", "keylock-small", "parking", "bitflip")
AGENTS = ("dqn", "a2c")
GOAL_CONDITIONED = ("parking", "bitflip")

_ENTROPY_ALIASES = {
    "off": "off",
    "ae": "ae",
    "ae_re": "ae_re",
    "ae+re": "ae_re",
    "random": "random",
    "constant": "constant",
}
_REG_ALIASES = {"none": "none", "exp": "exp", "hyper": "hyper"}
_DEFAULT_NU = {"none": 0.0, "exp": 0.5, "hyper": 1.0}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    env: str = "keylock"
    agent: str = "dqn"
    her: bool = False
    entropy_mode: str = "off"
    reg: str = "none"
    nu: float = None  # default depends on reg
    cthresh: float = 0.25
    epsilon: float = 1.0
    eps_decay: float = 0.995
    eps_min: float = 0.01
    alpha: float = 0.005  # learning rate
    delta: float = 0.99  # discount factor
    tau: float = 0.99  # target update rate
    buffer_size: int = 40_000
    batch_size: int = 16
    her_k: int = 4
    n_bits: int = 8
    episode_cap: int = None  # default depends on env
    agent_hidden: tuple = (64, 64)
    reward_hidden: tuple = (32, 32)
    hard_target_copy: bool = False
    impute_sample: bool = False
    constant_conf_zero: bool = False
    her_rewards_to_fb: bool = True
    layout_seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.env!r}")
        if self.agent not in AGENTS:
            raise ConfigError(f"unknown agent {self.agent!r}")
        if self.entropy_mode not in _ENTROPY_ALIASES:
            raise ConfigError(f"unknown entropy mode {self.entropy_mode!r}")
        self.entropy_mode = _ENTROPY_ALIASES[self.entropy_mode]
        if self.reg not in _REG_ALIASES:
            raise ConfigError(f"unknown regularizer {self.reg!r}")
        if self.her and self.env not in GOAL_CONDITIONED:
            raise ConfigError(f"her requires a goal-conditioned environment, not {self.env!r}")
        if self.agent == "a2c" and self.env in ("keylock", "keylock-small", "bitflip"):
            raise ConfigError("a2c handles continuous actions only; use dqn here")
        if self.agent == "dqn" and self.env == "parking":
            raise ConfigError("parking needs continuous actions; use a2c")
        if self.nu is None:
            self.nu = _DEFAULT_NU[self.reg]
        if self.episode_cap is None:
            self.episode_cap = 5000 if self.env != "parking" else 2000
        self.agent_hidden = tuple(self.agent_hidden)
        self.reward_hidden = tuple(self.reward_hidden)
        if not self.name:
            self.name = self.variant_label()

    def variant_label(self) -> str:
        parts = [self.agent if self.entropy_mode == "off" else self.entropy_mode]
        if self.entropy_mode != "off" and self.reg != "none":
            parts.append(self.reg)
        if self.her:
            parts.append("her")
        return "-".join(parts)

    @property
    def gating_enabled(self) -> bool:
        return self.entropy_mode != "off"


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _build(base: dict, overrides: dict) -> ExperimentConfig:
    merged = dict(base)
    merged.update(overrides)
    unknown = set(merged) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**merged)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def parse_config(path):
    """Read a TOML config. Top-level keys override the defaults; an optional
    [[variant]] array defines per-variant overrides for sweeps. Returns
    (base_config, [variant_configs]); with no variants the base is the single
    variant."""
    with open(path, "rb") as f:
        try:
            data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"config parse error: {e}") from e
    variants = data.pop("variant", [])
    if not isinstance(variants, list):
        raise ConfigError("[[variant]] must be an array of tables")
    base = _build({}, data)
    if not variants:
        return base, [base]
    return base, [_build(data, v) for v in variants]
