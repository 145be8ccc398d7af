"""Attack configuration: defaults plus flat TOML-style override files."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields

from advtrack.generators import MomentumConfig
from advtrack.metrics import EvalParams, kappa_threshold
from advtrack.patchsel import TerminalParams
from advtrack.ppo import PpoConfig
from advtrack.signattack import SignOptConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class AttackConfig:
    momentum: MomentumConfig = field(default_factory=MomentumConfig)
    eval: EvalParams = field(default_factory=EvalParams)
    terminal: TerminalParams = field(default_factory=TerminalParams)
    sign: SignOptConfig = field(default_factory=SignOptConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    grid_size: int = 16
    n_candidates: int = 20
    pool_size: int = 30
    seed: int = 0
    backend: str = "ncc"
    remote_addr: str | None = None
    search_radius: int = 32
    budget: int | None = 200000
    selection_enabled: bool = True
    kappa_override: float | None = None

    def __post_init__(self):
        if self.n_candidates > self.pool_size:
            raise ConfigError("n_candidates cannot exceed pool_size")
        if self.grid_size < 1:
            raise ConfigError("grid_size must be >= 1")

    @property
    def kappa(self) -> float:
        if self.kappa_override is not None:
            return self.kappa_override
        return kappa_threshold(self.eval.gamma, self.terminal.tau1,
                               self.terminal.tau2)

    def flat(self) -> dict:
        """Flat key/value view matching the config-file vocabulary."""
        out = {}
        for group in ("momentum", "eval", "terminal", "sign", "ppo"):
            sub = getattr(self, group)
            for f in fields(sub):
                out[_FLAT_NAMES[(group, f.name)]] = getattr(sub, f.name)
        for f in fields(self):
            if f.name in ("momentum", "eval", "terminal", "sign", "ppo"):
                continue
            out[f.name] = getattr(self, f.name)
        return out


# Flat config-file key for every nested field; collisions between groups
# get a disambiguating prefix.
_FLAT_NAMES = {
    ("momentum", "epsilon"): "epsilon",
    ("momentum", "candidates"): "candidates",
    ("momentum", "iterations"): "iterations",
    ("momentum", "mu"): "mu",
    ("momentum", "iota"): "iota",
    ("eval", "gamma_a"): "gamma_a",
    ("eval", "gamma_r"): "gamma_r",
    ("eval", "interval"): "interval",
    ("eval", "iota"): "iota",
    ("eval", "gamma"): "gamma",
    ("terminal", "tau1"): "tau1",
    ("terminal", "tau2"): "tau2",
    ("sign", "probes"): "probes",
    ("sign", "rho_d"): "rho_d",
    ("sign", "alpha"): "alpha",
    ("sign", "iterations"): "attack_iterations",
    ("sign", "bs_tolerance"): "bs_tolerance",
    ("sign", "lambda_max_factor"): "lambda_max_factor",
    ("sign", "stall_limit"): "stall_limit",
    ("ppo", "epochs"): "ppo_epochs",
    ("ppo", "clip"): "ppo_clip",
    ("ppo", "capacity"): "ppo_capacity",
    ("ppo", "max_grad_norm"): "ppo_max_grad_norm",
    ("ppo", "discount"): "ppo_discount",
    ("ppo", "lr"): "ppo_lr",
    ("ppo", "entropy_coef"): "ppo_entropy_coef",
    ("ppo", "finetune_episodes"): "finetune_episodes",
}

_GROUP_BY_FLAT = {v: k for k, v in _FLAT_NAMES.items()}
_GROUP_TYPES = {
    "momentum": MomentumConfig,
    "eval": EvalParams,
    "terminal": TerminalParams,
    "sign": SignOptConfig,
    "ppo": PpoConfig,
}
_TOP_FIELDS = {
    "grid_size", "n_candidates", "pool_size", "seed", "backend",
    "remote_addr", "search_radius", "budget", "selection_enabled",
    "kappa_override",
}


def build_config(overrides: dict | None = None) -> AttackConfig:
    """AttackConfig from flat overrides on top of the baked-in defaults."""
    overrides = dict(overrides or {})
    groups: dict[str, dict] = {g: {} for g in _GROUP_TYPES}
    top: dict = {}
    for key, value in overrides.items():
        if key in _TOP_FIELDS:
            top[key] = value
        elif key in _GROUP_BY_FLAT:
            group, name = _GROUP_BY_FLAT[key]
            groups[group][name] = value
            if key == "iota":  # shared between the momentum sampler and eval
                groups["momentum"]["iota"] = value
                groups["eval"]["iota"] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    parts = {g: _GROUP_TYPES[g](**kw) for g, kw in groups.items()}
    return AttackConfig(momentum=parts["momentum"], eval=parts["eval"],
                        terminal=parts["terminal"], sign=parts["sign"],
                        ppo=parts["ppo"], **top)


def load_config(path: str | None = None, overrides: dict | None = None
                ) -> AttackConfig:
    data: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    data.update(overrides or {})
    return build_config(data)
