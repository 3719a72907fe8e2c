"""Flat experiment configuration with file, environment, and CLI overrides.

Precedence, lowest to highest: dataclass defaults, config file, process
environment (prefix DUALSYS_, with ``__`` standing in for the dot in
nested keys, e.g. DUALSYS_ENV__REWARD_MODE), explicit CLI overrides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .env import EnvConfig

ALGOS = (
    "ddpg",
    "cacla",
    "ddpg_im2c",
    "cacla_im2c",
    "ddpg_la_imagination",
    "ddpg_i2a",
)

ENV_PREFIX = "DUALSYS_"


@dataclass
class Config:
    algo: str = "ddpg"
    episodes: int = 2000
    seed: int = 0
    latent_dim: int = 32
    rec_weight: float = 0.1
    value_weight: float = 1.0
    plan_lr: float = 1e-3
    plan_steps: int = 10
    max_plan_depth: int = 6
    map_resolution: float = 6.0
    error_window: int = 40
    progress_lag: int = 20
    gamma: float = 0.99
    tau: float = 1e-6
    batch_size: int = 256
    lr_critic: float = 1e-3
    lr_actor: float = 1e-4
    lr_model: float = 1e-3
    buffer_capacity: int = 100_000
    pixel_capacity: int = 60_000
    latent_capacity: int = 200_000
    noise_scale: float = 0.3
    target_return: float = 1.0
    updates_per_step: int = 1
    hidden_units: int = 64
    model_hidden: int = 20
    smooth_window: int = 250
    final_perf_episodes: int = 500
    align_epochs: int = 200
    align_batch: int = 512
    align_lr: float = 1e-3
    env: EnvConfig = field(default_factory=EnvConfig)

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}; choose from {ALGOS}")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        for name in ("latent_dim", "plan_steps", "max_plan_depth", "error_window",
                     "progress_lag", "batch_size", "buffer_capacity",
                     "pixel_capacity", "latent_capacity", "hidden_units",
                     "model_hidden", "smooth_window", "final_perf_episodes",
                     "align_epochs", "align_batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.updates_per_step < 0:
            raise ValueError("updates_per_step must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be in [0, 1]")
        for name in ("rec_weight", "value_weight", "plan_lr", "map_resolution",
                     "lr_critic", "lr_actor", "lr_model", "noise_scale",
                     "align_lr"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        self.env.validate()


def _coerce(current, raw: str):
    if isinstance(current, bool):
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def apply_overrides(config: Config, overrides: dict) -> None:
    """Set flat or dotted keys (env.reward_mode) in place, with type coercion."""
    for key, raw in overrides.items():
        target = config
        name = key
        if "." in key:
            prefix, name = key.split(".", 1)
            if prefix != "env" or "." in name:
                raise ValueError(f"unknown config key {key!r}")
            target = config.env
        if not hasattr(target, name) or name == "env":
            raise ValueError(f"unknown config key {key!r}")
        setattr(target, name, _coerce(getattr(target, name), str(raw)))


def parse_config_file(text: str) -> dict:
    """key=value lines; blank lines and # comments ignored."""
    overrides = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def environ_overrides(environ) -> dict:
    overrides = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower().replace("__", ".")
        overrides[name] = value
    return overrides


def build_config(file_text: str | None = None, environ=None,
                 cli_overrides: dict | None = None) -> Config:
    config = Config()
    if file_text is not None:
        apply_overrides(config, parse_config_file(file_text))
    if environ is not None:
        apply_overrides(config, environ_overrides(environ))
    if cli_overrides:
        apply_overrides(config, cli_overrides)
    config.validate()
    return config
