"""Training configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

TASKS = ("addition", "copy", "ucr")
MODELS = ("lz", "lstm")
BACKENDS = ("hrr", "vtb", "hopfield")
MODES = ("soft", "hard")
OPTIMIZERS = ("rmsprop", "adam")
READOUTS = ("hidden", "memory")


class ConfigError(ValueError):
    pass


def default_seed() -> int:
    raw = os.environ.get("LZNET_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"LZNET_SEED must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class TrainConfig:
    task: str = "addition"
    model: str = "lz"
    backend: str = "hrr"
    mode: str = "soft"
    reset_cell: bool = True
    readout: str = "hidden"
    bias_init: float = 0.0
    hopfield_beta: float = 0.0  # 0 selects 1/sqrt(H)

    seq_len: int = 100
    copy_n: int = 10
    copy_m: int = 8
    hidden: int = 64
    batch: int = 64

    optimizer: str = "rmsprop"
    lr: float = 1e-3
    decay: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 5.0  # global-norm clip; 0 disables

    epochs: int = 100
    steps_per_epoch: int = 50
    eval_size: int = 256
    stop_loss: float = 0.0  # end training once an epoch's train loss falls below this; 0 disables

    ucr_train: str = ""
    ucr_test: str = ""
    znorm: bool = True

    seed: int = 0
    out_dir: str = "runs/default"
    metrics_file: str = "metrics.csv"
    wallclock: bool = False

    def validate(self) -> TrainConfig:
        for name, allowed in (
            ("task", TASKS),
            ("model", MODELS),
            ("backend", BACKENDS),
            ("mode", MODES),
            ("optimizer", OPTIMIZERS),
            ("readout", READOUTS),
        ):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        for name in ("seq_len", "copy_n", "hidden", "batch", "steps_per_epoch", "eval_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.copy_m < 2:
            raise ConfigError("copy_m must be >= 2")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.stop_loss < 0:
            raise ConfigError("stop_loss must be >= 0")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if not 0.0 <= self.decay < 1.0:
            raise ConfigError("decay must lie in [0, 1)")
        if self.bias_init not in (-1.0, 0.0, 1.0):
            raise ConfigError("bias_init must be -1, 0 or 1")
        if self.task == "addition" and self.seq_len < 2:
            raise ConfigError("addition needs seq_len >= 2")
        if self.task == "ucr" and not self.ucr_train:
            raise ConfigError("task ucr needs ucr_train")
        if self.model == "lz" and self.backend == "vtb":
            side = int(round(self.hidden**0.5))
            if side * side != self.hidden:
                raise ConfigError(f"VTB backend needs a perfect-square hidden size, got {self.hidden}")
        if self.readout == "memory" and (self.model != "lz" or self.backend == "hopfield"):
            raise ConfigError("memory readout needs an LZ model with a VSA backend")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def parse_value(key: str, raw: str):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys may use dashes."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        values[key] = parse_value(key, raw)
    return values


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> TrainConfig:
    cfg = TrainConfig(seed=default_seed())
    merged = {**(file_values or {}), **(overrides or {})}
    unknown = set(merged) - set(FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return replace(cfg, **merged).validate()


def config_from_dict(d: dict) -> TrainConfig:
    return make_config(overrides={k: v for k, v in d.items() if k in FIELD_TYPES})
