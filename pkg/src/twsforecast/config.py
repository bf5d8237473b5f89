"""Run configuration and its flat ``key=value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

BENCHMARK_HORIZONS = (96, 192, 336, 720)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    lookback: int = 96
    exo_lookback: int = 96
    horizon: int = 96
    patch_len: int = 16
    d_model: int = 128
    heads: int = 8
    blocks: int = 2
    ffn_mult: int = 4
    dropout: float = 0.1
    bridging: str = "cross"  # "cross" or "concat"
    tws_enabled: bool = True
    threshold: float = 0.90
    centered_projection: bool = True
    seed: int = 0
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 10
    patience: int = 3
    max_steps: int = 0  # 0 means no cap
    grad_clip: float = 0.0  # 0 disables clipping

    def __post_init__(self):
        self.validate()

    @property
    def n_patches(self) -> int:
        return self.lookback // self.patch_len

    def validate(self) -> None:
        if self.lookback <= 0 or self.patch_len <= 0:
            raise ConfigError("lookback and patch_len must be positive")
        if self.lookback % self.patch_len:
            raise ConfigError(f"lookback {self.lookback} is not divisible by patch_len {self.patch_len}")
        if self.d_model % self.heads:
            raise ConfigError(f"heads {self.heads} must divide d_model {self.d_model}")
        if self.bridging not in ("cross", "concat"):
            raise ConfigError(f"bridging must be 'cross' or 'concat', got {self.bridging!r}")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if min(self.horizon, self.exo_lookback, self.blocks, self.batch_size, self.epochs) <= 0:
            raise ConfigError("horizon, exo_lookback, blocks, batch_size and epochs must be positive")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        changes = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            changes[key] = parse_value(types[key], value)
        return (base or cls()).replace(**changes)

    @classmethod
    def load(cls, path: str | Path, base: "RunConfig | None" = None) -> "RunConfig":
        return cls.loads(Path(path).read_text(), base)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_value(type_name: str, value: str):
    if type_name == "bool":
        low = value.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    try:
        if type_name == "int":
            return int(value)
        if type_name == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"not a {type_name}: {value!r}") from None
    return value
