"""Run configuration: plain key=value files, typed coercion, and a fixed
precedence of CLI flag > config file > built-in default."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .stft import stft_preset


@dataclass(frozen=True)
class RunConfig:
    stft_preset: str = "desk"
    embed_dim: int = 192
    depth: int = 6
    heads: int = 6
    patch: int = 2
    cond_dim: int = 256
    time_dim: int = 64
    steps: int = 250
    cfg_scale: float = 4.0
    integrator: str = "euler"
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 200
    p_drop: float = 0.1
    seed: int = 0
    grid_n: int = 900
    room_dims: str = "30x20x10"
    absorption: float = 0.5
    max_order: int = 6
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        stft_preset(self.stft_preset)  # rejects unknown names
        if self.integrator not in ("euler", "heun"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        positive = ("embed_dim", "depth", "heads", "patch", "cond_dim",
                    "time_dim", "steps", "batch_size", "epochs", "grid_n",
                    "sample_rate")
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.p_drop <= 1.0:
            raise ValueError("p_drop must be in [0, 1]")
        if self.cfg_scale < 0:
            raise ValueError("cfg_scale must be >= 0")
        if not 0.0 < self.absorption <= 1.0:
            raise ValueError("absorption must be in (0, 1]")
        if self.max_order < 0:
            raise ValueError("max_order must be >= 0")
        parse_room_dims(self.room_dims)


_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}
# annotations are strings under `from __future__ import annotations`
_COERCE = {"int": int, "float": float, "str": str}


def parse_room_dims(text: str) -> tuple[float, float, float]:
    """Parse "LxWxH" into three positive lengths in meters."""
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ValueError(f"room dims must look like 30x20x10, got {text!r}")
    dims = tuple(float(p) for p in parts)
    if min(dims) <= 0:
        raise ValueError(f"room dimensions must be positive, got {text!r}")
    return dims


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read key=value lines; '#' lines and blanks are skipped."""
    values: dict[str, str] = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{i}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def resolve_config(config_file: str | Path | None = None,
                   overrides: dict | None = None) -> RunConfig:
    """Merge defaults, an optional config file, and CLI overrides.

    File values are strings and get coerced to the field type; unknown keys
    from either source are rejected. Overrides with value None are ignored
    (the flag was not given).
    """
    merged: dict[str, object] = {}
    if config_file is not None:
        for key, text in parse_config_file(config_file).items():
            if key not in _FIELDS:
                raise ValueError(f"unknown config key {key!r}")
            try:
                merged[key] = _COERCE[_FIELDS[key]](text)
            except (ValueError, TypeError):
                raise ValueError(
                    f"config key {key!r}: cannot parse {text!r} as {_FIELDS[key]}"
                ) from None
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        merged[key] = value
    return RunConfig(**merged)
