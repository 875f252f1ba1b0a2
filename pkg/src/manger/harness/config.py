"""Flat key = value run configuration.

Every tunable is scalar, so the config format is a flat file of
``key = value`` lines with ``#`` comments.  The echo written next to each
run's metrics parses back to an identical configuration.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Bad configuration file or out-of-range value."""


ALGOS = ("qmix", "qmix_sep", "qmix_sep_fixed", "manger")
ENVS = ("symmetry_break", "role_grid", "novelty_chain")


@dataclass
class TrainConfig:
    algo: str = "manger"
    env: str = "symmetry_break"
    seed: int = 0
    lr: float = 1e-3
    lr_rnd: float = 1e-3
    batch_size: int = 128
    batch_size_run: int = 8
    buffer_size: int = 5000
    mixing_embed_dim: int = 32
    gamma: float = 0.99
    total_steps: int = 4_000_000
    m_target: int = 200
    m_rnd: int = 2
    anneal_steps: int = 100_000
    epsilon_start: float = 1.0
    epsilon_finish: float = 0.05
    td_lambda: float = 0.6
    alpha: float = 1.0
    beta: int = 3
    sep_lambda: float = 0.5
    hidden_dim: int = 64
    rnd_dim: int = 32
    obs_agent_id: bool = False
    eval_every: int = 25
    eval_episodes: int = 8
    fixed_extra: int = 2
    outdir: str = "runs/latest"


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}

# (low, high) inclusive bounds; None means unbounded on that side
_RANGES = {
    "seed": (0, None),
    "lr": (1e-12, None),
    "lr_rnd": (1e-12, None),
    "batch_size": (1, None),
    "batch_size_run": (1, 9999),
    "buffer_size": (1, None),
    "mixing_embed_dim": (1, None),
    "gamma": (0.0, 1.0),
    "total_steps": (1, None),
    "m_target": (1, None),
    "m_rnd": (1, None),
    "anneal_steps": (1, None),
    "epsilon_start": (0.0, 1.0),
    "epsilon_finish": (0.0, 1.0),
    "td_lambda": (0.0, 1.0),
    "alpha": (0.0, None),
    "beta": (0, None),
    "sep_lambda": (0.0, None),
    "hidden_dim": (1, None),
    "rnd_dim": (1, None),
    "eval_every": (1, None),
    "eval_episodes": (1, None),
    "fixed_extra": (0, None),
}


def _parse_value(key: str, raw: str, line_no: int):
    kind = _FIELDS[key].type
    raw = raw.strip()
    try:
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"line {line_no}: malformed value for {key!r}: {raw!r}") from None


def _check_range(key: str, value, line_no=None) -> None:
    where = f"line {line_no}: " if line_no is not None else ""
    if key == "algo" and value not in ALGOS:
        raise ConfigError(f"{where}algo must be one of {ALGOS}, got {value!r}")
    if key == "env" and value not in ENVS:
        raise ConfigError(f"{where}env must be one of {ENVS}, got {value!r}")
    bounds = _RANGES.get(key)
    if bounds is None:
        return
    low, high = bounds
    if (low is not None and value < low) or (high is not None and value > high):
        raise ConfigError(f"{where}{key} = {value!r} out of range [{low}, {high}]")


def validate_config(config: TrainConfig) -> TrainConfig:
    for key in _FIELDS:
        _check_range(key, getattr(config, key))
    return config


def parse_config_text(text: str) -> TrainConfig:
    values = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw_line!r}")
        key, raw_value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        value = _parse_value(key, raw_value, line_no)
        _check_range(key, value, line_no)
        values[key] = value
    return validate_config(TrainConfig(**values))


def parse_config(path) -> TrainConfig:
    """Defaults overridden by the key = value lines of the file at path."""
    return parse_config_text(Path(path).read_text())


def render_config(config: TrainConfig) -> str:
    """Canonical echo; parse_config_text(render_config(c)) == c."""
    lines = []
    for name in _FIELDS:
        value = getattr(config, name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{name} = {text}")
    return "\n".join(lines) + "\n"
