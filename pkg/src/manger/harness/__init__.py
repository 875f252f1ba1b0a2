"""Run orchestration: configuration, metrics CSV, checkpoints, diagnostics,
plotting.  The CLI lives in manger.harness.cli and is imported lazily."""

from .checkpoint import (
    CheckpointCrcError,
    CheckpointError,
    CheckpointFormatError,
    CheckpointMagicError,
    CheckpointShapeError,
    crc64,
    ensure_shapes,
    load_checkpoint,
    save_checkpoint,
)
from .config import ConfigError, TrainConfig, parse_config, parse_config_text, render_config, validate_config
from .diag import agent_q_vectors, build_probe_set, diag_cosine, off_diagonal_mean
from .metrics import COLUMNS, MetricsFormatError, MetricsRow, read_metrics, write_metrics
from .plotting import PlotError, plot_curves

__all__ = [
    "COLUMNS",
    "CheckpointCrcError",
    "CheckpointError",
    "CheckpointFormatError",
    "CheckpointMagicError",
    "CheckpointShapeError",
    "ConfigError",
    "MetricsFormatError",
    "MetricsRow",
    "PlotError",
    "TrainConfig",
    "agent_q_vectors",
    "build_probe_set",
    "crc64",
    "diag_cosine",
    "ensure_shapes",
    "load_checkpoint",
    "off_diagonal_mean",
    "parse_config",
    "parse_config_text",
    "plot_curves",
    "read_metrics",
    "render_config",
    "save_checkpoint",
    "validate_config",
    "write_metrics",
]
