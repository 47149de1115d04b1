"""Run configuration: JSON file merged with command-line overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class Config:
    arity: int = 5
    persons: int = 1
    gamma1: float = 1.0
    gamma2: float = 1.0
    interaction: bool = True
    gibbs_burnin: int = 500
    gibbs_samples: int = 1000
    p: int = 16
    order_k: int = 1
    window: int = 7
    stride: int = 1
    fdr: float = 0.1
    fdr_method: str = "by"
    null_reps: int = 200
    null_mode: str = "global"
    k_neighbors: int = 1
    split_ratio: float = 0.5
    seed: int = 0
    top_n: int = 10
    lambda_mode: str | float = "auto"
    codebook_subsample: int = 65536
    threads: int = 1  # 0 = one per available core

    def as_dict(self) -> dict:
        return asdict(self)


_FIELD_NAMES = {f.name for f in fields(Config)}


def _check(cfg: Config) -> Config:
    def fail(msg):
        raise ConfigError(msg)

    if cfg.arity not in (3, 5):
        fail(f"arity must be 3 or 5, got {cfg.arity}")
    if cfg.persons < 1:
        fail(f"persons must be >= 1, got {cfg.persons}")
    if not cfg.gamma1 > 0:
        fail(f"gamma1 must be > 0, got {cfg.gamma1}")
    if cfg.gamma2 < 0:
        fail(f"gamma2 must be >= 0, got {cfg.gamma2}")
    if cfg.gibbs_burnin < 0:
        fail(f"gibbs_burnin must be >= 0, got {cfg.gibbs_burnin}")
    if cfg.gibbs_samples < 1:
        fail(f"gibbs_samples must be >= 1, got {cfg.gibbs_samples}")
    if cfg.p < 1:
        fail(f"p must be >= 1, got {cfg.p}")
    if cfg.order_k not in (0, 1, 2):
        fail(f"order_k must be 0, 1 or 2, got {cfg.order_k}")
    if cfg.window < 1:
        fail(f"window must be >= 1, got {cfg.window}")
    if cfg.window < cfg.order_k + 2:
        fail(f"window must be >= order_k + 2, got {cfg.window} with order_k {cfg.order_k}")
    if cfg.stride < 1:
        fail(f"stride must be >= 1, got {cfg.stride}")
    if not 0.0 < cfg.fdr < 1.0:
        fail(f"fdr must lie in (0, 1), got {cfg.fdr}")
    if cfg.fdr_method not in ("bh", "by"):
        fail(f"fdr_method must be 'bh' or 'by', got {cfg.fdr_method!r}")
    if cfg.null_reps < 30:
        fail(f"null_reps must be >= 30, got {cfg.null_reps}")
    if cfg.null_mode not in ("global", "percell"):
        fail(f"null_mode must be 'global' or 'percell', got {cfg.null_mode!r}")
    if cfg.k_neighbors < 1:
        fail(f"k_neighbors must be >= 1, got {cfg.k_neighbors}")
    if not 0.0 < cfg.split_ratio < 1.0:
        fail(f"split_ratio must lie in (0, 1), got {cfg.split_ratio}")
    if cfg.top_n < 1:
        fail(f"top_n must be >= 1, got {cfg.top_n}")
    if isinstance(cfg.lambda_mode, str):
        if cfg.lambda_mode not in ("auto", "grid"):
            fail(f"lambda_mode must be 'auto', 'grid' or a number in [0, 1], got {cfg.lambda_mode!r}")
    elif not 0.0 <= float(cfg.lambda_mode) <= 1.0:
        fail(f"numeric lambda_mode must lie in [0, 1], got {cfg.lambda_mode}")
    if cfg.codebook_subsample < 1:
        fail(f"codebook_subsample must be >= 1, got {cfg.codebook_subsample}")
    if cfg.threads < 0:
        fail(f"threads must be >= 0 (0 = auto), got {cfg.threads}")
    return cfg


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> Config:
    """Defaults, then file values, then overrides. Unknown keys are errors."""
    merged = {}
    for source, name in ((file_values, "config file"), (overrides, "override")):
        if not source:
            continue
        unknown = set(source) - _FIELD_NAMES
        if unknown:
            raise ConfigError(f"unknown {name} key(s): {sorted(unknown)}")
        merged.update({k: v for k, v in source.items() if v is not None})
    try:
        return _check(Config(**merged))
    except TypeError as exc:
        # wrong field count or a value whose type breaks a range check
        raise ConfigError(str(exc))


def load_config(path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return raw
