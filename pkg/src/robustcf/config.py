"""Plain-text run configuration (INI sections of key = value pairs).

Every field has a default; a fully resolved copy of the configuration is
echoed into each output directory so any run can be replayed byte-for-byte
from its artifacts. Command-line ``--set section.key=value`` overrides win
over the file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .evaluation import METHOD_NAMES
from .profile_model import DENOM_SCOPES, REG_MODES


class ConfigError(ValueError):
    """Bad configuration file, key, or value."""


@dataclass(frozen=True)
class RunConfig:
    # [data]
    data_path: str = ""
    data_format: str = "tsv"
    min_rating: int = 1
    max_rating: int = 5
    dataset_name: str = "dataset"
    # [split]
    fractions: tuple[float, ...] = (0.8, 0.1, 0.1)
    resplit_per_trial: bool = True
    # [model]
    methods: tuple[str, ...] = ("gpf", "user_knn", "item_knn", "slope_one", "reg_svd", "nmf")
    user_reg_weight: float | None = None
    weight_grid: tuple[float, ...] = tuple(round(0.1 * g, 1) for g in range(11))
    epsilon: float = 1e-3
    max_sweeps: int = 50
    restarts: int = 3
    reg_mode: str = "penalty"
    denom_scope: str = "all-rated"
    floor: float = 1e-8
    graph_user_k: int = 10
    graph_item_k: int = 10
    user_knn_k: int = 20
    item_knn_k: int = 20
    svd_rank: int = 10
    svd_lr: float = 0.005
    svd_reg: float = 0.02
    svd_epochs: int = 100
    nmf_rank: int = 10
    nmf_epochs: int = 200
    # [attack]
    attack_strategy: str = "average"
    attack_size: float = 1.0
    filler_size: int | None = None
    target_count: int = 20
    popular_count: int = 10
    sweep_sizes: tuple[float, ...] = tuple(round(0.1 * s, 1) for s in range(1, 11))
    # [run]
    seed: int = 7
    trials: int = 10
    output_dir: str = "runs/latest"

    def validate(self) -> None:
        if self.data_format not in ("tsv", "csv"):
            raise ConfigError(f"data.format must be tsv or csv, got {self.data_format!r}")
        if self.min_rating >= self.max_rating:
            raise ConfigError("data.min_rating must be < data.max_rating")
        if abs(sum(self.fractions) - 1.0) > 1e-9 or len(self.fractions) != 3:
            raise ConfigError("split.fractions must be three numbers summing to 1")
        unknown = [m for m in self.methods if m not in METHOD_NAMES]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; known: {sorted(METHOD_NAMES)}")
        if self.reg_mode not in REG_MODES:
            raise ConfigError(f"model.reg_mode must be one of {REG_MODES}")
        if self.denom_scope not in DENOM_SCOPES:
            raise ConfigError(f"model.denom_scope must be one of {DENOM_SCOPES}")
        if self.user_reg_weight is not None and not 0 <= self.user_reg_weight <= 1:
            raise ConfigError("model.user_reg_weight must lie in [0, 1]")
        if self.attack_strategy not in ("random", "average", "bandwagon"):
            raise ConfigError(f"bad attack.strategy {self.attack_strategy!r}")
        if not all(0 < s <= 1 for s in self.sweep_sizes):
            raise ConfigError("attack.sizes must lie in (0, 1]")
        if self.trials < 1:
            raise ConfigError("run.trials must be >= 1")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_float_list(text: str):
    return tuple(float(p) for p in text.split(",") if p.strip())


def _parse_str_list(text: str):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _opt(parser):
    def run(text: str):
        return None if text.strip() == "" else parser(text)

    return run


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# (section, key, attribute, parser)
_FIELDS = [
    ("data", "path", "data_path", str),
    ("data", "format", "data_format", str),
    ("data", "min_rating", "min_rating", int),
    ("data", "max_rating", "max_rating", int),
    ("data", "name", "dataset_name", str),
    ("split", "fractions", "fractions", _parse_float_list),
    ("split", "resplit_per_trial", "resplit_per_trial", _parse_bool),
    ("model", "methods", "methods", _parse_str_list),
    ("model", "user_reg_weight", "user_reg_weight", _opt(float)),
    ("model", "weight_grid", "weight_grid", _parse_float_list),
    ("model", "epsilon", "epsilon", float),
    ("model", "max_sweeps", "max_sweeps", int),
    ("model", "restarts", "restarts", int),
    ("model", "reg_mode", "reg_mode", str),
    ("model", "denom_scope", "denom_scope", str),
    ("model", "floor", "floor", float),
    ("model", "graph_user_k", "graph_user_k", int),
    ("model", "graph_item_k", "graph_item_k", int),
    ("model", "user_knn_k", "user_knn_k", int),
    ("model", "item_knn_k", "item_knn_k", int),
    ("model", "svd_rank", "svd_rank", int),
    ("model", "svd_lr", "svd_lr", float),
    ("model", "svd_reg", "svd_reg", float),
    ("model", "svd_epochs", "svd_epochs", int),
    ("model", "nmf_rank", "nmf_rank", int),
    ("model", "nmf_epochs", "nmf_epochs", int),
    ("attack", "strategy", "attack_strategy", str),
    ("attack", "attack_size", "attack_size", float),
    ("attack", "filler_size", "filler_size", _opt(int)),
    ("attack", "target_count", "target_count", int),
    ("attack", "popular_count", "popular_count", int),
    ("attack", "sizes", "sweep_sizes", _parse_float_list),
    ("run", "seed", "seed", int),
    ("run", "trials", "trials", int),
    ("run", "output_dir", "output_dir", str),
]

_BY_KEY = {(s, k): (attr, parser) for s, k, attr, parser in _FIELDS}


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")
    updates = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if (section, key) not in _BY_KEY:
                raise ConfigError(f"unknown config key [{section}] {key}")
            attr, value_parser = _BY_KEY[(section, key)]
            try:
                updates[attr] = value_parser(raw)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {exc}")
    config = replace(RunConfig(), **updates)
    config.validate()
    return config


def apply_overrides(config: RunConfig, overrides) -> RunConfig:
    """Apply ``section.key=value`` strings on top of a config."""
    updates = {}
    for text in overrides or ():
        if "=" not in text or "." not in text.split("=", 1)[0]:
            raise ConfigError(f"override {text!r} is not of the form section.key=value")
        where, raw = text.split("=", 1)
        section, key = where.split(".", 1)
        if (section.strip(), key.strip()) not in _BY_KEY:
            raise ConfigError(f"unknown config key [{section}] {key}")
        attr, value_parser = _BY_KEY[(section.strip(), key.strip())]
        try:
            updates[attr] = value_parser(raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for override {text!r}: {exc}")
    merged = replace(config, **updates)
    merged.validate()
    return merged


def write_config(config: RunConfig, path) -> None:
    """Echo the fully resolved configuration, stable field order."""
    lines = []
    current = None
    for section, key, attr, _ in _FIELDS:
        if section != current:
            if current is not None:
                lines.append("")
            lines.append(f"[{section}]")
            current = section
        lines.append(f"{key} = {_fmt(getattr(config, attr))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
