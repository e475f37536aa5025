#!/usr/bin/env python3
"""
Analytic CIL - Configuration
Experiment configuration loaded from YAML.

See docs/config_schema.md for the full schema. Relative paths are resolved
against the directory of the config file. The ACIL_THREADS environment
variable caps evaluation parallelism.
"""
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from typing import Any, Dict, Mapping, Optional
import logging
import multiprocessing
import os

import yaml

from src.core.analytic import DEFAULT_CHUNK_SIZE, DEFAULT_GAMMA
from src.core.dataset import DEFAULT_HOLDOUT_FRACTION, SplitPlan, parse_fraction
from src.core.errors import ValidationError

logger = logging.getLogger(__name__)

THREADS_ENV = "ACIL_THREADS"

# yaml section -> {yaml key: ExperimentConfig field}
_SCHEMA: Dict[str, Dict[str, str]] = {
    "data": {
        "train_features": "train_features",
        "train_labels": "train_labels",
        "test_features": "test_features",
        "test_labels": "test_labels",
        "holdout_fraction": "holdout_fraction",
    },
    "split": {
        "base_fraction": "base_fraction",
        "phases": "phases",
        "seed": "split_seed",
        "strict_even": "strict_even",
        "shuffle_classes": "shuffle_classes",
    },
    "features": {
        "d_fe": "d_fe",
        "fe_seed": "fe_seed",
        "fe_std": "fe_std",
        "extractor": "extractor",
    },
    "learner": {
        "gamma": "gamma",
        "chunk_size": "chunk_size",
    },
    "verify": {
        "tolerance": "tolerance",
        "max_d_fe": "verify_max_d_fe",
    },
}

_PATH_FIELDS = ("train_features", "train_labels", "test_features", "test_labels", "output_dir")

_NUMERIC_FIELDS: Dict[str, Any] = {
    "holdout_fraction": float, "phases": int, "split_seed": int, "d_fe": int, "fe_seed": int,
    "fe_std": float, "gamma": float, "chunk_size": int, "tolerance": float,
    "verify_max_d_fe": int,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment."""
    train_features: str
    train_labels: str
    output_dir: str
    test_features: Optional[str] = None
    test_labels: Optional[str] = None
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION
    base_fraction: Fraction = Fraction(1, 2)
    phases: int = 5
    split_seed: int = 0
    strict_even: bool = False
    shuffle_classes: bool = True
    d_fe: int = 1024
    fe_seed: int = 0
    fe_std: Optional[float] = None
    extractor: Dict[str, Any] = field(default_factory=lambda: {"kind": "identity"})
    gamma: float = DEFAULT_GAMMA
    chunk_size: int = DEFAULT_CHUNK_SIZE
    tolerance: float = 1e-8
    verify_max_d_fe: int = 2048

    def __post_init__(self) -> None:
        # YAML reads "1e-3" as a string
        for name, kind in _NUMERIC_FIELDS.items():
            value = getattr(self, name)
            if value is None:
                continue
            try:
                object.__setattr__(self, name, kind(value))
            except (TypeError, ValueError) as e:
                raise ValidationError(f"{name} must be a number, got {value!r}") from e
        object.__setattr__(self, "base_fraction", parse_fraction(self.base_fraction))
        object.__setattr__(self, "extractor", dict(self.extractor or {"kind": "identity"}))
        if (self.test_features is None) != (self.test_labels is None):
            raise ValidationError("test_features and test_labels must be given together")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if self.phases < 0:
            raise ValidationError(f"phases must be >= 0, got {self.phases}")
        if self.d_fe < 1:
            raise ValidationError(f"d_fe must be >= 1, got {self.d_fe}")
        if self.chunk_size < 0:
            raise ValidationError(f"chunk_size must be >= 0, got {self.chunk_size}")
        if self.tolerance < 0:
            raise ValidationError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.fe_std is not None and not self.fe_std > 0:
            raise ValidationError(f"fe_std must be positive, got {self.fe_std}")
        if not 0 < self.holdout_fraction < 1:
            raise ValidationError(f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}")

    def split_plan(self) -> SplitPlan:
        return SplitPlan(base_fraction=self.base_fraction, phases=self.phases,
                         seed=self.split_seed, strict_even=self.strict_even,
                         shuffle_classes=self.shuffle_classes)

    def with_overrides(self, **changes: Any) -> "ExperimentConfig":
        """Return a copy with some fields replaced (validated again)."""
        known = {f.name for f in fields(self)}
        unknown = set(changes) - known
        if unknown:
            raise ValidationError(f"unknown config fields {sorted(unknown)}")
        return replace(self, **changes)

    def check_paths(self) -> None:
        """Raise ValidationError if an input file does not exist."""
        for name in ("train_features", "train_labels", "test_features", "test_labels"):
            path = getattr(self, name)
            if path is not None and not os.path.isfile(path):
                raise ValidationError(f"{name} does not exist: {path}")

    def to_dict(self) -> Dict[str, Any]:
        """Plain JSON-friendly echo of the configuration."""
        echo = asdict(self)
        echo["base_fraction"] = str(self.base_fraction)
        return echo


def config_from_dict(raw: Mapping[str, Any], base_dir: str = ".") -> ExperimentConfig:
    """
    Build an ExperimentConfig from the nested YAML mapping.

    Args:
        raw: parsed YAML document.
        base_dir: directory relative paths are resolved against.
    """
    if not isinstance(raw, Mapping):
        raise ValidationError("config must be a mapping")
    values: Dict[str, Any] = {}
    for section, content in raw.items():
        if section == "output_dir":
            values["output_dir"] = content
            continue
        if section not in _SCHEMA:
            raise ValidationError(f"unknown config section {section!r}")
        if not isinstance(content, Mapping):
            raise ValidationError(f"config section {section!r} must be a mapping")
        for key, value in content.items():
            if key not in _SCHEMA[section]:
                raise ValidationError(f"unknown config key {section}.{key}")
            values[_SCHEMA[section][key]] = value

    for name in ("train_features", "train_labels", "output_dir"):
        if values.get(name) is None:
            raise ValidationError(f"config is missing {name}")
    for name in _PATH_FIELDS:
        if values.get(name) is not None:
            values[name] = os.path.normpath(os.path.join(base_dir, str(values[name])))
    try:
        return ExperimentConfig(**values)
    except TypeError as e:
        raise ValidationError(f"invalid config: {e}") from e


def load_config(path: str) -> ExperimentConfig:
    """Load an ExperimentConfig from a YAML file."""
    try:
        with open(path, "r") as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e.strerror}") from e
    except yaml.YAMLError as e:
        raise ValidationError(f"cannot parse config {path}: {e}") from e
    config = config_from_dict(raw or {}, os.path.dirname(os.path.abspath(path)))
    logger.debug("Loaded config from %s", path)
    return config


def evaluation_threads() -> int:
    """Number of evaluation threads: ACIL_THREADS if set, else CPU count minus one."""
    value = os.environ.get(THREADS_ENV)
    if value is None:
        return max(1, multiprocessing.cpu_count() - 1)
    try:
        threads = int(value)
    except ValueError as e:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {value!r}") from e
    return max(1, threads)
