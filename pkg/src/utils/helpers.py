#!/usr/bin/env python3
"""
Analytic CIL - Utilities
Helper functions and benchmarking tools.

This module provides utility functions for the CLI and the web service, including:
- Logging setup
- Timing of one recursive update
- Human-readable accuracy and byte-size descriptions
- Parsing of comma-separated value lists
"""
from typing import Dict, List
import logging
import time

import numpy as np

from src.core.analytic import DEFAULT_GAMMA, PhaseUpdate, fit_base, update_phase
from src.core.errors import ValidationError

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

logger = logging.getLogger(__name__)


def configure_logging(verbose: bool = False) -> None:
    """Install the root log handler; INFO by default, DEBUG when verbose."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)


def benchmark_update(d_fe: int = 512, n_rows: int = 256, seed: int = 0) -> Dict[str, float]:
    """
    Time one base fit and one recursive update at a fixed size.

    The data is seeded random noise; only the timing is of interest. It can be
    used to compare machines or BLAS builds.

    Args:
        d_fe: expanded feature width.
        n_rows: rows in the base phase and in the incremental phase.
        seed: seed of the random data.

    Returns:
        Elapsed seconds of the base fit and of the update.
    """
    if d_fe < 1 or n_rows < 1:
        raise ValidationError("benchmark sizes must be positive")
    rng = np.random.default_rng(seed)
    X0 = rng.standard_normal((n_rows, d_fe))
    X1 = rng.standard_normal((n_rows, d_fe))
    Y0 = np.eye(2)[rng.integers(0, 2, n_rows)]
    Y1 = np.eye(2)[rng.integers(0, 2, n_rows)]

    start_time = time.perf_counter()
    state = fit_base(X0, Y0, (0, 1), DEFAULT_GAMMA)
    base_seconds = time.perf_counter() - start_time

    start_time = time.perf_counter()
    update_phase(state, PhaseUpdate(X1, Y1, (2, 3)))
    update_seconds = time.perf_counter() - start_time

    logger.info("Benchmark d_fe=%d, rows=%d: base %.4fs, update %.4fs",
                d_fe, n_rows, base_seconds, update_seconds)
    return {"d_fe": d_fe, "n_rows": n_rows,
            "base_seconds": base_seconds, "update_seconds": update_seconds}


def describe_accuracy(accuracy: float) -> str:
    """
    Get a short description of an accuracy value.

    Args:
        accuracy: accuracy between 0 and 1.

    Returns:
        The accuracy as a percentage with a qualitative label.
    """
    if accuracy >= 0.9:
        label = "excellent"
    elif accuracy >= 0.75:
        label = "good"
    elif accuracy >= 0.5:
        label = "fair"
    else:
        label = "poor"
    return f"{accuracy * 100:.2f}% ({label})"


def format_bytes(n_bytes: int) -> str:
    """Format a byte count with a binary unit."""
    value = float(n_bytes)
    for unit in ("B", "KiB", "MiB", "GiB"):
        if abs(value) < 1024 or unit == "GiB":
            return f"{value:.0f} {unit}" if unit == "B" else f"{value:.2f} {unit}"
        value /= 1024
    return f"{value:.2f} GiB"


def parse_float_list(text: str) -> List[float]:
    """Parse ``"0.1,0.01, 1e-3"`` into floats."""
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ValidationError(f"invalid number list {text!r}") from e
    if not values:
        raise ValidationError("value list is empty")
    return values


def parse_int_list(text: str) -> List[int]:
    """Parse ``"1,2,3"`` into integers."""
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ValidationError(f"invalid integer list {text!r}") from e
    if not values:
        raise ValidationError("value list is empty")
    return values
