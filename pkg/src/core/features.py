#!/usr/bin/env python3
"""
Analytic CIL - Feature Pipeline
Backbone feature extraction followed by the frozen random feature expansion.

The expansion maps backbone features X_cnn (N x d_cnn) to
max(0, X_cnn W_fe) (N x d_fe), where W_fe is drawn once from a seeded normal
distribution and never trained. Two backbone substitutes are provided:
- IdentityExtractor for precomputed features
- RandomProjectionExtractor, a frozen seeded linear map followed by a rectifier
"""
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Protocol
import logging
import math

import numpy as np

from src.core.errors import ValidationError

logger = logging.getLogger(__name__)


def seeded_generator(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) so draws are reproducible across platforms."""
    return np.random.Generator(np.random.Philox(seed))


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix = np.array(matrix, dtype=np.float64, order="C", copy=True)
    matrix.flags.writeable = False
    return matrix


def _as_matrix(X: Any, width: int, what: str) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != width:
        raise ValidationError(f"dimension mismatch: {what} expects {width} columns, got shape {X.shape}")
    return X


class Extractor(Protocol):
    """Maps raw samples (N x d_in) to backbone features (N x output_width)."""

    @property
    def output_width(self) -> int:
        ...

    def extract(self, raw: np.ndarray) -> np.ndarray:
        ...


class IdentityExtractor:
    """Pass-through extractor for features computed outside this package."""

    def __init__(self, width: int) -> None:
        if width < 1:
            raise ValidationError("extractor width must be >= 1")
        self._width = width

    @property
    def output_width(self) -> int:
        return self._width

    def extract(self, raw: np.ndarray) -> np.ndarray:
        return _as_matrix(raw, self._width, "identity extractor")

    def __repr__(self) -> str:
        return f"IdentityExtractor(width={self._width})"


class RandomProjectionExtractor:
    """
    Frozen seeded random projection with a rectifier.

    Attributes:
        weights: read-only (d_in x width) matrix with Normal(0, std^2) entries
    """

    def __init__(self, d_in: int, width: int, seed: int = 0, std: Optional[float] = None) -> None:
        if d_in < 1 or width < 1:
            raise ValidationError("random projection needs d_in >= 1 and width >= 1")
        std = 1.0 / math.sqrt(d_in) if std is None else std
        if std <= 0:
            raise ValidationError("random projection std must be positive")
        self.d_in = d_in
        self.seed = seed
        self.std = std
        self.weights = _frozen(seeded_generator(seed).normal(0.0, std, size=(d_in, width)))

    @property
    def output_width(self) -> int:
        return int(self.weights.shape[1])

    def extract(self, raw: np.ndarray) -> np.ndarray:
        X = _as_matrix(raw, self.d_in, "random projection extractor")
        return np.maximum(X @ self.weights, 0.0)

    def __repr__(self) -> str:
        return f"RandomProjectionExtractor(d_in={self.d_in}, width={self.output_width}, seed={self.seed})"


def build_extractor(spec: Optional[Mapping[str, Any]], d_in: int) -> Extractor:
    """
    Build an extractor from its config mapping.

    Args:
        spec: ``{"kind": "identity"}`` or
            ``{"kind": "random_projection", "width": int, "seed": int, "std": float}``;
            None means identity.
        d_in: width of the raw input rows.
    """
    spec = dict(spec or {"kind": "identity"})
    kind = spec.pop("kind", "identity")
    if kind == "identity":
        if spec:
            raise ValidationError(f"identity extractor takes no options, got {sorted(spec)}")
        return IdentityExtractor(d_in)
    if kind == "random_projection":
        unknown = set(spec) - {"width", "seed", "std"}
        if unknown:
            raise ValidationError(f"unknown random_projection options {sorted(unknown)}")
        if "width" not in spec:
            raise ValidationError("random_projection extractor needs a width")
        return RandomProjectionExtractor(d_in, int(spec["width"]), int(spec.get("seed", 0)),
                                         spec.get("std"))
    raise ValidationError(f"unknown extractor kind {kind!r}")


@dataclass(frozen=True, eq=False)
class FeatureExpander:
    """
    The frozen feature-expansion layer.

    Attributes:
        weights: read-only W_fe of shape (d_cnn x d_fe)
        seed: generator seed the weights were drawn with
        std: standard deviation of the entries
    """
    weights: np.ndarray
    seed: int
    std: float

    @property
    def d_cnn(self) -> int:
        return int(self.weights.shape[0])

    @property
    def d_fe(self) -> int:
        return int(self.weights.shape[1])

    def describe(self) -> Dict[str, Any]:
        return {"d_cnn": self.d_cnn, "d_fe": self.d_fe, "seed": self.seed, "std": self.std}


def make_expander(d_cnn: int, d_fe: int, seed: int = 0, std: Optional[float] = None) -> FeatureExpander:
    """
    Draw the expansion matrix W_fe.

    Entries are Normal(0, std^2), filled row-major from a Philox generator.

    Args:
        d_cnn: backbone feature width.
        d_fe: expansion size, at least d_cnn.
        seed: generator seed.
        std: entry standard deviation; defaults to 1/sqrt(d_cnn).

    Returns:
        A frozen FeatureExpander.
    """
    if d_cnn < 1 or d_fe < 1:
        raise ValidationError("d_cnn and d_fe must be positive")
    if d_fe < d_cnn:
        raise ValidationError(f"expansion size d_fe={d_fe} is smaller than d_cnn={d_cnn}")
    std = 1.0 / math.sqrt(d_cnn) if std is None else float(std)
    if not std > 0:
        raise ValidationError("fe_std must be positive")
    weights = seeded_generator(seed).normal(0.0, std, size=(d_cnn, d_fe))
    logger.debug("Drew W_fe %dx%d (seed=%d, std=%.4g)", d_cnn, d_fe, seed, std)
    return FeatureExpander(_frozen(weights), seed, std)


def expand(expander: FeatureExpander, X_cnn: np.ndarray) -> np.ndarray:
    """
    Apply the expansion: max(0, X_cnn W_fe).

    Returns:
        Non-negative matrix of shape (N x d_fe).
    """
    X = _as_matrix(X_cnn, expander.d_cnn, "expander")
    return np.maximum(X @ expander.weights, 0.0)


def extract_and_expand(extractor: Extractor, expander: FeatureExpander, raw: np.ndarray) -> np.ndarray:
    """Run the backbone extractor and then the expansion."""
    if extractor.output_width != expander.d_cnn:
        raise ValidationError(
            f"dimension mismatch: extractor emits {extractor.output_width} columns, "
            f"expander expects {expander.d_cnn}")
    return expand(expander, extractor.extract(raw))
