#!/usr/bin/env python3
"""
Analytic CIL - Analytic Core
Closed-form ridge classifier head with an exact recursive phase update.

This module provides:
- fit_base: the base-phase ridge solution and the regularized feature
  autocorrelation matrix R_0 = (X^T X + gamma I)^-1
- update_phase: the recursive update of (W, R) for a phase of new classes,
  equal to the joint ridge solution over every phase seen so far
- predict: argmax class prediction over the linear scores

The only state carried between phases is the AnalyticState (W, R and the
class registry). No training rows are kept.
"""
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from src.core.errors import NumericalError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.1
DEFAULT_CHUNK_SIZE = 4096


def _readonly(matrix: np.ndarray) -> np.ndarray:
    matrix = np.array(matrix, dtype=np.float64, order="C", copy=True)
    matrix.flags.writeable = False
    return matrix


def _check_finite(what: str, *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise ValidationError(f"{what} contains non-finite values")


def _cholesky(matrix: np.ndarray, what: str) -> Tuple[np.ndarray, bool]:
    try:
        return cho_factor(matrix, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"factorization of {what} failed: {e}",
                             condition=float(np.linalg.cond(matrix))) from e


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


@dataclass(frozen=True, eq=False)
class AnalyticState:
    """
    Everything the learner carries from one phase to the next.

    Attributes:
        W: weight matrix (d_fe x number of classes seen)
        R: regularized feature autocorrelation matrix (d_fe x d_fe)
        class_registry: global class id of every column of W
        gamma: ridge regularization strength
        phase_count: index of the last phase learned (0 after the base phase)
    """
    W: np.ndarray
    R: np.ndarray
    class_registry: Tuple[int, ...]
    gamma: float
    phase_count: int = 0

    def __post_init__(self) -> None:
        W = _readonly(self.W)
        R = _readonly(self.R)
        registry = tuple(int(c) for c in self.class_registry)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValidationError(f"R must be square, got shape {R.shape}")
        if W.ndim != 2 or W.shape[0] != R.shape[0]:
            raise ValidationError(f"W must have {R.shape[0]} rows, got shape {W.shape}")
        if W.shape[1] != len(registry):
            raise ValidationError(
                f"W has {W.shape[1]} columns but the class registry has {len(registry)} entries")
        if len(set(registry)) != len(registry):
            raise ValidationError("class registry entries must be unique")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "class_registry", registry)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def d_fe(self) -> int:
        return int(self.R.shape[0])

    @property
    def n_classes(self) -> int:
        return len(self.class_registry)

    def memory_footprint(self) -> Dict[str, int]:
        """Bytes held by W and R; R does not grow with the number of samples."""
        return {"W": int(self.W.nbytes), "R": int(self.R.nbytes),
                "total": int(self.W.nbytes + self.R.nbytes)}

    def check_invariants(self, tol: float = 1e-10) -> None:
        """Raise NumericalError unless R is symmetric within ``tol`` and positive definite."""
        asymmetry = float(np.max(np.abs(self.R - self.R.T))) if self.R.size else 0.0
        if asymmetry > tol:
            raise NumericalError(f"R lost symmetry: max |R - R^T| = {asymmetry:.3e}")
        smallest = float(np.linalg.eigvalsh(self.R)[0]) if self.R.size else 1.0
        if smallest <= 0:
            raise NumericalError(f"R is not positive definite: smallest eigenvalue {smallest:.3e}")


@dataclass(frozen=True, eq=False)
class PhaseUpdate:
    """
    The data of one incremental phase, already expanded.

    Attributes:
        X_fe: expanded features (N_k x d_fe)
        Y: one-hot labels (N_k x d_y_k)
        class_ids: the d_y_k new global classes, in column order of Y
    """
    X_fe: np.ndarray
    Y: np.ndarray
    class_ids: Tuple[int, ...]

    def __post_init__(self) -> None:
        X = np.asarray(self.X_fe, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.float64)
        class_ids = tuple(int(c) for c in self.class_ids)
        if X.ndim != 2:
            raise ValidationError(f"X_fe must be 2-D, got shape {X.shape}")
        if Y.ndim != 2 or Y.shape != (X.shape[0], len(class_ids)):
            raise ValidationError(
                f"dimension mismatch: Y has shape {Y.shape}, expected "
                f"({X.shape[0]}, {len(class_ids)})")
        if len(set(class_ids)) != len(class_ids):
            raise ValidationError("phase class ids must be unique")
        _check_finite("phase update", X, Y)
        object.__setattr__(self, "X_fe", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "class_ids", class_ids)

    @property
    def n_samples(self) -> int:
        return int(self.X_fe.shape[0])


@dataclass(frozen=True, eq=False)
class Prediction:
    """Predicted class id per row together with the raw score matrix."""
    class_ids: np.ndarray
    scores: np.ndarray


def fit_base(X_fe: np.ndarray, Y: np.ndarray, class_ids: Sequence[int],
             gamma: float = DEFAULT_GAMMA) -> AnalyticState:
    """
    Solve the base-phase ridge problem.

    W = (X^T X + gamma I)^-1 X^T Y through a Cholesky solve, and
    R = (X^T X + gamma I)^-1 materialized explicitly since it is the carried state.

    Args:
        X_fe: expanded base features (N_0 x d_fe), N_0 >= 1.
        Y: one-hot base labels (N_0 x d_y0).
        class_ids: global class ids of the columns of Y.
        gamma: regularization strength, > 0.

    Returns:
        The phase-0 AnalyticState.
    """
    X = np.asarray(X_fe, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if not gamma > 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValidationError(f"base features must be a non-empty 2-D matrix, got shape {X.shape}")
    if Y.ndim != 2 or Y.shape != (X.shape[0], len(class_ids)):
        raise ValidationError(
            f"dimension mismatch: Y has shape {Y.shape}, expected ({X.shape[0]}, {len(class_ids)})")
    _check_finite("base phase", X, Y)

    d_fe = X.shape[1]
    gram = X.T @ X
    gram[np.diag_indices(d_fe)] += gamma
    factor = _cholesky(gram, "the base Gram matrix")
    W = cho_solve(factor, X.T @ Y, check_finite=False)
    R = _symmetrize(cho_solve(factor, np.eye(d_fe), check_finite=False))
    logger.debug("Base fit: N_0=%d, d_fe=%d, %d classes, gamma=%g",
                 X.shape[0], d_fe, len(class_ids), gamma)
    return AnalyticState(W=W, R=R, class_registry=tuple(class_ids), gamma=gamma, phase_count=0)


def woodbury_update(R: np.ndarray, X: np.ndarray) -> np.ndarray:
    """
    Return (R^-1 + X^T X)^-1 given R.

    Uses R - R X^T (I + X R X^T)^-1 X R when the chunk has at most d_fe rows,
    otherwise refactors the d_fe x d_fe matrix R^-1 + X^T X directly.
    """
    n_rows, d_fe = X.shape
    if n_rows == 0:
        return R
    if n_rows <= d_fe:
        RXt = R @ X.T
        inner = X @ RXt
        inner[np.diag_indices(n_rows)] += 1.0
        factor = _cholesky(_symmetrize(inner), f"the {n_rows}x{n_rows} inner system")
        R_new = R - RXt @ cho_solve(factor, RXt.T, check_finite=False)
        logger.debug("Woodbury update through the %dx%d inner system", n_rows, n_rows)
    else:
        eye = np.eye(d_fe)
        gram = cho_solve(_cholesky(R, "R"), eye, check_finite=False) + X.T @ X
        R_new = cho_solve(_cholesky(_symmetrize(gram), "the accumulated Gram matrix"), eye,
                          check_finite=False)
        logger.debug("Direct %dx%d refactorization for a %d-row chunk", d_fe, d_fe, n_rows)
    return _symmetrize(R_new)


def _recursive_step(W: np.ndarray, R: np.ndarray, X: np.ndarray,
                    Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # Y spans every column of W; old-class columns of a new phase are zero.
    R_new = woodbury_update(R, X)
    W_new = W + R_new @ (X.T @ (Y - X @ W))
    return W_new, R_new


def update_phase(state: AnalyticState, upd: PhaseUpdate,
                 chunk_size: Optional[int] = DEFAULT_CHUNK_SIZE) -> AnalyticState:
    """
    Learn one incremental phase without revisiting earlier data.

    R_k = R - R X^T (I + X R X^T)^-1 X R, the existing columns of W become
    W - R_k X^T X W and the new columns R_k X^T Y are appended. The phase may
    be fed in row chunks of ``chunk_size``; the result is the same.

    Args:
        state: the state after the previous phase.
        upd: the new phase's expanded features, labels and class ids.
        chunk_size: rows per chunk; None or 0 processes the phase at once.

    Returns:
        A new AnalyticState; ``state`` is left untouched.
    """
    if upd.X_fe.shape[1] != state.d_fe:
        raise ValidationError(
            f"dimension mismatch: phase features have {upd.X_fe.shape[1]} columns, "
            f"state expects d_fe={state.d_fe}")
    overlap = set(upd.class_ids) & set(state.class_registry)
    if overlap:
        raise ValidationError(f"class {min(overlap)} was already learned in an earlier phase")
    if chunk_size is not None and chunk_size < 0:
        raise ValidationError("chunk_size must be positive")

    if upd.n_samples == 0 and not upd.class_ids:
        return replace(state, phase_count=state.phase_count + 1)

    n_old = state.n_classes
    n_new = len(upd.class_ids)
    W = np.hstack([state.W, np.zeros((state.d_fe, n_new))])
    R = np.array(state.R)
    Y_full = np.hstack([np.zeros((upd.n_samples, n_old)), upd.Y])

    step = chunk_size or max(upd.n_samples, 1)
    chunks = 0
    for start in range(0, upd.n_samples, step):
        W, R = _recursive_step(W, R, upd.X_fe[start:start + step], Y_full[start:start + step])
        chunks += 1
    logger.debug("Phase %d learned in %d chunk(s): %d rows, %d new classes",
                 state.phase_count + 1, chunks, upd.n_samples, n_new)
    return AnalyticState(W=W, R=R, class_registry=state.class_registry + upd.class_ids,
                         gamma=state.gamma, phase_count=state.phase_count + 1)


def predict(state: AnalyticState, X_fe: np.ndarray) -> Prediction:
    """
    Score rows with X_fe W and pick the best class per row.

    Softmax is omitted because it does not change the per-row argmax. Ties go to
    the lowest column index.
    """
    X = np.asarray(X_fe, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != state.d_fe:
        raise ValidationError(
            f"dimension mismatch: expected {state.d_fe} feature columns, got shape {X.shape}")
    if not state.class_registry:
        raise ValidationError("the state has no classes to predict")
    scores = X @ state.W
    registry = np.asarray(state.class_registry, dtype=np.int64)
    return Prediction(class_ids=registry[np.argmax(scores, axis=1)], scores=scores)
