#!/usr/bin/env python3
"""
Analytic CIL - Joint Oracle
Direct (non-recursive) ridge solution over all phases at once.

The oracle keeps every phase's data in memory and solves

    W = (sum_i X_i^T X_i + gamma I)^-1 [X_0^T Y_0 ... X_k^T Y_k]

in one factorization. It is the ground truth the recursive learner must
reproduce, and the memory-hungry baseline the recursion avoids.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.linalg import block_diag, cho_factor, cho_solve

from src.core.analytic import AnalyticState
from src.core.errors import NumericalError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PhaseBlock:
    """One phase of a joint problem: expanded features, one-hot labels, class ids."""
    X_fe: np.ndarray
    Y: np.ndarray
    class_ids: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class JointProblem:
    """All phases seen so far together with the regularization strength."""
    phases: Tuple[PhaseBlock, ...]
    gamma: float

    def __post_init__(self) -> None:
        phases = tuple(PhaseBlock(np.asarray(p.X_fe, dtype=np.float64),
                                  np.asarray(p.Y, dtype=np.float64),
                                  tuple(int(c) for c in p.class_ids)) for p in self.phases)
        if not phases:
            raise ValidationError("a joint problem needs at least one phase")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        d_fe = phases[0].X_fe.shape[1]
        seen: Dict[int, int] = {}
        for index, block in enumerate(phases):
            if block.X_fe.ndim != 2 or block.X_fe.shape[1] != d_fe:
                raise ValidationError(f"phase {index}: expected {d_fe} feature columns")
            if block.Y.shape != (block.X_fe.shape[0], len(block.class_ids)):
                raise ValidationError(f"phase {index}: label shape {block.Y.shape} does not match")
            for class_id in block.class_ids:
                if class_id in seen:
                    raise ValidationError(
                        f"class {class_id} appears in phase {seen[class_id]} and phase {index}")
                seen[class_id] = index
        object.__setattr__(self, "phases", phases)

    @property
    def d_fe(self) -> int:
        return int(self.phases[0].X_fe.shape[1])

    @property
    def class_registry(self) -> Tuple[int, ...]:
        return tuple(c for block in self.phases for c in block.class_ids)

    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        """The stacked feature matrix and the zero-padded block-diagonal label matrix."""
        X_all = np.vstack([block.X_fe for block in self.phases])
        Y_all = block_diag(*[block.Y for block in self.phases])
        return X_all, np.asarray(Y_all, dtype=np.float64).reshape(X_all.shape[0], -1)


@dataclass(frozen=True, eq=False)
class JointSolution:
    """
    Directly solved weights over all phases.

    Attributes:
        W: d_fe x (sum of d_y_i), columns in phase concatenation order
        class_registry: concatenated class ids
        R: directly inverted (sum X_i^T X_i + gamma I), when computed
    """
    W: np.ndarray
    class_registry: Tuple[int, ...]
    R: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ComparisonReport:
    """Discrepancy between a joint solution and a recursive state."""
    max_abs: float
    rel_frobenius: float
    r_rel_frobenius: Optional[float]
    tolerance: float
    passed: bool
    worst_row: int
    worst_class: Optional[int]

    def to_dict(self) -> Dict[str, object]:
        return {
            "max_abs": self.max_abs,
            "rel_frobenius": self.rel_frobenius,
            "r_rel_frobenius": self.r_rel_frobenius,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "worst_row": self.worst_row,
            "worst_class": self.worst_class,
        }


def joint_fit(problem: JointProblem, with_r: bool = True) -> JointSolution:
    """
    Solve the joint ridge problem by accumulating the Gram matrix.

    Args:
        problem: all phases and gamma.
        with_r: also materialize the inverse of the regularized Gram matrix.

    Returns:
        The JointSolution.
    """
    d_fe = problem.d_fe
    gram = np.zeros((d_fe, d_fe))
    rhs: List[np.ndarray] = []
    for block in problem.phases:
        gram += block.X_fe.T @ block.X_fe
        rhs.append(block.X_fe.T @ block.Y)
    gram[np.diag_indices(d_fe)] += problem.gamma
    try:
        factor = cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"joint factorization failed: {e}",
                             condition=float(np.linalg.cond(gram))) from e
    W = cho_solve(factor, np.hstack(rhs))
    R = cho_solve(factor, np.eye(d_fe)) if with_r else None
    logger.debug("Joint fit over %d phases, %d classes", len(problem.phases), W.shape[1])
    return JointSolution(W=W, class_registry=problem.class_registry, R=R)


def joint_fit_stacked(problem: JointProblem) -> JointSolution:
    """
    Solve the literal stacked system with explicit zero-padded labels.

    The ridge problem is written as the augmented least-squares problem
    [X_all; sqrt(gamma) I] W = [Y_all; 0] and solved without forming the Gram matrix.
    """
    X_all, Y_all = problem.stacked()
    d_fe = problem.d_fe
    A = np.vstack([X_all, np.sqrt(problem.gamma) * np.eye(d_fe)])
    B = np.vstack([Y_all, np.zeros((d_fe, Y_all.shape[1]))])
    W, *_ = np.linalg.lstsq(A, B, rcond=None)
    return JointSolution(W=W, class_registry=problem.class_registry)


def normal_equations_residual(W: np.ndarray, X_all: np.ndarray, Y_all: np.ndarray,
                              gamma: float) -> float:
    """Max-abs entry of X^T (X W - Y) + gamma W; zero at the exact ridge solution."""
    residual = X_all.T @ (X_all @ W - Y_all) + gamma * W
    return float(np.max(np.abs(residual))) if residual.size else 0.0


def align_columns(W: np.ndarray, registry: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder the columns of W so they follow the class ids in ``order``."""
    position = {c: i for i, c in enumerate(registry)}
    return W[:, [position[c] for c in order]]


def compare_states(joint: JointSolution, recursive: AnalyticState, tol: float) -> ComparisonReport:
    """
    Compare a joint solution with a recursive state, column by class id.

    Raises:
        ValidationError: the two class sets differ.
    """
    if set(joint.class_registry) != set(recursive.class_registry) \
            or len(joint.class_registry) != len(recursive.class_registry):
        missing = sorted(set(joint.class_registry) ^ set(recursive.class_registry))
        raise ValidationError(f"class-set mismatch between joint and recursive solutions: {missing}")
    if joint.W.shape[0] != recursive.d_fe:
        raise ValidationError("joint and recursive solutions have different d_fe")

    W_rec = align_columns(recursive.W, recursive.class_registry, joint.class_registry)
    diff = np.abs(joint.W - W_rec)
    if diff.size:
        row, col = np.unravel_index(int(np.argmax(diff)), diff.shape)
        max_abs = float(diff[row, col])
        worst_class: Optional[int] = int(joint.class_registry[col])
    else:
        row, max_abs, worst_class = 0, 0.0, None
    norm = float(np.linalg.norm(joint.W))
    rel = float(np.linalg.norm(joint.W - W_rec)) / norm if norm > 0 else max_abs
    r_rel_frobenius = None
    if joint.R is not None:
        r_rel_frobenius = float(np.linalg.norm(joint.R - recursive.R) / np.linalg.norm(joint.R))

    passed = max_abs <= tol
    return ComparisonReport(max_abs=max_abs, rel_frobenius=rel, r_rel_frobenius=r_rel_frobenius,
                            tolerance=tol, passed=passed, worst_row=int(row),
                            worst_class=worst_class)
