#!/usr/bin/env python3
"""
Analytic CIL - Metrics
Average incremental accuracy and forgetting rate.

A_k is the accuracy of the phase-k model on the test sets of phases 0..k;
A_k^Z is its accuracy on the base-phase test set only.

    average incremental accuracy = mean(A_0 .. A_K)
    forgetting rate              = A_K^Z - A_0^Z

The forgetting rate is signed (negative when base accuracy drops); tables
usually print its magnitude, which forgetting_magnitude returns.
"""
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from src.core.errors import ValidationError


@dataclass
class PhaseAccuracyLog:
    """
    Per-phase accuracies of an incremental run.

    Attributes:
        A: accuracy of each phase's model on the union of test sets seen so far
        A_base: accuracy of each phase's model on the base test set
    """
    A: List[float] = field(default_factory=list)
    A_base: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.A = [float(a) for a in self.A]
        self.A_base = [float(a) for a in self.A_base]
        self.validate()

    def validate(self) -> None:
        if len(self.A) != len(self.A_base):
            raise ValidationError(
                f"accuracy log lists differ in length: {len(self.A)} vs {len(self.A_base)}")
        for value in self.A + self.A_base:
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"accuracy {value} outside [0, 1]")

    def append(self, accuracy: float, base_accuracy: float) -> None:
        """Record the accuracies of the next phase."""
        self.A.append(float(accuracy))
        self.A_base.append(float(base_accuracy))
        self.validate()

    @property
    def phases(self) -> int:
        """K: the number of incremental phases logged."""
        return len(self.A) - 1


def phase_accuracy(predictions: Sequence[int], truths: Sequence[int]) -> float:
    """
    Top-1 exact-match accuracy.

    Args:
        predictions: predicted class ids.
        truths: true class ids, same length.

    Returns:
        Fraction of matching entries, in [0, 1].
    """
    predicted = np.asarray(predictions)
    expected = np.asarray(truths)
    if predicted.shape != expected.shape:
        raise ValidationError(
            f"predictions and truths differ in length: {predicted.size} vs {expected.size}")
    if predicted.size == 0:
        raise ValidationError("cannot compute accuracy of an empty set")
    return float(np.mean(predicted == expected))


def average_incremental_accuracy(log: PhaseAccuracyLog) -> float:
    """Mean of A_k over the K + 1 phases."""
    log.validate()
    if not log.A:
        raise ValidationError("accuracy log is empty")
    return float(np.mean(log.A))


def forgetting_rate(log: PhaseAccuracyLog) -> float:
    """Signed change of base-test accuracy between the last and the base model."""
    log.validate()
    if log.phases < 1:
        raise ValidationError("forgetting rate needs at least one incremental phase (K >= 1)")
    return log.A_base[-1] - log.A_base[0]


def forgetting_magnitude(log: PhaseAccuracyLog) -> float:
    """Absolute value of the forgetting rate."""
    return abs(forgetting_rate(log))
