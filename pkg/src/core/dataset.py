#!/usr/bin/env python3
"""
Analytic CIL - Phase Datasets
Sample sets, class-incremental phase splitting and one-hot label matrices.

This module provides:
- SampleSet: a validated feature matrix with integer labels
- SplitPlan: how classes are divided into a base phase and K incremental phases
- PhaseDataset: one phase's features, one-hot labels and the classes it introduces
- Loading from feature/label files and a seeded stratified holdout split
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from sklearn.model_selection import train_test_split

from src.core.errors import ValidationError
from src.utils.matrix_io import PathLike, read_feature_file, read_label_file

logger = logging.getLogger(__name__)

DEFAULT_HOLDOUT_FRACTION = 0.2


@dataclass(frozen=True, eq=False)
class SampleSet:
    """
    Backbone features with one integer class id per row.

    Attributes:
        features: float64 matrix, rows are samples, columns are d_cnn feature dimensions
        labels: int64 class id per row
        class_universe: sorted distinct class ids
    """
    features: np.ndarray
    labels: np.ndarray
    class_universe: Tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if features.ndim != 2 or features.shape[1] < 1:
            raise ValidationError("features must be a 2-D matrix with d_cnn >= 1")
        if features.shape[0] != labels.shape[0]:
            raise ValidationError(
                f"row-count mismatch: {features.shape[0]} feature rows, {labels.shape[0]} labels")
        if not np.all(np.isfinite(features)):
            raise ValidationError("features contain non-finite values")
        universe = self.class_universe or tuple(int(c) for c in np.unique(labels))
        universe = tuple(sorted(int(c) for c in universe))
        if len(set(universe)) != len(universe):
            raise ValidationError("class_universe has duplicate ids")
        unknown = np.setdiff1d(labels, np.array(universe, dtype=np.int64))
        if unknown.size:
            raise ValidationError(f"label {int(unknown[0])} is not in class_universe")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_universe", universe)

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def d_cnn(self) -> int:
        return int(self.features.shape[1])

    def subset(self, rows: np.ndarray) -> "SampleSet":
        """Return the rows selected by ``rows`` with the same class universe."""
        return SampleSet(self.features[rows], self.labels[rows], self.class_universe)


@dataclass(frozen=True, eq=False)
class PhaseDataset:
    """
    One learning phase: its samples and the classes it introduces.

    Attributes:
        phase_index: k, 0 for the base phase
        features: matrix (N_k x d_cnn)
        onehot: matrix (N_k x d_y_k) whose columns follow ``class_ids``
        class_ids: the d_y_k global class ids this phase introduces
    """
    phase_index: int
    features: np.ndarray
    onehot: np.ndarray
    class_ids: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.phase_index < 0:
            raise ValidationError("phase_index must be >= 0")
        if self.onehot.shape != (self.features.shape[0], len(self.class_ids)):
            raise ValidationError(
                f"phase {self.phase_index}: one-hot shape {self.onehot.shape} does not match "
                f"{self.features.shape[0]} rows and {len(self.class_ids)} classes")
        if self.onehot.size and not np.all(self.onehot.sum(axis=1) == 1):
            raise ValidationError(f"phase {self.phase_index}: one-hot rows must sum to 1")

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def labels(self) -> np.ndarray:
        """Global class id of every row, recovered from the one-hot matrix."""
        if not self.class_ids:
            return np.zeros(0, dtype=np.int64)
        ids = np.asarray(self.class_ids, dtype=np.int64)
        return ids[np.argmax(self.onehot, axis=1)]


@dataclass(frozen=True)
class SplitPlan:
    """
    Class-incremental split protocol: a base share of the classes, then K phases.

    Attributes:
        base_fraction: share of classes learned in the base phase (one half by default)
        phases: K, the number of incremental phases
        seed: seed for shuffling the class order
        strict_even: require every incremental phase to get the same number of classes
        shuffle_classes: shuffle classes by ``seed`` before assigning them; when False the
            sorted class order is used
    """
    base_fraction: Fraction = Fraction(1, 2)
    phases: int = 5
    seed: int = 0
    strict_even: bool = False
    shuffle_classes: bool = True

    def __post_init__(self) -> None:
        fraction = parse_fraction(self.base_fraction)
        if not 0 < fraction <= 1:
            raise ValidationError(f"base_fraction must be in (0, 1], got {fraction}")
        if self.phases < 0:
            raise ValidationError("phases must be >= 0")
        object.__setattr__(self, "base_fraction", fraction)


def parse_fraction(value: Union[Fraction, float, int, str]) -> Fraction:
    """Parse ``"1/2"``, ``0.5`` or a Fraction into a Fraction."""
    try:
        if isinstance(value, float):
            return Fraction(value).limit_denominator(10_000)
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise ValidationError(f"invalid fraction {value!r}") from e


def load_sample_set(feature_path: PathLike, label_path: PathLike) -> SampleSet:
    """
    Load and validate a SampleSet from a feature file and a label file.

    Features are promoted to float64 on load.

    Args:
        feature_path: ACILFEAT binary or CSV file.
        label_path: ACILLABL binary or one-integer-per-line text file.

    Returns:
        The validated SampleSet.
    """
    features = read_feature_file(feature_path)
    labels = read_label_file(label_path)
    if features.shape[0] != labels.shape[0]:
        raise ValidationError(
            f"row-count mismatch: {feature_path} has {features.shape[0]} rows, "
            f"{label_path} has {labels.shape[0]}")
    data = SampleSet(features, labels)
    logger.info("Loaded %d samples, d_cnn=%d, %d classes from %s",
                data.n_samples, data.d_cnn, len(data.class_universe), feature_path)
    return data


def one_hot(labels: Sequence[int], class_ids: Sequence[int]) -> np.ndarray:
    """
    Build the {0,1} label matrix whose columns follow ``class_ids``.

    Args:
        labels: class id of each row.
        class_ids: ordered class ids defining the columns.

    Returns:
        float64 matrix of shape (len(labels), len(class_ids)).
    """
    ids = np.asarray(class_ids, dtype=np.int64)
    values = np.asarray(labels, dtype=np.int64).ravel()
    if len(set(ids.tolist())) != ids.size:
        raise ValidationError("class_ids must be unique")
    order = np.argsort(ids, kind="stable")
    sorted_ids = ids[order]
    pos = np.searchsorted(sorted_ids, values)
    found = pos < sorted_ids.size
    found[found] = sorted_ids[pos[found]] == values[found]
    if not np.all(found):
        missing = int(values[~found][0])
        raise ValidationError(f"label {missing} is outside class_ids")
    onehot = np.zeros((values.size, ids.size), dtype=np.float64)
    onehot[np.arange(values.size), order[pos]] = 1.0
    return onehot


def validate_disjoint(phases: Sequence[PhaseDataset]) -> None:
    """Raise ValidationError naming the first class id shared by two phases."""
    owner: Dict[int, int] = {}
    for phase in phases:
        for class_id in phase.class_ids:
            if class_id in owner:
                raise ValidationError(
                    f"class {class_id} appears in phase {owner[class_id]} "
                    f"and phase {phase.phase_index}")
            owner[class_id] = phase.phase_index


def assign_classes(class_universe: Sequence[int], plan: SplitPlan) -> List[List[int]]:
    """
    Assign classes to the base phase and K incremental phases.

    Classes are shuffled by ``plan.seed`` (unless disabled) and assigned
    contiguously: the first floor(base_fraction * n) go to the base phase, the
    rest into K groups whose sizes differ by at most one. Each group is sorted.

    Returns:
        K + 1 lists of class ids, index 0 being the base phase.
    """
    classes = np.array(sorted(int(c) for c in class_universe), dtype=np.int64)
    n_classes = classes.size
    if n_classes < plan.phases + 1:
        raise ValidationError(
            f"too few classes: {n_classes} classes cannot fill a base phase and "
            f"{plan.phases} incremental phases")
    base_count = int(plan.base_fraction * n_classes)
    if base_count < 1:
        raise ValidationError(
            f"too few classes: base_fraction {plan.base_fraction} of {n_classes} leaves "
            "no base class")
    if plan.shuffle_classes:
        classes = np.random.default_rng(plan.seed).permutation(classes)

    remaining = n_classes - base_count
    if plan.phases == 0:
        if remaining:
            raise ValidationError(f"{remaining} classes left over with zero incremental phases")
        return [sorted(classes.tolist())]
    if plan.strict_even and remaining % plan.phases:
        raise ValidationError(
            f"strict-even split impossible: {remaining} classes over {plan.phases} phases")

    groups = [sorted(classes[:base_count].tolist())]
    # np.array_split puts the larger groups first
    for chunk in np.array_split(classes[base_count:], plan.phases):
        groups.append(sorted(chunk.tolist()))
    return groups


def partition(data: SampleSet, groups: Sequence[Sequence[int]],
              allow_empty: bool = False) -> List[PhaseDataset]:
    """
    Partition a SampleSet into phases following the given class groups.

    Args:
        data: the samples to partition.
        groups: class ids per phase, index 0 being the base phase.
        allow_empty: accept classes without samples (used for test sets).

    Returns:
        One PhaseDataset per group, rows kept in their original order.
    """
    covered = {c for group in groups for c in group}
    stray = set(data.class_universe) - covered
    if stray:
        raise ValidationError(f"class {min(stray)} is not assigned to any phase")
    phases = []
    for index, group in enumerate(groups):
        class_ids = tuple(int(c) for c in group)
        mask = np.isin(data.labels, np.asarray(class_ids, dtype=np.int64))
        if not allow_empty:
            present = set(np.unique(data.labels[mask]).tolist())
            empty = [c for c in class_ids if c not in present]
            if empty:
                raise ValidationError(f"class {empty[0]} has no samples (phase {index})")
        rows = np.flatnonzero(mask)
        phases.append(PhaseDataset(
            phase_index=index,
            features=data.features[rows],
            onehot=one_hot(data.labels[rows], class_ids),
            class_ids=class_ids,
        ))
    validate_disjoint(phases)
    return phases


def split_phases(data: SampleSet, plan: SplitPlan) -> List[PhaseDataset]:
    """
    Split a SampleSet into a base phase and ``plan.phases`` incremental phases.

    Returns:
        K + 1 PhaseDataset objects; their rows together are a permutation of ``data``.
    """
    groups = assign_classes(data.class_universe, plan)
    phases = partition(data, groups)
    logger.debug("Split %d classes into phases of sizes %s",
                 len(data.class_universe), [len(g) for g in groups])
    return phases


def holdout_split(data: SampleSet, fraction: float = DEFAULT_HOLDOUT_FRACTION,
                  seed: int = 0) -> Tuple[SampleSet, SampleSet]:
    """
    Carve a seeded, per-class stratified test set out of ``data``.

    Returns:
        (train, test) sample sets sharing the original class universe.
    """
    if not 0 < fraction < 1:
        raise ValidationError(f"holdout fraction must be in (0, 1), got {fraction}")
    rows = np.arange(data.n_samples)
    try:
        train_rows, test_rows = train_test_split(
            rows, test_size=fraction, random_state=seed, stratify=data.labels)
    except ValueError as e:
        raise ValidationError(f"stratified holdout failed: {e}") from e
    return data.subset(np.sort(train_rows)), data.subset(np.sort(test_rows))


def phase_union(phases: Sequence[PhaseDataset], upto: Optional[int] = None) -> SampleSet:
    """Concatenate phases 0..upto (inclusive) back into a SampleSet."""
    chosen = list(phases if upto is None else phases[:upto + 1])
    if not chosen:
        raise ValidationError("no phases to join")
    features = np.vstack([p.features for p in chosen])
    labels = np.concatenate([p.labels for p in chosen])
    universe = tuple(sorted(c for p in chosen for c in p.class_ids))
    return SampleSet(features, labels, universe)
