#!/usr/bin/env python3
"""
Analytic CIL - Experiment Runner
Reproducible experiments over a configured corpus.

This module provides:
- cmd_run: base training followed by K incremental phases, evaluated after every phase
- cmd_run_repeated: the same run over several seeds with mean and standard deviation
- cmd_verify: the recursive learner against the joint oracle on identical features
- cmd_sweep: one run per value of d_fe, gamma or K, aggregated into a table

Phases run serially. Evaluation of a phase's test rows is split into row
batches scored on a thread pool of at most ACIL_THREADS workers.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence
import json
import logging
import os
import time

import numpy as np
import pandas as pd

from src.core.analytic import AnalyticState, PhaseUpdate, fit_base, predict, update_phase
from src.core.dataset import (PhaseDataset, SampleSet, assign_classes, holdout_split,
                              load_sample_set, partition, phase_union)
from src.core.errors import AcilError, ValidationError, VerificationError, with_phase
from src.core.features import (Extractor, FeatureExpander, build_extractor, extract_and_expand,
                               make_expander)
from src.core.metrics import (PhaseAccuracyLog, average_incremental_accuracy, forgetting_rate,
                              phase_accuracy)
from src.core.oracle import (JointProblem, PhaseBlock, align_columns, compare_states, joint_fit,
                             normal_equations_residual)
from src.core.state_io import save_state, write_state_file
from src.utils.config import ExperimentConfig, evaluation_threads

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
REPORT_FILENAME = "report.json"
STATE_FILENAME = "state.acil"
VERIFY_FILENAME = "verify.json"
SWEEP_CSV_FILENAME = "sweep.csv"
SWEEP_JSON_FILENAME = "sweep.json"

# Exemplars per class a replay method keeps; used only for memory comparison.
REPLAY_EXEMPLARS_PER_CLASS = 20
EVAL_BATCH_ROWS = 1024

SWEEP_AXES = {"d_fe": "d_fe", "gamma": "gamma", "K": "phases"}


@dataclass(frozen=True, eq=False)
class Experiment:
    """A loaded corpus split into phases, with its feature pipeline."""
    config: ExperimentConfig
    train_phases: List[PhaseDataset]
    test_phases: List[PhaseDataset]
    extractor: Extractor
    expander: FeatureExpander

    def expanded(self, phase: PhaseDataset) -> np.ndarray:
        return extract_and_expand(self.extractor, self.expander, phase.features)


@dataclass
class ExperimentReport:
    """
    Outcome of one incremental run.

    Attributes:
        config: echo of the configuration
        phases: per-phase rows (phase, classes, n_train, n_test, A, A_base, seconds)
        average_accuracy: mean of A over all phases
        forgetting: signed forgetting rate and its magnitude
        memory: bytes of W, R, the serialized state and an equivalent replay buffer
        expander: shape and seed of the expansion layer
        created_at: UTC timestamp (excluded from determinism checks)
    """
    config: Dict[str, Any]
    phases: List[Dict[str, Any]]
    average_accuracy: float
    forgetting: Dict[str, float]
    memory: Dict[str, int]
    expander: Dict[str, Any]
    created_at: str = ""
    schema_version: int = REPORT_SCHEMA_VERSION
    verification: Optional[Dict[str, Any]] = None
    state: Optional[AnalyticState] = field(default=None, repr=False)

    @property
    def accuracy_log(self) -> PhaseAccuracyLog:
        return PhaseAccuracyLog([row["A"] for row in self.phases],
                                [row["A_base"] for row in self.phases])

    @property
    def final_accuracy(self) -> float:
        return float(self.phases[-1]["A"])

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "schema_version": self.schema_version,
            "kind": "run",
            "created_at": self.created_at,
            "config": self.config,
            "expander": self.expander,
            "phases": self.phases,
            "average_accuracy": self.average_accuracy,
            "forgetting": self.forgetting,
            "memory": self.memory,
        }
        if self.verification is not None:
            payload["verification"] = self.verification
        return payload

    def deterministic_payload(self) -> Dict[str, Any]:
        """The report without wall-clock fields."""
        payload = self.to_dict()
        payload.pop("created_at")
        payload["phases"] = [{k: v for k, v in row.items() if k != "seconds"}
                             for row in self.phases]
        return payload


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_json(path: str, payload: Dict[str, Any]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    logger.info("Wrote %s", path)


def prepare_experiment(config: ExperimentConfig) -> Experiment:
    """
    Load the corpus, carve out the test set and split both into phases.

    Train and test sets are partitioned with the same class assignment. When
    no separate test files are configured a stratified holdout is drawn with
    the split seed.
    """
    config.check_paths()
    train = load_sample_set(config.train_features, config.train_labels)
    test: SampleSet
    if config.test_features is not None and config.test_labels is not None:
        test = load_sample_set(config.test_features, config.test_labels)
        if test.d_cnn != train.d_cnn:
            raise ValidationError(
                f"dimension mismatch: train features have {train.d_cnn} columns, "
                f"test features have {test.d_cnn}")
    else:
        train, test = holdout_split(train, config.holdout_fraction, config.split_seed)

    groups = assign_classes(train.class_universe, config.split_plan())
    train_phases = partition(train, groups)
    test_phases = partition(test, groups, allow_empty=True)
    # later phases may lack test rows; the base phase anchors A_base and may not
    if test_phases[0].n_samples == 0:
        raise ValidationError(
            f"test set has no rows for the base classes {list(groups[0])}; "
            "base accuracy cannot be measured")
    extractor = build_extractor(config.extractor, train.d_cnn)
    expander = make_expander(extractor.output_width, config.d_fe, config.fe_seed, config.fe_std)
    logger.info("Prepared %d phases: classes per phase %s, d_cnn=%d, d_fe=%d",
                len(groups), [len(g) for g in groups], train.d_cnn, config.d_fe)
    return Experiment(config, train_phases, test_phases, extractor, expander)


def evaluate(state: AnalyticState, X_fe: np.ndarray, labels: np.ndarray,
             threads: int = 1, batch_rows: int = EVAL_BATCH_ROWS) -> float:
    """
    Accuracy of ``state`` on expanded test rows.

    Rows are scored in batches; with more than one thread the batches run on a
    thread pool. The result does not depend on the thread count.
    """
    starts = list(range(0, X_fe.shape[0], batch_rows))

    def work(start: int) -> np.ndarray:
        return predict(state, X_fe[start:start + batch_rows]).class_ids

    if threads <= 1 or len(starts) <= 1:
        predictions = [work(start) for start in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            predictions = list(ex.map(work, starts))
    predicted = np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)
    return phase_accuracy(predicted, labels)


def _memory_accounting(state: AnalyticState, d_cnn: int) -> Dict[str, int]:
    footprint = state.memory_footprint()
    return {
        "W_bytes": footprint["W"],
        "R_bytes": footprint["R"],
        "state_bytes": len(save_state(state)),
        "replay_exemplars_per_class": REPLAY_EXEMPLARS_PER_CLASS,
        "replay_bytes": REPLAY_EXEMPLARS_PER_CLASS * state.n_classes * d_cnn * 8,
    }


def _learn_phase(state: Optional[AnalyticState], X_fe: np.ndarray, phase: PhaseDataset,
                 config: ExperimentConfig) -> AnalyticState:
    if state is None:
        return fit_base(X_fe, phase.onehot, phase.class_ids, config.gamma)
    return update_phase(state, PhaseUpdate(X_fe, phase.onehot, phase.class_ids),
                        chunk_size=config.chunk_size)


def cmd_run(config: ExperimentConfig, write_outputs: bool = True) -> ExperimentReport:
    """
    Run the base agenda and K incremental phases.

    After phase k the model is evaluated on the test rows of phases 0..k (A_k)
    and on the base-phase test rows alone (A_k^Z).

    Args:
        config: the experiment configuration, K >= 1.
        write_outputs: write report.json and state.acil into the output directory.

    Returns:
        The ExperimentReport.
    """
    if config.phases < 1:
        raise ValidationError("run needs at least one incremental phase (K >= 1)")
    experiment = prepare_experiment(config)
    threads = evaluation_threads()
    d_cnn = experiment.expander.d_cnn

    state: Optional[AnalyticState] = None
    log = PhaseAccuracyLog()
    rows: List[Dict[str, Any]] = []
    base_test = experiment.test_phases[0]
    base_X = experiment.expanded(base_test)

    for train_phase in experiment.train_phases:
        k = train_phase.phase_index
        try:
            start_time = time.perf_counter()
            state = _learn_phase(state, experiment.expanded(train_phase), train_phase, config)
            seconds = time.perf_counter() - start_time

            seen = phase_union(experiment.test_phases, upto=k)
            seen_X = extract_and_expand(experiment.extractor, experiment.expander, seen.features)
            accuracy = evaluate(state, seen_X, seen.labels, threads)
            base_accuracy = evaluate(state, base_X, base_test.labels, threads)
        except AcilError as e:
            raise with_phase(e, k) from e

        log.append(accuracy, base_accuracy)
        rows.append({
            "phase": k,
            "classes": list(train_phase.class_ids),
            "n_train": train_phase.n_samples,
            "n_test": seen.n_samples,
            "A": accuracy,
            "A_base": base_accuracy,
            "seconds": seconds,
        })
        logger.info("Phase %d: %d new classes, %d rows, A=%.4f, A_base=%.4f (%.3fs)",
                    k, len(train_phase.class_ids), train_phase.n_samples,
                    accuracy, base_accuracy, seconds)

    assert state is not None
    forgetting = forgetting_rate(log)
    report = ExperimentReport(
        config=config.to_dict(),
        phases=rows,
        average_accuracy=average_incremental_accuracy(log),
        forgetting={"signed": forgetting, "magnitude": abs(forgetting)},
        memory=_memory_accounting(state, d_cnn),
        expander=dict(experiment.expander.describe(),
                      input_width=int(experiment.train_phases[0].features.shape[1])),
        created_at=_timestamp(),
        state=state,
    )
    if write_outputs:
        write_json(os.path.join(config.output_dir, REPORT_FILENAME), report.to_dict())
        write_state_file(os.path.join(config.output_dir, STATE_FILENAME), state)
    return report


def _spread(values: Sequence[float]) -> Dict[str, Any]:
    series = pd.Series(list(values), dtype=float)
    std = float(series.std()) if len(series) > 1 else 0.0
    return {"mean": float(series.mean()), "std": std, "values": [float(v) for v in series]}


def cmd_run_repeated(config: ExperimentConfig, seeds: Sequence[int],
                     write_outputs: bool = True) -> Dict[str, Any]:
    """
    Repeat cmd_run once per seed.

    Each seed replaces both the split seed and the expansion seed. The report
    carries every run and the mean and sample standard deviation of the
    average accuracy and of the forgetting rate.
    """
    if not seeds:
        raise ValidationError("at least one seed is required")
    runs = []
    for seed in seeds:
        logger.info("Run with seed %d", seed)
        runs.append(cmd_run(config.with_overrides(split_seed=seed, fe_seed=seed),
                            write_outputs=False))
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "repeat",
        "created_at": _timestamp(),
        "config": config.to_dict(),
        "seeds": [int(s) for s in seeds],
        "runs": [run.to_dict() for run in runs],
        "summary": {
            "average_accuracy": _spread([r.average_accuracy for r in runs]),
            "forgetting": _spread([r.forgetting["signed"] for r in runs]),
            "forgetting_magnitude": _spread([r.forgetting["magnitude"] for r in runs]),
        },
    }
    if write_outputs:
        write_json(os.path.join(config.output_dir, REPORT_FILENAME), payload)
    return payload


def cmd_verify(config: ExperimentConfig, tol: Optional[float] = None,
               write_outputs: bool = True) -> Dict[str, Any]:
    """
    Check that the recursive learner reproduces the joint ridge solution.

    Both run on the same expanded training features. K = 0 compares the base
    fit against a single-phase joint solve.

    Raises:
        ValidationError: d_fe is above the verification cap.
        VerificationError: the weight discrepancy exceeds the tolerance.
    """
    tolerance = config.tolerance if tol is None else float(tol)
    if tolerance < 0:
        raise ValidationError("tolerance must be >= 0")
    if config.d_fe > config.verify_max_d_fe:
        raise ValidationError(
            f"d_fe={config.d_fe} exceeds the verification cap of {config.verify_max_d_fe}")
    experiment = prepare_experiment(config)

    state: Optional[AnalyticState] = None
    blocks: List[PhaseBlock] = []
    for phase in experiment.train_phases:
        X_fe = experiment.expanded(phase)
        try:
            state = _learn_phase(state, X_fe, phase, config)
        except AcilError as e:
            raise with_phase(e, phase.phase_index) from e
        blocks.append(PhaseBlock(X_fe, phase.onehot, phase.class_ids))
    assert state is not None

    problem = JointProblem(tuple(blocks), config.gamma)
    joint = joint_fit(problem)
    comparison = compare_states(joint, state, tolerance)
    X_all, Y_all = problem.stacked()
    report: Dict[str, Any] = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "verify",
        "created_at": _timestamp(),
        "config": config.to_dict(),
        "phases": len(experiment.train_phases) - 1,
        "comparison": comparison.to_dict(),
        "recursive_residual": normal_equations_residual(
            align_columns(state.W, state.class_registry, problem.class_registry),
            X_all, Y_all, config.gamma),
        "joint_residual": normal_equations_residual(joint.W, X_all, Y_all, config.gamma),
    }
    logger.info("Verification: max |W_joint - W_rec| = %.3e (tol %.1e), %s",
                comparison.max_abs, tolerance, "passed" if comparison.passed else "FAILED")
    if write_outputs:
        write_json(os.path.join(config.output_dir, VERIFY_FILENAME), report)
    if not comparison.passed:
        raise VerificationError(
            f"recursive weights differ from the joint solution by {comparison.max_abs:.3e} "
            f"(tolerance {tolerance:.1e}, class {comparison.worst_class}, "
            f"row {comparison.worst_row})", report)
    return report


def _axis_value(axis: str, value: float) -> Any:
    if axis == "gamma":
        return float(value)
    if float(value) != int(value):
        raise ValidationError(f"{axis} values must be integers, got {value}")
    return int(value)


def cmd_sweep(config: ExperimentConfig, axis: str, values: Sequence[float],
              write_outputs: bool = True) -> pd.DataFrame:
    """
    Run one experiment per value of ``axis``, every other setting shared.

    A failing cell is recorded with its error message and the sweep continues.

    Args:
        config: the base configuration.
        axis: "d_fe", "gamma" or "K".
        values: values of the axis, nonempty.

    Returns:
        One row per value with the average accuracy, forgetting and final accuracy.
    """
    if axis not in SWEEP_AXES:
        raise ValidationError(f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_AXES)}")
    if not values:
        raise ValidationError("sweep values must be nonempty")

    rows = []
    for raw in values:
        row: Dict[str, Any] = {"axis": axis, "value": raw}
        try:
            value = _axis_value(axis, raw)
            row["value"] = value
            report = cmd_run(config.with_overrides(**{SWEEP_AXES[axis]: value}),
                             write_outputs=False)
        except AcilError as e:
            logger.warning("Sweep cell %s=%s failed: %s", axis, raw, e)
            row.update({"average_accuracy": np.nan, "forgetting": np.nan,
                        "forgetting_magnitude": np.nan, "final_accuracy": np.nan,
                        "state_bytes": np.nan, "error": str(e)})
        else:
            row.update({"average_accuracy": report.average_accuracy,
                        "forgetting": report.forgetting["signed"],
                        "forgetting_magnitude": report.forgetting["magnitude"],
                        "final_accuracy": report.final_accuracy,
                        "state_bytes": report.memory["state_bytes"],
                        "error": ""})
        rows.append(row)

    table = pd.DataFrame(rows)
    if write_outputs:
        os.makedirs(config.output_dir, exist_ok=True)
        table.to_csv(os.path.join(config.output_dir, SWEEP_CSV_FILENAME), index=False)
        table.to_json(os.path.join(config.output_dir, SWEEP_JSON_FILENAME),
                      orient="records", indent=2)
        logger.info("Wrote sweep over %s (%d cells) to %s", axis, len(rows), config.output_dir)
    return table
