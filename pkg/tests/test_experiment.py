#!/usr/bin/env python3
"""
Desk-scale tests of the experiment runner on the 8x8 digits corpus.
"""
import json
import os
import sys
import tempfile
import unittest
from fractions import Fraction
from unittest.mock import patch

import numpy as np

# Add parent directory to path to import modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.analytic import fit_base
from src.core.errors import NumericalError, ValidationError, VerificationError
from src.experiment.digits import FEATURES_FILENAME, LABELS_FILENAME, export_digits
from src.experiment.runner import (REPORT_FILENAME, STATE_FILENAME, SWEEP_CSV_FILENAME,
                                   VERIFY_FILENAME, cmd_run, cmd_run_repeated, cmd_sweep,
                                   cmd_verify, evaluate)
from src.utils.config import load_config
from src.utils.matrix_io import read_feature_file, read_label_file, write_feature_file, write_label_file


class DigitsTestCase(unittest.TestCase):
    """Exports the digits corpus once per test class."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.corpus_dir = os.path.join(cls.tmp.name, "digits")
        cls.base_config = load_config(export_digits(cls.corpus_dir))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def config(self, **overrides):
        output_dir = tempfile.mkdtemp(dir=self.tmp.name)
        return self.base_config.with_overrides(output_dir=output_dir, **overrides)


class TestRun(DigitsTestCase):
    """Test cases for cmd_run."""

    def test_report_and_state_are_written(self):
        """Five base classes, K = 5, d_fe = 1024, gamma = 0.1."""
        config = self.config()
        report = cmd_run(config)
        self.assertEqual(len(report.phases), 6)
        self.assertEqual(len(report.phases[0]["classes"]), 5)
        self.assertAlmostEqual(report.average_accuracy,
                               float(np.mean([row["A"] for row in report.phases])), places=12)
        self.assertGreater(report.final_accuracy, 0.8)

        with open(os.path.join(config.output_dir, REPORT_FILENAME)) as f:
            saved = json.load(f)
        self.assertEqual(saved["schema_version"], 1)
        self.assertEqual(len(saved["phases"]), 6)
        self.assertEqual(saved["average_accuracy"], report.average_accuracy)
        state_path = os.path.join(config.output_dir, STATE_FILENAME)
        self.assertEqual(os.path.getsize(state_path), saved["memory"]["state_bytes"])
        self.assertEqual(saved["memory"]["R_bytes"], 1024 * 1024 * 8)
        self.assertEqual(saved["memory"]["replay_bytes"], 20 * 10 * 64 * 8)
        self.assertEqual(saved["expander"]["input_width"], 64)

    def test_base_accuracy_tracks_base_test_set(self):
        report = cmd_run(self.config(), write_outputs=False)
        first = report.phases[0]
        self.assertEqual(first["A"], first["A_base"])
        self.assertAlmostEqual(report.forgetting["signed"],
                               report.phases[-1]["A_base"] - first["A_base"])
        self.assertEqual(report.forgetting["magnitude"], abs(report.forgetting["signed"]))

    def test_deterministic(self):
        """Two runs of the same config give the same report apart from timings."""
        a = cmd_run(self.config(), write_outputs=False)
        b = cmd_run(self.config(), write_outputs=False)
        a_payload, b_payload = a.deterministic_payload(), b.deterministic_payload()
        a_payload["config"].pop("output_dir")
        b_payload["config"].pop("output_dir")
        self.assertEqual(json.dumps(a_payload), json.dumps(b_payload))

    def test_final_accuracy_independent_of_phase_count(self):
        """K = 1, K = 5 and chunked updates end with the same model accuracy."""
        finals = [
            cmd_run(self.config(phases=1), write_outputs=False).final_accuracy,
            cmd_run(self.config(phases=5), write_outputs=False).final_accuracy,
            cmd_run(self.config(phases=5, chunk_size=37), write_outputs=False).final_accuracy,
        ]
        self.assertLessEqual(max(finals) - min(finals), 1e-6)

    def test_empty_incremental_phase(self):
        """An incremental phase without classes changes nothing."""
        report = cmd_run(self.config(base_fraction=Fraction(1), phases=1), write_outputs=False)
        self.assertEqual(report.phases[1]["n_train"], 0)
        self.assertEqual(report.phases[1]["A"], report.phases[0]["A"])
        self.assertEqual(report.forgetting["signed"], 0.0)

    def test_requires_an_incremental_phase(self):
        with self.assertRaises(ValidationError):
            cmd_run(self.config(phases=0))

    def test_separate_test_files(self):
        """Configured test files replace the holdout split."""
        features = read_feature_file(os.path.join(self.corpus_dir, FEATURES_FILENAME))
        labels = read_label_file(os.path.join(self.corpus_dir, LABELS_FILENAME))
        paths = {}
        for name, rows in (("train", slice(0, None, 2)), ("test", slice(1, None, 2))):
            paths[name] = (os.path.join(self.tmp.name, f"{name}.bin"),
                           os.path.join(self.tmp.name, f"{name}.txt"))
            write_feature_file(paths[name][0], features[rows])
            write_label_file(paths[name][1], labels[rows])
        config = self.config(train_features=paths["train"][0], train_labels=paths["train"][1],
                             test_features=paths["test"][0], test_labels=paths["test"][1])
        report = cmd_run(config, write_outputs=False)
        self.assertEqual(report.phases[-1]["n_test"], labels[1::2].size)

    def test_test_set_without_base_classes(self):
        """A test file missing every base class is rejected before training."""
        features = read_feature_file(os.path.join(self.corpus_dir, FEATURES_FILENAME))
        labels = read_label_file(os.path.join(self.corpus_dir, LABELS_FILENAME))
        rows = labels >= 5
        test_features = os.path.join(self.tmp.name, "late_classes.bin")
        test_labels = os.path.join(self.tmp.name, "late_classes.txt")
        write_feature_file(test_features, features[rows])
        write_label_file(test_labels, labels[rows])
        config = self.config(test_features=test_features, test_labels=test_labels,
                             shuffle_classes=False)
        with self.assertRaises(ValidationError) as ctx:
            cmd_run(config, write_outputs=False)
        self.assertIn("no rows for the base classes [0, 1, 2, 3, 4]", str(ctx.exception))
        self.assertFalse(str(ctx.exception).startswith("phase"))

    def test_errors_name_the_phase(self):
        """A failure inside a phase reports the phase index."""
        with patch('src.experiment.runner.update_phase',
                   side_effect=NumericalError("factorization failed")):
            with self.assertRaises(NumericalError) as ctx:
                cmd_run(self.config(d_fe=128), write_outputs=False)
        self.assertTrue(str(ctx.exception).startswith("phase 1: "))


class TestAblations(DigitsTestCase):
    """Regularization and expansion-size properties on the desk corpus."""

    def test_gamma_band(self):
        """Average accuracy barely moves across gamma in [1e-3, 1e-1]."""
        values = [cmd_run(self.config(d_fe=256, gamma=gamma), write_outputs=False).average_accuracy
                  for gamma in (1e-1, 1e-2, 1e-3)]
        self.assertLess(max(values) - min(values), 0.02)

    def test_vanishing_gamma_is_recorded(self):
        """A near-zero gamma either runs or fails with a numerical error."""
        try:
            report = cmd_run(self.config(d_fe=256, gamma=1e-12), write_outputs=False)
        except NumericalError:
            return
        self.assertTrue(0.0 <= report.average_accuracy <= 1.0)

    def test_expansion_helps(self):
        """No expansion (d_fe = d_cnn) is worse than a 16x expansion for every seed."""
        for seed in (0, 1, 2):
            with self.subTest(seed=seed):
                narrow = cmd_run(self.config(d_fe=64, split_seed=seed, fe_seed=seed),
                                 write_outputs=False)
                wide = cmd_run(self.config(d_fe=1024, split_seed=seed, fe_seed=seed),
                               write_outputs=False)
                self.assertLess(narrow.average_accuracy, wide.average_accuracy)


class TestVerify(DigitsTestCase):
    """Test cases for cmd_verify."""

    def test_passes_at_default_tolerance(self):
        config = self.config(d_fe=256)
        report = cmd_verify(config)
        self.assertTrue(report["comparison"]["passed"])
        self.assertLessEqual(report["comparison"]["max_abs"], 1e-8)
        self.assertTrue(os.path.exists(os.path.join(config.output_dir, VERIFY_FILENAME)))

    def test_zero_phases(self):
        report = cmd_verify(self.config(d_fe=256, base_fraction=Fraction(1), phases=0))
        self.assertTrue(report["comparison"]["passed"])
        self.assertEqual(report["phases"], 0)

    def test_zero_tolerance_reports_the_noise_floor(self):
        with self.assertRaises(VerificationError) as ctx:
            cmd_verify(self.config(d_fe=256), tol=0.0)
        max_abs = ctx.exception.report["comparison"]["max_abs"]
        self.assertGreater(max_abs, 0.0)
        self.assertLess(max_abs, 1e-8)

    def test_cap(self):
        with self.assertRaises(ValidationError) as ctx:
            cmd_verify(self.config(d_fe=4096))
        self.assertIn("verification cap", str(ctx.exception))


class TestSweepAndRepeat(DigitsTestCase):
    """Test cases for cmd_sweep and repeated runs."""

    def test_phase_count_sweep(self):
        """Failing cells are recorded and the rest of the sweep completes."""
        config = self.config(d_fe=256)
        table = cmd_sweep(config, "K", [2, 5, 20])
        self.assertEqual(len(table), 3)
        self.assertEqual(table["error"].iloc[0], "")
        self.assertIn("too few classes", table["error"].iloc[2])
        finals = table["final_accuracy"].iloc[:2]
        self.assertLessEqual(abs(finals.iloc[0] - finals.iloc[1]), 1e-6)
        self.assertTrue(os.path.exists(os.path.join(config.output_dir, SWEEP_CSV_FILENAME)))

    def test_sweep_validation(self):
        with self.assertRaises(ValidationError):
            cmd_sweep(self.config(), "lr", [0.1])
        with self.assertRaises(ValidationError):
            cmd_sweep(self.config(), "gamma", [])

    def test_non_integer_value_is_a_failed_cell(self):
        """A fractional d_fe fails its own cell; the cells around it still run."""
        table = cmd_sweep(self.config(), "d_fe", [64, 64.5, 128], write_outputs=False)
        self.assertEqual(len(table), 3)
        self.assertIn("must be integers", table["error"].iloc[1])
        self.assertTrue(np.isnan(table["average_accuracy"].iloc[1]))
        self.assertEqual(list(table["error"].iloc[[0, 2]]), ["", ""])
        self.assertEqual(list(table["value"].iloc[[0, 2]]), [64, 128])
        self.assertFalse(table["average_accuracy"].iloc[[0, 2]].isna().any())

    def test_repeat(self):
        config = self.config(d_fe=128)
        payload = cmd_run_repeated(config, [0, 1])
        self.assertEqual(payload["seeds"], [0, 1])
        self.assertEqual(len(payload["runs"]), 2)
        summary = payload["summary"]["average_accuracy"]
        self.assertAlmostEqual(summary["mean"], float(np.mean(summary["values"])))
        self.assertEqual(payload["runs"][1]["config"]["fe_seed"], 1)
        self.assertTrue(os.path.exists(os.path.join(config.output_dir, REPORT_FILENAME)))


class TestEvaluate(unittest.TestCase):
    """Test cases for batched evaluation."""

    def test_thread_count_does_not_change_accuracy(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((300, 10))
        labels = rng.integers(0, 3, 300)
        state = fit_base(X, np.eye(3)[labels], (0, 1, 2))
        single = evaluate(state, X, labels, threads=1, batch_rows=32)
        pooled = evaluate(state, X, labels, threads=4, batch_rows=32)
        self.assertEqual(single, pooled)


if __name__ == '__main__':
    unittest.main()
