#!/usr/bin/env python3
"""
Unit tests for the joint oracle and state comparison.
"""
import os
import sys
import unittest

import numpy as np

# Add parent directory to path to import modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.analytic import AnalyticState, PhaseUpdate, fit_base, update_phase
from src.core.errors import ValidationError
from src.core.oracle import (JointProblem, PhaseBlock, align_columns, compare_states, joint_fit,
                             joint_fit_stacked, normal_equations_residual)


class TestJointProblem(unittest.TestCase):
    """Test cases for problem construction."""

    def setUp(self):
        rng = np.random.default_rng(1)
        self.blocks = (
            PhaseBlock(rng.standard_normal((6, 4)), np.eye(2)[[0, 1, 0, 1, 1, 0]], (0, 1)),
            PhaseBlock(rng.standard_normal((3, 4)), np.eye(1)[[0, 0, 0]], (5,)),
        )

    def test_stacked_labels_are_block_diagonal(self):
        """Earlier phases get zeros in later columns and vice versa."""
        X_all, Y_all = JointProblem(self.blocks, 0.1).stacked()
        self.assertEqual(X_all.shape, (9, 4))
        self.assertEqual(Y_all.shape, (9, 3))
        np.testing.assert_array_equal(Y_all[:6, 2], np.zeros(6))
        np.testing.assert_array_equal(Y_all[6:, :2], np.zeros((3, 2)))
        np.testing.assert_array_equal(Y_all[6:, 2], np.ones(3))

    def test_registry_in_phase_order(self):
        self.assertEqual(JointProblem(self.blocks, 0.1).class_registry, (0, 1, 5))

    def test_rejects_shared_class(self):
        """The same class in two phases is reported."""
        blocks = (self.blocks[0], PhaseBlock(self.blocks[1].X_fe, self.blocks[1].Y, (1,)))
        with self.assertRaises(ValidationError) as ctx:
            JointProblem(blocks, 0.1)
        self.assertIn("class 1", str(ctx.exception))

    def test_rejects_bad_problem(self):
        """No phases, non-positive gamma or mixed widths are invalid."""
        with self.assertRaises(ValidationError):
            JointProblem((), 0.1)
        with self.assertRaises(ValidationError):
            JointProblem(self.blocks, 0.0)
        narrow = PhaseBlock(np.ones((3, 2)), np.ones((3, 1)), (9,))
        with self.assertRaises(ValidationError):
            JointProblem((self.blocks[0], narrow), 0.1)


class TestJointFit(unittest.TestCase):
    """Test cases for the two oracle solvers."""

    def setUp(self):
        rng = np.random.default_rng(2)
        self.blocks = tuple(
            PhaseBlock(rng.standard_normal((12, 10)), np.eye(3)[rng.integers(0, 3, 12)],
                       (3 * k, 3 * k + 1, 3 * k + 2))
            for k in range(4))
        self.problem = JointProblem(self.blocks, 0.05)

    def test_gram_and_stacked_solvers_agree(self):
        """Both constructions give the same weights."""
        gram = joint_fit(self.problem)
        stacked = joint_fit_stacked(self.problem)
        np.testing.assert_allclose(gram.W, stacked.W, atol=1e-8)
        self.assertIsNone(stacked.R)

    def test_r_is_the_direct_inverse(self):
        X_all, _ = self.problem.stacked()
        expected = np.linalg.inv(X_all.T @ X_all + 0.05 * np.eye(10))
        np.testing.assert_allclose(joint_fit(self.problem).R, expected, atol=1e-10)

    def test_residual_vanishes_at_the_solution(self):
        X_all, Y_all = self.problem.stacked()
        W = joint_fit(self.problem).W
        self.assertLess(normal_equations_residual(W, X_all, Y_all, 0.05), 1e-10)
        self.assertGreater(normal_equations_residual(W + 1e-3, X_all, Y_all, 0.05), 1e-6)

    def test_phase_order_only_permutes_columns(self):
        """Reordering the phases moves W's columns and leaves R alone."""
        forward = joint_fit(self.problem)
        reordered = JointProblem(tuple(self.blocks[i] for i in (2, 0, 3, 1)), 0.05)
        shuffled = joint_fit(reordered)
        shuffled_ids = reordered.class_registry
        self.assertEqual(sorted(shuffled_ids), sorted(self.problem.class_registry))
        self.assertNotEqual(shuffled_ids, self.problem.class_registry)
        W = align_columns(shuffled.W, shuffled_ids, self.problem.class_registry)
        np.testing.assert_allclose(W, forward.W, atol=1e-10)
        np.testing.assert_allclose(shuffled.R, forward.R, atol=1e-10)


class TestCompareStates(unittest.TestCase):
    """Test cases for comparing a joint solution with a recursive state."""

    def setUp(self):
        rng = np.random.default_rng(4)
        self.blocks = tuple(
            PhaseBlock(rng.standard_normal((15, 8)), np.eye(2)[rng.integers(0, 2, 15)],
                       (2 * k, 2 * k + 1))
            for k in range(3))
        state = fit_base(self.blocks[0].X_fe, self.blocks[0].Y, self.blocks[0].class_ids, 0.1)
        for block in self.blocks[1:]:
            state = update_phase(state, PhaseUpdate(block.X_fe, block.Y, block.class_ids))
        self.state = state
        self.joint = joint_fit(JointProblem(self.blocks, 0.1))

    def test_recursive_run_passes(self):
        report = compare_states(self.joint, self.state, 1e-8)
        self.assertTrue(report.passed)
        self.assertLess(report.max_abs, 1e-10)
        self.assertLess(report.r_rel_frobenius, 1e-10)

    def test_perturbed_state_fails(self):
        """A perturbation above the tolerance is located by class."""
        W = np.array(self.state.W)
        W[3, 4] += 1e-6
        perturbed = AnalyticState(W, self.state.R, self.state.class_registry, 0.1, 2)
        report = compare_states(self.joint, perturbed, 1e-8)
        self.assertFalse(report.passed)
        self.assertEqual(report.worst_class, 4)
        self.assertEqual(report.worst_row, 3)
        self.assertAlmostEqual(report.max_abs, 1e-6, delta=1e-9)
        self.assertEqual(report.to_dict()["passed"], False)

    def test_zero_tolerance(self):
        """At tolerance zero the result follows the exact discrepancy."""
        report = compare_states(self.joint, self.state, 0.0)
        self.assertEqual(report.passed, report.max_abs == 0.0)

    def test_class_set_mismatch(self):
        """Different class sets cannot be compared."""
        base = fit_base(self.blocks[0].X_fe, self.blocks[0].Y, self.blocks[0].class_ids, 0.1)
        with self.assertRaises(ValidationError) as ctx:
            compare_states(self.joint, base, 1e-8)
        self.assertIn("class-set mismatch", str(ctx.exception))

    def test_single_phase(self):
        """With one phase the base fit is the joint solution."""
        block = self.blocks[0]
        base = fit_base(block.X_fe, block.Y, block.class_ids, 0.1)
        joint = joint_fit(JointProblem((block,), 0.1))
        report = compare_states(joint, base, 1e-12)
        self.assertTrue(report.passed)
        np.testing.assert_allclose(base.W, joint.W, rtol=0, atol=1e-12)
        np.testing.assert_allclose(base.R, joint.R, rtol=0, atol=1e-12)


if __name__ == '__main__':
    unittest.main()
