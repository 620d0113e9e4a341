import unittest

import numpy as np
import numpy.testing as npt
from scipy.optimize import linprog

from ChainModel import Policy, SystemParams
from constants import (EPSILON_SWEEP_PARAMS, GENERAL_CASE_PARAMS, METRIC_FAILURE_PROB, METRIC_NUM_TX,
                       METRIC_THROUGHPUT, REFERENCE_EPSILON, REFERENCE_KAPPA_1, REFERENCE_PARAMS)
from OccupancyLP import Occupancy, OccupancyLP
from PolicyOptimiser import ConstraintSpec
from Simplex import LinearProgram
from TheoremChecker import random_params
from utils import ConfigurationError, InfeasibleError, NumericalError


def _is_vertical(kappa, tol=1e-6):
    busy = kappa[1:]
    first = next((i for i, k in enumerate(busy) if k < 1.0 - tol), len(busy))
    return all(k <= tol for k in busy[first + 1:])


class TestOccupancyLP(unittest.TestCase):

    def setUp(self):
        self.params = SystemParams.from_dict(REFERENCE_PARAMS)
        self.lp = OccupancyLP(self.params)

    def test_transition_tensor(self):
        zeta = self.lp.transition_tensor()
        npt.assert_allclose(zeta.sum(axis=2), np.ones((2, 3)), atol=1e-12)
        npt.assert_allclose(zeta[0, 1], [0.14, 0.56, 0.30], atol=1e-12)
        npt.assert_allclose(zeta[1, 1], [0.098, 0.392, 0.51], atol=1e-12)

    def test_lp_layout(self):
        lp = OccupancyLP(SystemParams.from_dict(EPSILON_SWEEP_PARAMS)).build_lp(ConstraintSpec(epsilon=0.1))
        self.assertEqual(lp.n_vars, 10)
        self.assertEqual(lp.a_eq.shape, (5, 10))
        self.assertEqual(lp.a_ub.shape, (1, 10))
        self.assertEqual(lp.fixed_zero, [0])
        self.assertEqual(lp.labels[:3], ["z_0(0)", "z_1(0)", "z_0(1)"])

    def test_per_state_values(self):
        gamma, omega = self.lp.per_state_values(METRIC_THROUGHPUT)
        npt.assert_allclose(gamma, [[1.0, 1.0], [0.3, 0.51], [0.3, 0.51]], atol=1e-12)
        npt.assert_allclose(omega, [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], atol=1e-12)
        with self.assertRaises(ConfigurationError):
            self.lp.per_state_values(METRIC_FAILURE_PROB)
        gamma, _ = self.lp.per_state_values(METRIC_NUM_TX, bound=1.5)
        npt.assert_allclose(gamma, [[0.0, 0.0], [-0.5, -0.5], [1.0, 1.0]], atol=1e-12)

    def test_reference_instance(self):
        report = self.lp.solve(ConstraintSpec(epsilon=REFERENCE_EPSILON))
        self.assertEqual(report.method, "lp")
        self.assertEqual(report.kappa[0], 1.0)
        self.assertAlmostEqual(report.kappa[1], REFERENCE_KAPPA_1, delta=1e-4)
        self.assertAlmostEqual(report.kappa[2], 0.0, delta=1e-9)
        self.assertTrue(report.binding)
        vertical = self.lp.solve(ConstraintSpec(epsilon=REFERENCE_EPSILON), "vertical")
        self.assertAlmostEqual(report.w_s, vertical.w_s, delta=1e-7)

    def test_zero_allowance(self):
        lp = OccupancyLP(SystemParams.from_dict(EPSILON_SWEEP_PARAMS))
        report = lp.solve(ConstraintSpec(epsilon=0.0))
        npt.assert_allclose(report.kappa, [1.0, 0.0, 0.0, 0.0, 0.0], atol=1e-9)

    def test_matches_structured_solvers(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            t_max = int(rng.integers(1, 7))
            params = random_params(rng, t_max)
            lp = OccupancyLP(params)
            for metric, top in ((METRIC_THROUGHPUT, 0.3), (METRIC_FAILURE_PROB, 2.0)):
                spec = ConstraintSpec(metric=metric, epsilon=rng.uniform(0.0, top))
                ours = lp.solve(spec)
                vertical = lp.solve(spec, "vertical")
                exhaustive = lp.solve(spec, "enumerate")
                self.assertAlmostEqual(ours.w_s, vertical.w_s, delta=1e-7)
                self.assertAlmostEqual(ours.w_s, exhaustive.w_s, delta=1e-7)
                self.assertAlmostEqual(vertical.w_s, exhaustive.w_s, delta=1e-9)
                for report in (vertical, exhaustive):
                    self.assertLessEqual(report.delta, report.sigma * (1.0 + 1e-9) + 1e-15)
                self.assertTrue(_is_vertical(ours.kappa))
                self.assertTrue(_is_vertical(exhaustive.kappa))

    def test_number_of_transmissions(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            params = random_params(rng, int(rng.integers(1, 6)))
            lp = OccupancyLP(params)
            spec = ConstraintSpec(metric=METRIC_NUM_TX, epsilon=rng.uniform(0.0, 0.3))
            ours = lp.solve(spec)
            self.assertLessEqual(ours.delta, ours.sigma + 1e-9)
            self.assertAlmostEqual(ours.w_s, lp.solve(spec, "enumerate").w_s, delta=1e-7)

    def test_interfered_secondary(self):
        rng = np.random.default_rng(9)
        for lambda_s in np.linspace(0.0, 1.0, 11):
            lp = OccupancyLP(SystemParams.from_dict(dict(GENERAL_CASE_PARAMS, lambda_s=lambda_s)))
            spec = ConstraintSpec(epsilon=rng.uniform(0.0, 0.2))
            self.assertAlmostEqual(lp.solve(spec).w_s, lp.solve(spec, "enumerate").w_s, delta=1e-7)

    def test_matches_linprog(self):
        lp = OccupancyLP(SystemParams.from_dict(EPSILON_SWEEP_PARAMS))
        program = lp.build_lp(ConstraintSpec(epsilon=0.05))
        bounds = [(0.0, 0.0) if k in program.fixed_zero else (0.0, None) for k in range(program.n_vars)]
        reference = linprog(-program.c, A_ub=program.a_ub, b_ub=program.b_ub, A_eq=program.a_eq,
                            b_eq=program.b_eq, bounds=bounds, method="highs")
        self.assertAlmostEqual(lp.solve(ConstraintSpec(epsilon=0.05)).w_s, -reference.fun, delta=1e-8)

    def test_occupancy_from_steady_state(self):
        policy = Policy((1.0, 0.4, 0.1))
        pi = self.lp.steady_state(policy).as_array()
        kappa = policy.as_array()
        occupancy = Occupancy(np.column_stack((pi * (1.0 - kappa), pi * kappa)))
        self.assertLess(self.lp.flow_residual(occupancy), 1e-12)
        npt.assert_allclose(OccupancyLP.extract_policy(occupancy).kappa, policy.kappa, atol=1e-12)
        npt.assert_allclose(occupancy.state_probabilities(), pi, atol=1e-15)
        self.assertEqual(occupancy.t_max, 2)

    def test_unvisited_state(self):
        occupancy = Occupancy(np.array([[0.0, 0.5], [0.25, 0.25], [0.0, 0.0]]))
        self.assertEqual(OccupancyLP.extract_policy(occupancy).kappa, (1.0, 0.5, 0.0))

    def test_invalid_occupancy(self):
        with self.assertRaises(NumericalError):
            Occupancy(np.array([[0.5, 0.2], [0.1, 0.1]]))
        with self.assertRaises(NumericalError):
            Occupancy(np.array([[0.6, 0.5], [-0.1, 0.0]]))

    def test_infeasible_program(self):
        program = LinearProgram(c=[1.0, 1.0], a_eq=[[1.0, 1.0]], b_eq=[-1.0], a_ub=np.zeros((0, 2)), b_ub=[])
        with self.assertRaises(InfeasibleError):
            self.lp.simplex_solve(program)


if __name__ == "__main__":
    unittest.main()
