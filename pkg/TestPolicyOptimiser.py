import unittest
import warnings

import numpy as np

from ChainModel import Policy, SystemParams
from constants import (ALPHA_SWEEP_EPSILON, EPSILON_SWEEP_PARAMS, FAILURE_PROB_PARAMS, GENERAL_CASE_EPSILON,
                       GENERAL_CASE_PARAMS, METRIC_FAILURE_PROB, METRIC_NUM_TX, METRIC_THROUGHPUT, REFERENCE_EPSILON,
                       REFERENCE_KAPPA_1, REFERENCE_PARAMS)
from PolicyOptimiser import ConstraintSpec, PolicyOptimiser, SolveReport, bisect_root
from TheoremChecker import random_params
from utils import BracketError, BudgetError, ConfigurationError, NumericalError

REFERENCE_SIGMA = 0.0293548
N_INSTANCES = 1000
SOLVERS = ("vertical", "enumerate", "horizontal")


class TestConstraintSpec(unittest.TestCase):

    def test_metric_names(self):
        self.assertEqual(ConstraintSpec(metric="failure-prob").metric, METRIC_FAILURE_PROB)
        self.assertEqual(ConstraintSpec.from_dict({"metric": "num_tx", "epsilon": 0.2}).to_dict(),
                         {"metric": "num_tx", "epsilon": 0.2})
        with self.assertRaises(ConfigurationError):
            ConstraintSpec(metric="delay")
        with self.assertRaises(ConfigurationError):
            ConstraintSpec(epsilon=-0.1)
        with self.assertRaises(ConfigurationError):
            ConstraintSpec.from_dict({"metric": "throughput", "epsilon": "abc"})
        with self.assertRaises(ConfigurationError):
            ConstraintSpec.from_dict([0.1])
        with self.assertRaises(ConfigurationError):
            SystemParams.from_dict([0.8, 0.3])


class TestBisectRoot(unittest.TestCase):

    def test_root(self):
        self.assertAlmostEqual(bisect_root(lambda x: x - 0.3, 0.0, 1.0), 0.3, delta=1e-10)
        self.assertEqual(bisect_root(lambda x: x, 0.0, 1.0), 0.0)
        self.assertEqual(bisect_root(lambda x: x - 1.0, 0.0, 1.0), 1.0)
        with self.assertRaises(BracketError):
            bisect_root(lambda x: x + 1.0, 0.0, 1.0)

    def test_tiny_scale_function(self):
        self.assertAlmostEqual(bisect_root(lambda x: 1e-12 * (x - 0.3), 0.0, 1.0), 0.3, delta=1e-13)
        gap = lambda x: 1e-9 * (x - 0.3) ** 3
        x = bisect_root(gap, 0.0, 1.0, keep="nonpositive")
        self.assertLessEqual(gap(x), 0.0)
        self.assertAlmostEqual(x, 0.3, delta=1e-13)


class TestPolicyOptimiser(unittest.TestCase):

    def setUp(self):
        self.params = SystemParams.from_dict(REFERENCE_PARAMS)
        self.optimiser = PolicyOptimiser(self.params)
        self.spec = ConstraintSpec(epsilon=REFERENCE_EPSILON)

    def test_allowance(self):
        self.assertAlmostEqual(self.optimiser.sigma_from_epsilon(self.spec), REFERENCE_SIGMA, delta=1e-7)
        fp = PolicyOptimiser(self.params.replace(t_max=4))
        self.assertAlmostEqual(fp.cost_bound(ConstraintSpec(metric=METRIC_FAILURE_PROB)), 0.0081, delta=1e-12)
        self.assertAlmostEqual(fp.cost_bound(ConstraintSpec(metric=METRIC_FAILURE_PROB, epsilon=0.5)), 0.01215,
                               delta=1e-12)

    def test_vertical_reference(self):
        report = self.optimiser.solve_vertical(self.spec)
        self.assertEqual(report.kappa[0], 1.0)
        self.assertAlmostEqual(report.kappa[1], REFERENCE_KAPPA_1, delta=1e-4)
        self.assertEqual(report.kappa[2], 0.0)
        self.assertTrue(report.binding)
        self.assertAlmostEqual(report.delta, report.sigma, delta=1e-9)
        self.assertTrue(report.valid)
        self.assertEqual(report.to_dict()["method"], "vertical")

    def test_zero_allowance_is_silent(self):
        optimiser = PolicyOptimiser(SystemParams.from_dict(EPSILON_SWEEP_PARAMS))
        report = optimiser.solve_vertical(ConstraintSpec(epsilon=0.0))
        self.assertEqual(report.kappa, [1.0, 0.0, 0.0, 0.0, 0.0])

    def test_no_interference_floods(self):
        optimiser = PolicyOptimiser(self.params.replace(**{"lambda": 0.0}))
        report = optimiser.solve_vertical(ConstraintSpec(epsilon=0.1))
        self.assertEqual(report.kappa, [1.0, 1.0, 1.0])
        self.assertEqual(report.iterations, 0)
        self.assertFalse(report.binding)

    def test_sequential_activation(self):
        optimiser = PolicyOptimiser(SystemParams.from_dict(EPSILON_SWEEP_PARAMS))
        for epsilon in np.linspace(0.0, 0.2, 200):
            kappa = optimiser.solve_vertical(ConstraintSpec(epsilon=epsilon)).kappa
            for j in range(1, len(kappa) - 1):
                if kappa[j + 1] > 0.0:
                    self.assertEqual(kappa[j], 1.0)

    def test_constraint_is_active(self):
        rng = np.random.default_rng(17)
        for metric in (METRIC_THROUGHPUT, METRIC_FAILURE_PROB, METRIC_NUM_TX):
            for _ in range(N_INSTANCES):
                params = random_params(rng, int(rng.integers(1, 7)))
                optimiser = PolicyOptimiser(params)
                spec = ConstraintSpec(metric=metric, epsilon=rng.uniform(0.0, 0.3))
                sigma = optimiser.sigma_from_epsilon(spec)
                solvers = ("enumerate", "horizontal") if metric == METRIC_NUM_TX else SOLVERS
                for solver in solvers:
                    report = optimiser.solve(spec, solver)
                    self.assertLessEqual(report.delta, sigma * (1.0 + 1e-9) + 1e-15)
                    if optimiser.delta_loss(Policy.ones(params.t_max), metric) > sigma:
                        self.assertAlmostEqual(report.delta, sigma, delta=1e-9 * max(sigma, 1e-3))
                    else:
                        self.assertEqual(report.kappa, [1.0] * (params.t_max + 1))

    def test_failure_prob_solvers_agree(self):
        rng = np.random.default_rng(29)
        for _ in range(N_INSTANCES):
            params = random_params(rng, int(rng.integers(1, 7)))
            optimiser = PolicyOptimiser(params)
            spec = ConstraintSpec(metric=METRIC_FAILURE_PROB, epsilon=rng.uniform(0.0, 0.5))
            vertical = optimiser.solve_vertical(spec)
            exhaustive = optimiser.solve_enumerate(spec)
            horizontal = optimiser.solve_horizontal(spec)
            for report in (vertical, exhaustive, horizontal):
                self.assertLessEqual(report.delta, report.sigma * (1.0 + 1e-9) + 1e-15)
            self.assertAlmostEqual(vertical.w_s, exhaustive.w_s, delta=1e-9)
            self.assertLessEqual(horizontal.w_s, vertical.w_s + 1e-9)
            busy = vertical.kappa[1:]
            fractional = [k for k in busy if 0.0 < k < 1.0]
            self.assertLessEqual(len(fractional), 1)
            self.assertEqual(busy, sorted(busy, reverse=True))

    def test_secondary_throughput_falls_with_alpha(self):
        spec = ConstraintSpec(epsilon=ALPHA_SWEEP_EPSILON)
        previous = None
        for alpha in np.linspace(0.05, 0.95, 37):
            optimiser = PolicyOptimiser(SystemParams.from_dict(dict(EPSILON_SWEEP_PARAMS, alpha=alpha)))
            w_s = optimiser.solve_vertical(spec).w_s
            if previous is not None:
                self.assertLessEqual(w_s, previous + 1e-12)
            previous = w_s

    def test_failure_prob_metric(self):
        optimiser = PolicyOptimiser(SystemParams.from_dict(FAILURE_PROB_PARAMS))
        spec = ConstraintSpec(metric=METRIC_FAILURE_PROB, epsilon=0.5)
        vertical = optimiser.solve_vertical(spec)
        exhaustive = optimiser.solve_enumerate(spec)
        self.assertAlmostEqual(vertical.w_s, exhaustive.w_s, delta=1e-9)
        self.assertAlmostEqual(vertical.delta, vertical.sigma, delta=1e-9)

    def test_enumerate_matches_vertical(self):
        exhaustive = self.optimiser.solve_enumerate(self.spec)
        self.assertAlmostEqual(exhaustive.w_s, self.optimiser.solve_vertical(self.spec).w_s, delta=1e-9)
        self.assertAlmostEqual(exhaustive.kappa[1], REFERENCE_KAPPA_1, delta=1e-4)
        self.assertGreater(exhaustive.iterations, 0)

    def test_horizontal_is_suboptimal(self):
        strict = False
        for alpha in np.linspace(0.05, 0.95, 19):
            optimiser = PolicyOptimiser(SystemParams.from_dict(dict(EPSILON_SWEEP_PARAMS, alpha=alpha)))
            spec = ConstraintSpec(epsilon=ALPHA_SWEEP_EPSILON)
            vertical = optimiser.solve_vertical(spec)
            horizontal = optimiser.solve_horizontal(spec)
            self.assertLessEqual(horizontal.w_s, vertical.w_s + 1e-12)
            self.assertGreaterEqual(horizontal.cost_increase_ratio(vertical), -1e-9)
            strict = strict or horizontal.w_s < vertical.w_s - 1e-6
        self.assertTrue(strict)

    def test_interfered_secondary_trends(self):
        spec = ConstraintSpec(epsilon=GENERAL_CASE_EPSILON)
        reports = []
        for lambda_s in np.linspace(0.0, 1.0, 21):
            optimiser = PolicyOptimiser(SystemParams.from_dict(dict(GENERAL_CASE_PARAMS, lambda_s=lambda_s)))
            reports.append(optimiser.solve_enumerate(spec))
        for before, after in zip(reports, reports[1:]):
            self.assertLessEqual(after.w_s, before.w_s + 1e-12)
            self.assertGreaterEqual(after.w_p, before.w_p - 1e-9)
        last = reports[-1]
        self.assertEqual(last.kappa[1], 0.0)
        self.assertEqual(last.kappa[-1], 1.0)

    def test_general_case_guards(self):
        optimiser = PolicyOptimiser(SystemParams.from_dict(GENERAL_CASE_PARAMS).replace(lambda_s=0.5))
        spec = ConstraintSpec(epsilon=GENERAL_CASE_EPSILON)
        with self.assertRaises(ConfigurationError):
            optimiser.solve_vertical(spec)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = optimiser.solve_vertical(spec, allow_general=True)
        self.assertFalse(report.valid)
        self.assertEqual(len(caught), 1)
        with self.assertRaises(ConfigurationError):
            self.optimiser.solve_vertical(ConstraintSpec(metric=METRIC_NUM_TX))

    def test_dispatch(self):
        self.assertEqual(self.optimiser.solve(self.spec, "horizontal").method, "horizontal")
        self.assertEqual(self.optimiser.solve(self.spec, "enumerate").method, "enumerate")
        with self.assertRaises(ConfigurationError):
            self.optimiser.solve(self.spec, "greedy")
        with self.assertRaises(BudgetError):
            PolicyOptimiser(self.params.replace(t_max=17)).solve_enumerate(self.spec)

    def test_report_guards(self):
        with self.assertRaises(NumericalError):
            SolveReport(method="vertical", metric="throughput", epsilon=0.0, sigma=0.0, policy=Policy.ones(2),
                        w_s=0.5, w_p=0.5, delta=0.1, binding=False, iterations=0)

    def test_cost_increase_ratio(self):
        base = dict(method="vertical", metric="throughput", epsilon=0.0, sigma=0.0, policy=Policy.ones(2),
                    w_p=0.5, delta=0.0, binding=False, iterations=0)
        self.assertAlmostEqual(SolveReport(w_s=0.6, **base).cost_increase_ratio(SolveReport(w_s=0.8, **base)), 1.0,
                               delta=1e-12)
        self.assertEqual(SolveReport(w_s=1.0, **base).cost_increase_ratio(SolveReport(w_s=1.0, **base)), 0.0)


if __name__ == "__main__":
    unittest.main()
