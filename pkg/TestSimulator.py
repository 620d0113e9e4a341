import os
import unittest

import numpy as np

from ChainModel import Policy, SystemParams
from constants import EPSILON_SWEEP_PARAMS, REFERENCE_KAPPA_1, REFERENCE_PARAMS, VALIDATION_SIGMAS
from PolicyOptimiser import ConstraintSpec, PolicyOptimiser
from Simulator import TRACE_COLUMNS, SimConfig, Simulator, SimStats
from TheoremChecker import random_params
from utils import ConfigurationError, InvariantViolation

# Agreement within this many standard errors on a single field
SIGMAS = 3.0


class TestSimulator(unittest.TestCase):

    def setUp(self):
        self.params = SystemParams.from_dict(REFERENCE_PARAMS)
        self.simulator = Simulator(self.params)
        self.policy = Policy((1.0, REFERENCE_KAPPA_1, 0.0))

    def test_perfect_links(self):
        params = self.params.replace(rho=0.0, **{"lambda": 0.0})
        stats = Simulator(params).simulate(Policy.ones(2), SimConfig(n_slots=20000, seed=1))
        self.assertEqual(stats.w_s_hat, 1.0)
        self.assertEqual(stats.fp_hat, 0.0)
        self.assertEqual(stats.ntx_hat, 1.0)
        self.assertAlmostEqual(stats.w_p_hat, params.alpha, delta=0.02)

    def test_full_interference(self):
        params = self.params.replace(**{"lambda": 1.0})
        stats = Simulator(params).simulate(Policy.ones(2), SimConfig(n_slots=20000, seed=1))
        self.assertEqual(stats.w_p_hat, 0.0)
        self.assertEqual(stats.fp_hat, 1.0)

    def test_reference_policy(self):
        stats = self.simulator.simulate(self.policy, SimConfig(n_slots=300000, seed=42))
        metrics = self.simulator.metrics(self.policy)
        self.assertLess(abs(stats.w_p_hat - metrics.w_p), SIGMAS * stats.stderr["w_p"])
        self.assertLess(abs(stats.w_s_hat - metrics.w_s), SIGMAS * stats.stderr["w_s"])
        steady_state = self.simulator.steady_state(self.policy)
        self.assertLessEqual(stats.max_deviation(metrics, steady_state), VALIDATION_SIGMAS)
        self.assertAlmostEqual(sum(stats.occupancy_hat), 1.0, delta=1e-12)
        self.assertEqual(stats.slots_counted, 300000 - 1000)

    @unittest.skipUnless(os.environ.get("RUN_SLOW"), "set RUN_SLOW=1 for the long Monte Carlo run")
    def test_random_instances_long_run(self):
        rng = np.random.default_rng(2025)
        for k in range(20):
            params = random_params(rng, int(rng.integers(1, 7)))
            simulator = Simulator(params)
            policy = PolicyOptimiser(params).solve_vertical(ConstraintSpec(epsilon=rng.uniform(0.0, 0.3))).policy
            stats = simulator.simulate(policy, SimConfig(n_slots=1000000, seed=100 + k))
            metrics = simulator.metrics(policy)
            self.assertLess(abs(stats.w_p_hat - metrics.w_p), SIGMAS * stats.stderr["w_p"])
            self.assertLess(abs(stats.w_s_hat - metrics.w_s), SIGMAS * stats.stderr["w_s"])

    def test_silent_secondary_costs(self):
        simulator = Simulator(SystemParams.from_dict(EPSILON_SWEEP_PARAMS))
        stats = simulator.simulate(Policy.zeros(4), SimConfig(n_slots=200000, seed=7))
        self.assertEqual(stats.w_s_hat, 0.0)
        self.assertLess(abs(stats.fp_hat - 0.0081), SIGMAS * stats.stderr["fp"])
        self.assertLess(abs(stats.ntx_hat - 1.417), SIGMAS * stats.stderr["ntx"])

    def test_deterministic_seed(self):
        config = SimConfig(n_slots=20000, seed=5)
        first = self.simulator.simulate(self.policy, config)
        second = self.simulator.simulate(self.policy, config)
        self.assertEqual(first.to_dict(), second.to_dict())
        other = self.simulator.simulate(self.policy, SimConfig(n_slots=20000, seed=6))
        self.assertNotEqual(first.to_dict(), other.to_dict())
        self.assertEqual(first.to_dict()["prng"], "PCG64")

    def test_trace(self):
        stats = self.simulator.simulate(self.policy, SimConfig(n_slots=500, seed=3, warmup_slots=100), trace=True)
        self.assertEqual(list(stats.trace.columns), TRACE_COLUMNS)
        self.assertEqual(len(stats.trace), 400)
        self.assertEqual(stats.trace["slot"].iloc[0], 100)
        self.assertTrue(stats.trace["state"].between(0, 2).all())
        self.assertFalse(stats.trace.loc[stats.trace["state"] == 0, "primary_success"].any())
        self.assertNotIn("trace", stats.to_dict())
        self.assertIsNone(self.simulator.simulate(self.policy, SimConfig(n_slots=500, seed=3, warmup_slots=100)).trace)

    def test_sim_config(self):
        with self.assertRaises(ConfigurationError):
            SimConfig(n_slots=0)
        with self.assertRaises(ConfigurationError):
            SimConfig(n_slots=1000, warmup_slots=-1)
        with self.assertRaises(ConfigurationError):
            SimConfig(n_slots=1050, warmup_slots=1000)
        self.assertEqual(SimConfig(n_slots=2000, warmup_slots=500).counted_slots, 1500)

    def test_wrong_policy_length(self):
        with self.assertRaises(InvariantViolation):
            self.simulator.simulate(Policy.ones(3), SimConfig(n_slots=2000))

    def test_max_deviation_with_zero_spread(self):
        metrics = self.simulator.metrics(self.policy)
        stderr = {"w_p": 0.0, "w_s": 0.0, "fp": 0.0, "ntx": 0.0}
        exact = SimStats(w_p_hat=metrics.w_p, w_s_hat=metrics.w_s, fp_hat=metrics.j_fp, ntx_hat=metrics.j_ntx,
                         occupancy_hat=[], stderr=stderr, slots_counted=1, seed=0)
        self.assertEqual(exact.max_deviation(metrics), 0.0)
        off = SimStats(w_p_hat=metrics.w_p + 0.1, w_s_hat=metrics.w_s, fp_hat=metrics.j_fp, ntx_hat=np.nan,
                       occupancy_hat=[], stderr=stderr, slots_counted=1, seed=0)
        self.assertEqual(off.max_deviation(metrics), float("inf"))


if __name__ == "__main__":
    unittest.main()
