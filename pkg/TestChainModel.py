import unittest

import numpy as np
import numpy.testing as npt

from ChainModel import ChainModel, Metrics, Policy, StateDistribution, SystemParams
from constants import METRIC_FAILURE_PROB, METRIC_NUM_TX, METRIC_THROUGHPUT, REFERENCE_PARAMS
from utils import ConfigurationError, DomainError, InvariantViolation

SILENT_COST = 0.412903
FLOODED_LOSS = 0.166699
IDLE_ONLY_PI = [0.161290, 0.645161, 0.193548]


class TestSystemParams(unittest.TestCase):

    def test_from_dict_maps_lambda(self):
        params = SystemParams.from_dict(REFERENCE_PARAMS)
        self.assertEqual(params.lam, 0.3)
        self.assertEqual(params.t_max, 2)
        self.assertEqual(params.to_dict()["lambda"], 0.3)
        self.assertEqual(SystemParams.from_dict(params.to_dict()), params)

    def test_derived_probabilities(self):
        params = SystemParams(alpha=0.5, rho=0.2, lam=0.5, nu=0.2, lambda_s=0.25, t_max=3)
        self.assertAlmostEqual(params.rho_star, 0.6, delta=1e-12)
        self.assertAlmostEqual(params.nu_star, 0.4, delta=1e-12)
        self.assertAlmostEqual(params.coupling, 0.4, delta=1e-12)
        self.assertFalse(params.z_channel)
        self.assertTrue(params.replace(lambda_s=0.0).z_channel)
        self.assertEqual(params.replace(**{"lambda": 0.1}).lam, 0.1)

    def test_invalid_params(self):
        with self.assertRaises(InvariantViolation):
            SystemParams(alpha=0.0, rho=0.3, lam=0.3)
        with self.assertRaises(InvariantViolation):
            SystemParams(alpha=0.5, rho=1.3, lam=0.3)
        with self.assertRaises(InvariantViolation):
            SystemParams(alpha=0.5, rho=0.3, lam=0.3, nu=1.0)
        with self.assertRaises(InvariantViolation):
            SystemParams(alpha=0.5, rho=0.3, lam=0.3, t_max=0)
        with self.assertRaises(ConfigurationError):
            SystemParams.from_dict({"alpha": 0.5, "rho": 0.3, "lambda": 0.3, "gamma": 1.0})
        with self.assertRaises(ConfigurationError):
            SystemParams.from_dict({"alpha": 0.5})


class TestPolicy(unittest.TestCase):

    def test_constructors(self):
        self.assertEqual(Policy.zeros(2).kappa, (0.0, 0.0, 0.0))
        self.assertEqual(Policy.ones(2).kappa, (1.0, 1.0, 1.0))
        self.assertEqual(Policy.horizontal(3, 0.4).kappa, (1.0, 0.4, 0.4, 0.4))
        self.assertEqual(Policy.vertical(4, 1, 0.5).kappa, (1.0, 1.0, 0.5, 0.0, 0.0))
        self.assertEqual(Policy.vertical(2, 2).kappa, (1.0, 1.0, 1.0))
        self.assertEqual(Policy.zeros(2).perturbed(1, 0.25).kappa, (0.0, 0.25, 0.0))

    def test_rounding_is_clamped(self):
        policy = Policy((1.0 + 1e-13, -1e-13))
        self.assertEqual(policy.kappa, (1.0, 0.0))

    def test_invalid_policy(self):
        with self.assertRaises(InvariantViolation):
            Policy((1.0,))
        with self.assertRaises(InvariantViolation):
            Policy((1.0, 1.5))
        with self.assertRaises(InvariantViolation):
            Policy((1.0, float("nan")))


class TestChainModel(unittest.TestCase):

    def setUp(self):
        self.params = SystemParams.from_dict(REFERENCE_PARAMS)
        self.model = ChainModel(self.params)

    def test_transition_matrix(self):
        matrix = self.model.transition_matrix(Policy.zeros(2))
        npt.assert_allclose(matrix[0], [0.2, 0.8, 0.0], atol=1e-12)
        npt.assert_allclose(matrix[1], [0.14, 0.56, 0.30], atol=1e-12)
        npt.assert_allclose(matrix[2], [0.2, 0.8, 0.0], atol=1e-12)
        npt.assert_allclose(matrix.sum(axis=1), np.ones(3), atol=1e-12)

    def test_effective_failure(self):
        policy = Policy((1.0, 0.5, 1.0))
        self.assertAlmostEqual(self.model.effective_failure(policy, 1), 0.405, delta=1e-12)
        self.assertAlmostEqual(self.model.effective_failure(policy, 2), 0.51, delta=1e-12)
        with self.assertRaises(DomainError):
            self.model.effective_failure(policy, 0)
        with self.assertRaises(DomainError):
            self.model.effective_failure(policy, 3)

    def test_primary_cost(self):
        self.assertAlmostEqual(self.model.primary_cost(Policy.zeros(2)), SILENT_COST, delta=1e-6)
        self.assertAlmostEqual(self.model.primary_throughput(Policy.zeros(2)), 1.0 - SILENT_COST, delta=1e-6)
        # kappa_0 has no effect on the primary
        self.assertAlmostEqual(self.model.primary_cost(Policy((1.0, 0.0, 0.0))), SILENT_COST, delta=1e-6)
        self.assertAlmostEqual(self.model.delta_loss(Policy.ones(2)), FLOODED_LOSS, delta=1e-6)
        self.assertEqual(self.model.delta_loss(Policy.zeros(2)), 0.0)

    def test_steady_state(self):
        pi = self.model.steady_state(Policy((1.0, 0.0, 0.0)))
        npt.assert_allclose(pi.as_array(), IDLE_ONLY_PI, atol=1e-6)
        self.assertAlmostEqual(self.model.secondary_reward(Policy((1.0, 0.0, 0.0))), IDLE_ONLY_PI[0], delta=1e-6)

    def test_steady_state_matches_eigenvector(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            t_max = int(rng.integers(1, 7))
            params = SystemParams(alpha=rng.uniform(0.05, 0.95), rho=rng.uniform(0.0, 0.95),
                                  lam=rng.uniform(), nu=rng.uniform(0.0, 0.5), t_max=t_max)
            model = ChainModel(params)
            policy = Policy(tuple(rng.uniform(size=t_max + 1)))
            npt.assert_allclose(model.steady_state(policy).as_array(), model.stationary_eigenvector(policy), atol=1e-10)

    def test_costs_from_stationary_distribution(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            t_max = int(rng.integers(1, 7))
            params = SystemParams(alpha=rng.uniform(0.05, 0.95), rho=rng.uniform(0.0, 0.95),
                                  lam=rng.uniform(), nu=rng.uniform(0.0, 0.5), t_max=t_max)
            model = ChainModel(params)
            policy = Policy(tuple(rng.uniform(size=t_max + 1)))
            pi = model.steady_state(policy).as_array()
            rho_theta = model.effective_failures(policy)
            # an idle slot delivers nothing, a busy slot fails with rho_theta
            per_state = np.concatenate(([1.0], rho_theta))
            self.assertAlmostEqual(model.primary_cost(policy), float(np.dot(pi, per_state)), delta=1e-12)
            self.assertAlmostEqual(model.failure_prob_cost(policy), pi[t_max] / pi[1] * rho_theta[-1], delta=1e-12)
            self.assertAlmostEqual(model.num_tx_cost(policy), pi[1:].sum() / pi[1], delta=1e-10)

    def test_failure_prob_and_num_tx(self):
        self.assertAlmostEqual(self.model.failure_prob_cost(Policy((1.0, 0.5, 1.0))), 0.20655, delta=1e-12)
        model = ChainModel(self.params.replace(t_max=4))
        self.assertAlmostEqual(model.num_tx_cost(Policy.zeros(4)), 1.417, delta=1e-12)
        self.assertAlmostEqual(model.failure_prob_cost(Policy.zeros(4)), 0.0081, delta=1e-12)

    def test_cost_dispatch(self):
        policy = Policy((1.0, 0.3, 0.7))
        for metric in (METRIC_THROUGHPUT, METRIC_FAILURE_PROB, METRIC_NUM_TX):
            numerator, denominator = self.model.cost_terms(policy, metric)
            self.assertAlmostEqual(numerator / denominator, self.model.cost(policy, metric), delta=1e-14)
        with self.assertRaises(ConfigurationError):
            self.model.cost(policy, "latency")

    def test_full_interference_blocks_primary(self):
        model = ChainModel(self.params.replace(**{"lambda": 1.0}))
        self.assertAlmostEqual(model.primary_throughput(Policy.ones(2)), 0.0, delta=1e-12)

    def test_normalised_reward(self):
        model = ChainModel(self.params.replace(nu=0.2))
        policy = Policy((1.0, 0.6, 0.2))
        self.assertAlmostEqual(model.normalised_reward(policy), model.secondary_reward(policy) / 0.8, delta=1e-12)

    def test_metrics(self):
        metrics = self.model.metrics(Policy.zeros(2))
        self.assertIsInstance(metrics, Metrics)
        self.assertAlmostEqual(metrics.j_p + metrics.w_p, 1.0, delta=1e-12)
        self.assertEqual(metrics.w_s, 0.0)
        self.assertEqual(set(metrics.to_dict()), {"j_p", "w_p", "w_s", "j_fp", "j_ntx"})

    def test_policy_length_mismatch(self):
        with self.assertRaises(InvariantViolation):
            self.model.primary_cost(Policy.zeros(3))

    def test_state_distribution_invariants(self):
        with self.assertRaises(InvariantViolation):
            StateDistribution((0.5, 0.2, 0.2))
        with self.assertRaises(InvariantViolation):
            StateDistribution((0.2, 0.3, 0.5))


if __name__ == "__main__":
    unittest.main()
