import unittest

import numpy as np
import numpy.testing as npt

from ChainModel import Policy, SystemParams
from constants import REFERENCE_PARAMS
from PolicyOptimiser import bisect_root
from TheoremChecker import TheoremChecker, random_exchange_instance, random_params, random_policy
from utils import DomainError, ModeError, relative_error

N_INSTANCES = 1000


class TestTheoremChecker(unittest.TestCase):

    def setUp(self):
        self.params = SystemParams.from_dict(REFERENCE_PARAMS)
        self.checker = TheoremChecker(self.params)
        self.rng = np.random.default_rng(123)

    def test_cost_gradient_reference(self):
        policy = Policy((1.0, 0.5, 0.5))
        grad = self.checker.cost_gradient(policy)
        numeric = self.checker.finite_difference_gradient(self.checker.primary_cost, policy)
        self.assertEqual(grad[0], 0.0)
        for a, n in zip(grad[1:], numeric[1:]):
            self.assertLess(relative_error(a, n), 1e-6)
        self.assertTrue(np.all(grad[1:] > 0.0))

    def test_cost_gradient_without_interference(self):
        checker = TheoremChecker(self.params.replace(**{"lambda": 0.0}))
        npt.assert_array_equal(checker.cost_gradient(Policy((1.0, 0.3, 0.9))), np.zeros(3))

    def test_gradients_match_finite_differences(self):
        for _ in range(N_INSTANCES):
            t_max = int(self.rng.integers(1, 7))
            checker = TheoremChecker(random_params(self.rng, t_max))
            policy = random_policy(self.rng, t_max)
            self.assertLess(checker.gradient_agreement(policy), 1e-6)
            self.assertTrue(np.all(checker.cost_gradient(policy)[1:] > 0.0))
            reward = checker.reward_gradient(policy)
            numeric = checker.finite_difference_gradient(checker.secondary_reward, policy)
            self.assertTrue(np.all(reward > 0.0))
            for a, n in zip(reward, numeric):
                self.assertLess(relative_error(a, n, floor=1e-9), 1e-6)
            self.assertTrue(np.all(checker.numerator_margin(policy) > 0.0))

    def test_reward_gradient_without_interference(self):
        checker = TheoremChecker(self.params.replace(**{"lambda": 0.0}))
        policy = Policy((0.4, 0.3, 0.9))
        npt.assert_allclose(checker.reward_gradient(policy), checker.steady_state(policy).as_array(), atol=1e-12)

    def test_reward_gradient_idle_entry(self):
        checker = TheoremChecker(self.params.replace(nu=0.1))
        policy = Policy((1.0, 0.2, 0.7))
        expected = (1.0 - 0.8) * 0.9 / checker.denominator(policy)
        self.assertAlmostEqual(checker.reward_gradient(policy)[0], expected, delta=1e-12)

    def test_reward_gradient_needs_z_channel(self):
        checker = TheoremChecker(self.params.replace(lambda_s=0.3))
        with self.assertRaises(ModeError):
            checker.reward_gradient(Policy.ones(2))

    def test_t2_partials(self):
        for _ in range(N_INSTANCES):
            params = random_params(self.rng, 2).replace(lambda_s=self.rng.uniform())
            checker = TheoremChecker(params)
            policy = Policy(tuple(self.rng.uniform(0.05, 0.95, 3)))
            partials = checker.t2_reward_partials(policy)
            numeric = checker.finite_difference_gradient(checker.secondary_reward, policy)
            npt.assert_allclose(partials, numeric, atol=1e-8)
            self.assertGreater(partials[0], 0.0)
            self.assertGreater(partials[2], 0.0)
        with self.assertRaises(DomainError):
            TheoremChecker(self.params.replace(t_max=3)).t2_reward_partials(Policy.ones(3))

    def test_threshold_sign_flip(self):
        for i in range(N_INSTANCES):
            params = random_params(self.rng, 2)
            kappa_2 = self.rng.uniform()
            threshold = TheoremChecker(params).nu_star_threshold(kappa_2)
            self.assertLessEqual(threshold, 1.0)
            self.assertLessEqual(TheoremChecker(params).nu_star_threshold(1.0), 1.0)
            if i >= 100 or threshold <= params.nu + 1e-6:
                continue

            def d_k1(nu_star):
                lambda_s = (nu_star - params.nu) / (1.0 - params.nu)
                checker = TheoremChecker(params.replace(lambda_s=min(1.0, max(0.0, lambda_s))))
                return checker.t2_reward_partials(Policy((1.0, 0.5, kappa_2)))[1]

            self.assertGreater(d_k1(threshold - 1e-6), 0.0)
            if threshold < 1.0 - 1e-6:
                self.assertLess(d_k1(threshold + 1e-6), 0.0)
                root = bisect_root(d_k1, params.nu, 1.0)
                self.assertAlmostEqual(root, threshold, delta=1e-8)

    def test_threshold_domain(self):
        with self.assertRaises(DomainError):
            self.checker.nu_star_threshold(1.5)
        no_interference = TheoremChecker(self.params.replace(**{"lambda": 0.0}))
        self.assertEqual(no_interference.nu_star_threshold(0.5), 1.0)
        self.assertLess(self.checker.nu_star_threshold(0.5), 1.0)

    def test_perturbation_constants(self):
        for _ in range(N_INSTANCES):
            t_max = int(self.rng.integers(2, 7))
            params = random_params(self.rng, t_max)
            checker = TheoremChecker(params)
            j, r, policy = random_exchange_instance(self.rng, t_max)
            k = checker.perturbation_constants(policy, j, r)
            rho_j = checker.effective_failure(policy, j)
            self.assertAlmostEqual(k.b - k.a, k.x * params.coupling / rho_j, delta=1e-12)
            self.assertGreater(k.f, k.c)
            delta = self.rng.uniform(0.0, 1.0 - policy[r])
            self.assertAlmostEqual(checker.primary_cost(policy.perturbed(r, delta)),
                                   (k.n_j + k.b * delta) / (k.d + k.a * delta), delta=1e-12)
            self.assertAlmostEqual(checker.primary_cost(policy.perturbed(j, delta)),
                                   (k.n_j + (k.b + k.c) * delta) / (k.d + (k.a + k.c) * delta), delta=1e-12)

    def test_perturbation_agreement(self):
        for _ in range(N_INSTANCES):
            t_max = int(self.rng.integers(2, 7))
            checker = TheoremChecker(random_params(self.rng, t_max))
            j, r, policy = random_exchange_instance(self.rng, t_max)
            gap, margin = checker.perturbation_agreement(policy, j, r, self.rng.uniform(0.0, 1.0 - policy[r]))
            self.assertLess(gap, 1e-10)
            self.assertGreater(margin, 0.0)

    def test_perturbation_constants_without_interference(self):
        checker = TheoremChecker(self.params.replace(**{"lambda": 0.0}, t_max=3))
        k = checker.perturbation_constants(Policy((1.0, 0.4, 0.4, 0.0)), 1, 2)
        self.assertEqual((k.a, k.b, k.c), (0.0, 0.0, 0.0))
        self.assertAlmostEqual(k.f, 0.8 * (1.0 - 0.3), delta=1e-12)

    def test_exchange_orderings(self):
        for _ in range(N_INSTANCES):
            t_max = int(self.rng.integers(2, 7))
            checker = TheoremChecker(random_params(self.rng, t_max))
            j, r, policy = random_exchange_instance(self.rng, t_max)
            step = self.rng.uniform(0.05, 1.0) * (1.0 - policy[r])
            up = checker.verify_exchange(policy, j, r, step, "increase")
            self.assertTrue(up.hypothesis_ok)
            self.assertTrue(up.holds)
            self.assertGreater(up.reward_j, up.reward_r)
            self.assertLess(up.delta_j, up.delta_r)
            self.assertAlmostEqual(up.cost_j, up.cost_r, delta=1e-10)
            self.assertAlmostEqual(checker.equal_cost_step(checker.perturbation_constants(policy, j, r), up.cost_r),
                                   up.delta_j, delta=1e-9)

            lowered = policy.with_entry(j, max(policy[j], 0.2)).with_entry(r, max(policy[j], 0.2))
            down = checker.verify_exchange(lowered, j, r, self.rng.uniform(0.05, 1.0) * lowered[r], "decrease")
            self.assertTrue(down.holds)
            self.assertLess(down.delta_j, down.delta_r)

    def test_cost_ordering(self):
        for _ in range(N_INSTANCES):
            t_max = int(self.rng.integers(2, 7))
            checker = TheoremChecker(random_params(self.rng, t_max))
            j, r, policy = random_exchange_instance(self.rng, t_max)
            cost_j, cost_r, holds = checker.cost_ordering(policy, j, r, 0.5 * (1.0 - policy[r]))
            self.assertTrue(holds)
        with self.assertRaises(DomainError):
            self.checker.cost_ordering(Policy((1.0, 0.2, 0.4)), 1, 2, 0.1)

    def test_exchange_preconditions(self):
        checker = TheoremChecker(self.params.replace(t_max=3))
        with self.assertRaises(DomainError):
            checker.verify_exchange(Policy((1.0, 0.2, 0.2, 0.5)), 1, 2, 0.1)
        with self.assertRaises(DomainError):
            checker.verify_exchange(Policy((1.0, 0.2, 0.2, 0.0)), 2, 1, 0.1)
        with self.assertRaises(DomainError):
            checker.verify_exchange(Policy((1.0, 0.2, 0.2, 0.0)), 1, 2, 0.9)
        with self.assertRaises(DomainError):
            checker.verify_exchange(Policy((1.0, 0.2, 0.2, 0.0)), 1, 2, 0.1, "sideways")

    def test_failure_probability_is_insensitive(self):
        for _ in range(10000):
            t_max = int(self.rng.integers(2, 7))
            checker = TheoremChecker(random_params(self.rng, t_max))
            policy = random_policy(self.rng, t_max)
            j, r = sorted(self.rng.choice(np.arange(1, t_max + 1), size=2, replace=False))
            delta = self.rng.uniform(-min(policy[j], policy[r]), min(1.0 - policy[j], 1.0 - policy[r]))
            self.assertLessEqual(checker.fp_insensitivity(policy, int(j), int(r), delta)[2], 1e-14)
        cost_j, cost_r, _ = self.checker.fp_insensitivity(Policy((1.0, 0.3, 0.6)), 1, 2, 0.0)
        self.assertEqual(cost_j, cost_r)

    def test_run_all(self):
        report = self.checker.run_all(n=40, seed=1, t_max=3)
        self.assertTrue(report["passed"], report["failures"])
        self.assertEqual(report["instances"], 40)
        self.assertEqual(report["failures"]["perturbation_constants"], 0)
        self.assertIn("nu_star_threshold", report["failures"])


if __name__ == "__main__":
    unittest.main()
