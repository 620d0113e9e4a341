import math
import unittest

import numpy as np

from PhyCalculator import (RX_OPPORTUNISTIC_CANCEL, RX_TREAT_AS_NOISE, FadingModel, FailureProbs, LinkBudget,
                           PhyCalculator, capacity)
from utils import ConfigurationError, DomainError, InvariantViolation

RAYLEIGH_RHO = 0.0951626
# Outage with exponential interference: 1 - exp(-1/10) / (1 + 1/10)
RAYLEIGH_RHO_STAR = 0.177421

BUDGET = {
    "r_p": 1.0, "r_s": 1.0, "p_p": 10.0, "p_s": 10.0,
    "gbar_pp": 1.0, "gbar_ps": 0.1, "gbar_ss": 1.0, "gbar_sp": 0.1,
}


class TestPhyCalculator(unittest.TestCase):

    def setUp(self):
        self.budget = LinkBudget.from_dict(BUDGET)
        self.phy = PhyCalculator(self.budget, fading="rayleigh", mc_samples=200000, seed=42)

    def test_capacity(self):
        self.assertEqual(capacity(0.0), 0.0)
        self.assertAlmostEqual(capacity(1.0), 1.0, delta=1e-12)
        self.assertAlmostEqual(capacity(10.0), math.log2(11.0), delta=1e-12)
        np.testing.assert_allclose(capacity(np.array([0.0, 3.0])), [0.0, 2.0])
        with self.assertRaises(DomainError):
            capacity(-1.0)

    def test_rayleigh_closed_form(self):
        fp = self.phy.failure_probs()
        self.assertAlmostEqual(fp.rho, RAYLEIGH_RHO, delta=1e-6)
        self.assertAlmostEqual(fp.nu, RAYLEIGH_RHO, delta=1e-6)
        self.assertAlmostEqual(fp.rho_star, RAYLEIGH_RHO_STAR, delta=5e-3)
        self.assertGreaterEqual(fp.rho_star, fp.rho)
        self.assertGreaterEqual(fp.nu_star, fp.nu)

    def test_seeded_monte_carlo_is_reproducible(self):
        again = PhyCalculator(self.budget, fading="rayleigh", mc_samples=200000, seed=42)
        self.assertEqual(self.phy.failure_probs(), again.failure_probs())

    def test_deterministic_fading(self):
        phy = PhyCalculator(self.budget, fading=FadingModel.DETERMINISTIC)
        self.assertEqual(phy.failure_probs(), FailureProbs(rho=0.0, rho_star=0.0, nu=0.0, nu_star=0.0))

        # SINR 5 supports log2(6) < 3 bits, the interference-free link log2(11) > 3
        budget = LinkBudget.from_dict(dict(BUDGET, r_p=3.0))
        fp = PhyCalculator(budget, fading="deterministic").failure_probs()
        self.assertEqual((fp.rho, fp.rho_star), (0.0, 1.0))
        self.assertEqual(PhyCalculator.increasing_factors(fp), (1.0, 0.0))

    def test_treat_as_noise_is_never_better(self):
        noise = LinkBudget.from_dict(dict(BUDGET, secondary_rx_mode=RX_TREAT_AS_NOISE))
        fp_noise = PhyCalculator(noise, mc_samples=100000, seed=3).failure_probs()
        fp_cancel = PhyCalculator(self.budget, mc_samples=100000, seed=3).failure_probs()
        self.assertGreaterEqual(fp_noise.nu_star, fp_cancel.nu_star)

    def test_secondary_failure_is_monotone(self):
        for mode in (RX_TREAT_AS_NOISE, RX_OPPORTUNISTIC_CANCEL):
            by_power = [PhyCalculator(LinkBudget.from_dict(dict(BUDGET, p_s=p_s, secondary_rx_mode=mode)),
                                      mc_samples=20000, seed=7).failure_probs()
                        for p_s in (1.0, 3.0, 10.0, 30.0, 100.0)]
            for low, high in zip(by_power, by_power[1:]):
                self.assertLessEqual(high.nu, low.nu)
                self.assertLessEqual(high.nu_star, low.nu_star)
                self.assertGreaterEqual(high.rho_star, low.rho_star)
            by_rate = [PhyCalculator(LinkBudget.from_dict(dict(BUDGET, r_s=r_s, secondary_rx_mode=mode)),
                                     mc_samples=20000, seed=7).failure_probs()
                       for r_s in (0.25, 0.5, 1.0, 2.0, 4.0)]
            for low, high in zip(by_rate, by_rate[1:]):
                self.assertGreaterEqual(high.nu, low.nu)
                self.assertGreaterEqual(high.nu_star, low.nu_star)
                self.assertEqual(high.rho_star, low.rho_star)

    def test_system_params(self):
        params = self.phy.system_params(alpha=0.8, t_max=4)
        fp = self.phy.failure_probs()
        self.assertEqual(params.t_max, 4)
        self.assertAlmostEqual(params.rho_star, fp.rho_star, delta=1e-12)
        self.assertAlmostEqual(params.nu_star, fp.nu_star, delta=1e-12)

    def test_secondary_always_failing(self):
        budget = LinkBudget.from_dict(dict(BUDGET, r_s=10.0))
        with self.assertRaises(ConfigurationError):
            PhyCalculator(budget, fading="deterministic").system_params(alpha=0.5, t_max=2)

    def test_invalid_inputs(self):
        with self.assertRaises(ConfigurationError):
            PhyCalculator(self.budget, mc_samples=100).failure_probs()
        with self.assertRaises(ConfigurationError):
            FadingModel.parse("nakagami")
        with self.assertRaises(InvariantViolation):
            LinkBudget.from_dict(dict(BUDGET, p_p=0.0))
        with self.assertRaises(ConfigurationError):
            LinkBudget.from_dict(dict(BUDGET, secondary_rx_mode="joint"))
        with self.assertRaises(ConfigurationError):
            LinkBudget.from_dict({"r_p": 1.0})
        with self.assertRaises(InvariantViolation):
            FailureProbs(rho=0.5, rho_star=0.4, nu=0.0, nu_star=0.0)


if __name__ == "__main__":
    unittest.main()
