import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ChainModel import ChainModel, Policy, SystemParams
from constants import DEFAULT_SEED, FD_STEP
from utils import DomainError, ModeError, finite_difference, relative_error

logger = logging.getLogger(__name__)

"""
    TheoremChecker inherits from ChainModel and turns the analytic structure of the chain into
    executable checks:

    1) Closed-form gradients of the primary cost and of the secondary reward, checked against
       finite differences and for strict positivity (monotonicity in every kappa[theta])

    2) The T=2 closed-form partials of the reward when the primary interferes with the secondary
       receiver, and the nu* threshold above which transmitting in state 1 lowers the reward

    3) The exchange orderings: for policies with kappa_j = kappa_r (j < r) and a silent tail above r,
       raising kappa_j rather than kappa_r at equal primary cost gives the larger reward, and
       lowering kappa_j rather than kappa_r gives the smaller one

    4) Insensitivity of the packet failure probability to where the interference is placed

    Numerators are normalised so that N_W / D is the fraction of slots used by the secondary,
    i.e. the reward with nu = nu* = 0.
"""

@dataclass(frozen=True)
class PerturbationConstants:
    a: float
    b: float
    c: float
    f: float
    g: float
    n_j: float
    n_w: float
    d: float
    x: float

    def __post_init__(self):
        for name in ("a", "b", "c", "f"):
            if getattr(self, name) < -1e-15:
                raise DomainError(f"ERROR: perturbation constant {name}={getattr(self, name)} is negative")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ExchangeReport:
    direction: str
    j: int
    r: int
    delta_r: float
    delta_j: Optional[float]
    cost_j: Optional[float]
    cost_r: Optional[float]
    reward_j: Optional[float]
    reward_r: Optional[float]
    hypothesis_ok: bool
    holds: bool
    message: str = ""

    def to_dict(self):
        return asdict(self)


class TheoremChecker(ChainModel):
    def __init__(self, params):
        super().__init__(params)

    # Q_t = prod_{i <= t, i != theta} rho_i for t = 0..T, with rho_theta replaced by one
    def _products_without(self, policy, theta):
        rho_theta = self.effective_failures(policy).copy()
        rho_theta[theta - 1] = 1.0
        return np.concatenate(([1.0], np.cumprod(rho_theta)))

    def reward_numerator(self, policy):
        alpha = self.params.alpha
        P = self.survival_products(policy)
        kappa = policy.as_array()
        return (1.0 - alpha) * kappa[0] + alpha * float(np.dot(kappa[1:], P[:-1]))

    def denominator_gradient(self, policy):
        T, alpha, L = self.params.t_max, self.params.alpha, self.params.coupling
        grad = np.zeros(T + 1)
        for theta in range(1, T + 1):
            Q = self._products_without(policy, theta)
            grad[theta] = alpha * L * Q[theta:T].sum()
        return grad

    def cost_numerator_gradient(self, policy):
        T, alpha, L = self.params.t_max, self.params.alpha, self.params.coupling
        grad = np.zeros(T + 1)
        for theta in range(1, T + 1):
            Q = self._products_without(policy, theta)
            grad[theta] = alpha * L * Q[theta:T + 1].sum()
        return grad

    def reward_numerator_gradient(self, policy):
        T, alpha, L = self.params.t_max, self.params.alpha, self.params.coupling
        kappa = policy.as_array()
        P = self.survival_products(policy)
        grad = np.zeros(T + 1)
        grad[0] = 1.0 - alpha
        for theta in range(1, T + 1):
            Q = self._products_without(policy, theta)
            tail = sum(kappa[t] * Q[t - 1] for t in range(theta + 1, T + 1))
            grad[theta] = alpha * (P[theta - 1] + L * tail)
        return grad

    """
        dJ_P/dkappa_theta = (N_J' D - N_J D') / D^2. Since D - N_J = alpha (1 - P_T) the numerator
        reduces to alpha L Q_T D + alpha^2 L (1 - P_T) sum_{t=theta}^{T-1} Q_t, a sum of
        nonnegative terms. Entry 0 is zero, the cost does not depend on kappa_0.
    """
    def cost_gradient(self, policy):
        self._check_policy(policy)
        T, alpha, L = self.params.t_max, self.params.alpha, self.params.coupling
        P = self.survival_products(policy)
        D = self.denominator(policy)
        grad = np.zeros(T + 1)
        for theta in range(1, T + 1):
            Q = self._products_without(policy, theta)
            numerator = alpha * L * Q[T] * D + alpha ** 2 * L * (1.0 - P[T]) * Q[theta:T].sum()
            grad[theta] = numerator / D ** 2
        return grad

    def reward_gradient(self, policy):
        self._check_policy(policy)
        p = self.params
        if p.nu_star != p.nu:
            raise ModeError("ERROR: closed-form reward gradient needs nu* = nu, use finite differences instead")
        D = self.denominator(policy)
        n_w = self.reward_numerator(policy)
        dn = self.reward_numerator_gradient(policy)
        dd = self.denominator_gradient(policy)
        return (1.0 - p.nu) * (dn * D - dd * n_w) / D ** 2

    # dN_W/dkappa - dD/dkappa, strictly positive in every state for rho > 0
    def numerator_margin(self, policy):
        return self.reward_numerator_gradient(policy) - self.denominator_gradient(policy)

    def finite_difference_gradient(self, fn, policy, h=FD_STEP):
        kappa = policy.as_array()
        return np.array([finite_difference(lambda k: fn(Policy(tuple(k))), kappa, theta, h)
                         for theta in range(len(kappa))])

    def _check_t2(self):
        if self.params.t_max != 2:
            raise DomainError(f"ERROR: closed-form partials need T=2, got T={self.params.t_max}")

    """
        Partial derivatives of W_S for T=2 with nu* free:
        dW/dk0 = (1-alpha)(1-nu) / D
        dW/dk1 = alpha [(1-nu*)(1 + alpha rho + L k2) - L (1-alpha)(1-nu) k0] / D^2
        dW/dk2 = (1-nu*) alpha rho_1 / D
        with D = 1 + alpha rho_1
    """
    def t2_reward_partials(self, policy):
        self._check_t2()
        self._check_policy(policy)
        p = self.params
        k0, k1, k2 = policy.kappa
        L = p.coupling
        D = 1.0 + p.alpha * (p.rho + L * k1)
        d_k0 = (1.0 - p.alpha) * (1.0 - p.nu) / D
        d_k1 = p.alpha * ((1.0 - p.nu_star) * (1.0 + p.alpha * p.rho + L * k2)
                          - L * (1.0 - p.alpha) * (1.0 - p.nu) * k0) / D ** 2
        d_k2 = (1.0 - p.nu_star) * p.alpha * (p.rho + L * k1) / D
        return d_k0, d_k1, d_k2

    # dW/dk1 > 0 iff nu* is below this value, independent of kappa_1
    def nu_star_threshold(self, kappa_2, kappa_0=1.0):
        self._check_t2()
        if not 0.0 <= kappa_2 <= 1.0:
            raise DomainError(f"ERROR: kappa_2={kappa_2} must lie in [0,1]")
        p = self.params
        L = p.coupling
        base = 1.0 + p.alpha * p.rho + L * kappa_2
        return (base - L * (1.0 - p.alpha) * (1.0 - p.nu) * kappa_0) / base

    def _check_exchange_pair(self, policy, j, r):
        T = self.params.t_max
        if not 0 < j < r <= T:
            raise DomainError(f"ERROR: need 0 < j < r <= T, got j={j}, r={r}, T={T}")
        if policy[j] != policy[r]:
            raise DomainError(f"ERROR: kappa_j={policy[j]} and kappa_r={policy[r]} must coincide")
        if any(policy[t] != 0.0 for t in range(r + 1, T + 1)):
            raise DomainError("ERROR: kappa must vanish in every state above r")

    """
        Increments of D, N_J and N_W are linear in the perturbation because every one of them is
        multilinear in kappa. Moving kappa_r by delta adds (A, B, G) * delta; moving kappa_j adds
        (A + C, B + C, G + F) * delta.
    """
    def perturbation_constants(self, policy, j, r):
        self._check_policy(policy)
        self._check_exchange_pair(policy, j, r)
        dd = self.denominator_gradient(policy)
        dn_j = self.cost_numerator_gradient(policy)
        dn_w = self.reward_numerator_gradient(policy)
        rho_theta = self.effective_failures(policy)
        return PerturbationConstants(
            a=dd[r],
            b=dn_j[r],
            c=dd[j] - dd[r],
            f=dn_w[j] - dn_w[r],
            g=dn_w[r],
            n_j=self.cost_numerator(policy),
            n_w=self.reward_numerator(policy),
            d=self.denominator(policy),
            x=self.params.alpha * float(np.prod(rho_theta)),
        )

    """
        Largest gap between the primary cost after moving kappa_r or kappa_j by delta and its affine
        reconstruction from the perturbation constants, together with F - C, which must be positive
    """
    def perturbation_agreement(self, policy, j, r, delta):
        k = self.perturbation_constants(policy, j, r)
        moved_r = self.primary_cost(policy.perturbed(r, delta))
        moved_j = self.primary_cost(policy.perturbed(j, delta))
        gap = max(abs(moved_r - (k.n_j + k.b * delta) / (k.d + k.a * delta)),
                  abs(moved_j - (k.n_j + (k.b + k.c) * delta) / (k.d + (k.a + k.c) * delta)),
                  abs(k.b - k.a - k.x * self.params.coupling / self.effective_failure(policy, j)))
        return gap, k.f - k.c

    """
        Moves kappa_r by delta_r (up for "increase", down for "decrease"), then finds by root
        finding the move of kappa_j in the same direction reaching the same primary cost and
        compares the two rewards. Raising j must win, lowering j must lose.
    """
    def verify_exchange(self, policy, j, r, delta_r, direction="increase"):
        self._check_policy(policy)
        self._check_exchange_pair(policy, j, r)
        if direction not in ("increase", "decrease"):
            raise DomainError(f"ERROR: unknown direction {direction}")
        sign = 1.0 if direction == "increase" else -1.0
        room = 1.0 - policy[r] if sign > 0 else policy[r]
        if not 0.0 < delta_r <= room:
            raise DomainError(f"ERROR: step {delta_r} outside (0, {room}] for direction {direction}")

        policy_r = policy.perturbed(r, sign * delta_r)
        target = self.primary_cost(policy_r)

        def gap(x):
            return self.primary_cost(policy.perturbed(j, sign * x)) - target

        lo_gap, hi_gap = gap(0.0), gap(delta_r)
        if lo_gap * hi_gap > 0.0:
            return ExchangeReport(direction, j, r, delta_r, None, None, target, None, None,
                                  hypothesis_ok=False, holds=False,
                                  message="no equal-cost step for kappa_j within (0, delta_r]")
        delta_j = brentq(gap, 0.0, delta_r, xtol=1e-15, maxiter=500)
        policy_j = policy.perturbed(j, sign * delta_j)
        reward_j = self.secondary_reward(policy_j)
        reward_r = self.secondary_reward(policy_r)
        holds = reward_j > reward_r if sign > 0 else reward_j < reward_r
        logger.debug("exchange %s j=%d r=%d: delta_j=%g delta_r=%g rewards %g vs %g",
                     direction, j, r, delta_j, delta_r, reward_j, reward_r)
        return ExchangeReport(direction, j, r, delta_r, delta_j, self.primary_cost(policy_j), target,
                              reward_j, reward_r, hypothesis_ok=True, holds=bool(holds))

    # Closed form of the equal-cost step of kappa_j for a given target cost z
    def equal_cost_step(self, constants, z):
        k = constants
        return (k.d * z - k.n_j) / (k.b + k.c - (k.a + k.c) * z)

    """
        Same step delta on kappa_j and on kappa_r: the earlier state costs the primary more.
        Needs kappa_j = kappa_r and a zero tail above r, outside that region the ordering can flip.
    """
    def cost_ordering(self, policy, j, r, delta):
        self._check_policy(policy)
        self._check_exchange_pair(policy, j, r)
        if not 0.0 < delta <= 1.0 - policy[r]:
            raise DomainError(f"ERROR: step {delta} outside (0, {1.0 - policy[r]}]")
        cost_j = self.primary_cost(policy.perturbed(j, delta))
        cost_r = self.primary_cost(policy.perturbed(r, delta))
        return cost_j, cost_r, bool(cost_j > cost_r)

    def fp_insensitivity(self, policy, j, r, delta):
        self._check_policy(policy)
        T = self.params.t_max
        if not 0 < j < r <= T:
            raise DomainError(f"ERROR: need 0 < j < r <= T, got j={j}, r={r}")
        lo = -min(policy[j], policy[r])
        hi = min(1.0 - policy[j], 1.0 - policy[r])
        if not lo <= delta <= hi:
            raise DomainError(f"ERROR: delta={delta} outside [{lo}, {hi}]")
        cost_j = self.failure_prob_cost(policy.perturbed(j, delta))
        cost_r = self.failure_prob_cost(policy.perturbed(r, delta))
        return cost_j, cost_r, abs(cost_j - cost_r)

    def gradient_agreement(self, policy):
        analytic = self.cost_gradient(policy)
        numeric = self.finite_difference_gradient(self.primary_cost, policy)
        return max(relative_error(a, n, floor=1e-9) for a, n in zip(analytic, numeric))

    """
        Runs every check on n random instances drawn with a fixed seed and returns a summary
        dictionary with the number of failures per check
    """
    def run_all(self, n=200, seed=DEFAULT_SEED, t_max=None):
        rng = np.random.default_rng(seed)
        t_max = self.params.t_max if t_max is None else t_max
        failures = {"cost_gradient": 0, "reward_gradient": 0, "numerator_margin": 0,
                    "exchange_increase": 0, "exchange_decrease": 0, "fp_insensitivity": 0,
                    "cost_ordering": 0, "perturbation_constants": 0, "nu_star_threshold": 0}
        for _ in range(n):
            params = random_params(rng, t_max)
            checker = TheoremChecker(params)
            policy = random_policy(rng, t_max)
            cost_grad = checker.cost_gradient(policy)
            if checker.gradient_agreement(policy) > 1e-6 or np.any(cost_grad[1:] <= 0.0):
                failures["cost_gradient"] += 1
            reward_grad = checker.reward_gradient(policy)
            numeric = checker.finite_difference_gradient(checker.secondary_reward, policy)
            if np.any(reward_grad <= 0.0) or max(relative_error(a, b, 1e-9) for a, b in zip(reward_grad, numeric)) > 1e-6:
                failures["reward_gradient"] += 1
            if np.any(checker.numerator_margin(policy) <= 0.0):
                failures["numerator_margin"] += 1
            if t_max >= 2:
                j, r, base = random_exchange_instance(rng, t_max)
                up = checker.verify_exchange(base, j, r, rng.uniform(0.05, 1.0) * (1.0 - base[r]), "increase")
                failures["exchange_increase"] += int(not up.holds)
                step = rng.uniform(0.05, 1.0) * (1.0 - base[r])
                failures["cost_ordering"] += int(not checker.cost_ordering(base, j, r, step)[2])
                lowered = base.with_entry(j, max(base[j], 0.2)).with_entry(r, max(base[j], 0.2))
                down = checker.verify_exchange(lowered, j, r, rng.uniform(0.05, 1.0) * lowered[r], "decrease")
                failures["exchange_decrease"] += int(not down.holds)
                gap, margin = checker.perturbation_agreement(base, j, r, rng.uniform(0.0, 1.0 - base[r]))
                failures["perturbation_constants"] += int(gap > 1e-10 or margin <= 0.0)
                delta = rng.uniform(-min(policy[j], policy[r]), min(1.0 - policy[j], 1.0 - policy[r]))
                failures["fp_insensitivity"] += int(checker.fp_insensitivity(policy, j, r, delta)[2] > 1e-14)
            t2 = TheoremChecker(params.replace(t_max=2))
            threshold = t2.nu_star_threshold(rng.uniform())
            failures["nu_star_threshold"] += int(not 0.0 < threshold <= 1.0)
        return {"instances": n, "seed": seed, "t_max": t_max, "failures": failures,
                "passed": all(v == 0 for v in failures.values())}


def random_params(rng, t_max, lambda_s=0.0):
    return SystemParams(
        alpha=rng.uniform(0.05, 0.95),
        rho=rng.uniform(0.05, 0.9),
        lam=rng.uniform(0.05, 0.95),
        nu=rng.uniform(0.0, 0.5),
        lambda_s=lambda_s,
        t_max=t_max,
    )


def random_policy(rng, t_max):
    kappa = rng.uniform(0.0, 1.0, t_max + 1)
    kappa[0] = 1.0
    return Policy(tuple(kappa))


# j < r, kappa_j = kappa_r, silent above r, free entries below r
def random_exchange_instance(rng, t_max):
    j, r = sorted(rng.choice(np.arange(1, t_max + 1), size=2, replace=False))
    kappa = rng.uniform(0.0, 1.0, t_max + 1)
    kappa[0] = 1.0
    kappa[r] = kappa[j] = rng.uniform(0.0, 0.8)
    kappa[r + 1:] = 0.0
    return int(j), int(r), Policy(tuple(kappa))
