import itertools
import logging
import warnings
from dataclasses import dataclass

from ChainModel import ChainModel, Policy, check_metric
from constants import (BISECTION_MAX_ITER, BISECTION_MIN_WIDTH, CONSTRAINT_TOL, ENUMERATE_MAX_T,
                       METRIC_NUM_TX, METRIC_THROUGHPUT, PROB_TOL, TIE_TOL)
from utils import BracketError, BudgetError, ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

"""
    PolicyOptimiser inherits from ChainModel and searches the secondary transmission policy that
    maximises the secondary reward while the primary loss stays within the allowance sigma:

    1) Vertical flooding: starting from the all-ones policy, zero the busy states from the last
       retransmission downwards until the policy is admissible, then raise the last zeroed state
       by bisection until the constraint is active. Optimal when nu* = nu for the throughput and
       the failure probability constraints

    2) Horizontal flooding: one common transmission probability in every busy state, the largest
       admissible one. Suboptimal baseline

    3) Enumeration: every deterministic busy-state pattern plus at most one randomised state,
       whose value is placed exactly on the constraint. Exact for any nu* >= nu and every metric,
       and the oracle for the other solvers

    kappa_0 is always one, transmitting in an idle slot costs the primary nothing.
"""

@dataclass(frozen=True)
class ConstraintSpec:
    metric: str = METRIC_THROUGHPUT
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "metric", check_metric(str(self.metric).replace("-", "_")))
        if not self.epsilon >= 0.0:
            raise ConfigurationError(f"ERROR: epsilon={self.epsilon} must be >= 0. Check inputs!")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigurationError(f"ERROR: constraint must be a mapping, got {type(d).__name__}. Check inputs!")
        try:
            epsilon = float(d.get("epsilon", 0.0))
        except (TypeError, ValueError):
            raise ConfigurationError(f"ERROR: epsilon={d['epsilon']!r} is not a number. Check inputs!")
        return cls(metric=d.get("metric", METRIC_THROUGHPUT), epsilon=epsilon)

    def to_dict(self):
        return {"metric": self.metric, "epsilon": self.epsilon}


@dataclass
class SolveReport:
    method: str
    metric: str
    epsilon: float
    sigma: float
    policy: Policy
    w_s: float
    w_p: float
    delta: float
    binding: bool
    iterations: int
    valid: bool = True

    def __post_init__(self):
        if self.delta > self.sigma + CONSTRAINT_TOL:
            raise NumericalError(f"ERROR: {self.method} returned a policy with loss {self.delta} above {self.sigma}")

    @property
    def kappa(self):
        return self.policy.to_list()

    # Average cost of the secondary source with unit packets, 1 - W_S
    @property
    def secondary_cost(self):
        return 1.0 - self.w_s

    """
        Relative increase of the secondary cost of this solution over a reference solution,
        (J_S(self) - J_S(ref)) / J_S(ref), zero when both costs are zero
    """
    def cost_increase_ratio(self, reference):
        if reference.secondary_cost <= 0.0:
            return 0.0 if self.secondary_cost <= 0.0 else float("inf")
        return (self.secondary_cost - reference.secondary_cost) / reference.secondary_cost

    def to_dict(self):
        return {
            "method": self.method,
            "metric": self.metric,
            "epsilon": self.epsilon,
            "sigma": self.sigma,
            "kappa": self.kappa,
            "w_s": self.w_s,
            "w_p": self.w_p,
            "delta": self.delta,
            "binding": self.binding,
            "iterations": self.iterations,
            "valid": self.valid,
        }


"""
    Bisection on [lo, hi] for a function changing sign on the interval, run until the bracket is
    narrower than BISECTION_MIN_WIDTH. The stopping rule ignores the scale of f. With
    keep="nonpositive" the bracket endpoint where f <= 0 is returned, the admissible side of an
    increasing constraint gap.
"""
def bisect_root(f, lo, hi, max_iter=BISECTION_MAX_ITER, keep=None):
    f_lo = f(lo)
    if f_lo == 0.0:
        return lo
    f_hi = f(hi)
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise BracketError(f"ERROR: f({lo})={f_lo} and f({hi})={f_hi} do not bracket a root")
    for _ in range(max_iter):
        if hi - lo <= BISECTION_MIN_WIDTH:
            break
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_hi > 0.0):
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    if keep == "nonpositive":
        return lo if f_lo <= 0.0 else hi
    return 0.5 * (lo + hi)


class PolicyOptimiser(ChainModel):
    def __init__(self, params):
        super().__init__(params)

    """
        Loss allowance sigma on the selected cost: a fraction epsilon of the silent-secondary
        throughput, or a relative increase epsilon of the silent-secondary failure probability or
        number of transmissions
    """
    def sigma_from_epsilon(self, spec):
        silent = Policy.zeros(self.params.t_max)
        if spec.metric == METRIC_THROUGHPUT:
            return spec.epsilon * self.primary_throughput(silent)
        return spec.epsilon * self.cost(silent, spec.metric)

    # Largest admissible value of the selected cost, J(0) + sigma (rho^T (1 + epsilon) for failure_prob)
    def cost_bound(self, spec):
        return self.cost(Policy.zeros(self.params.t_max), spec.metric) + self.sigma_from_epsilon(spec)

    def _report(self, method, spec, policy, sigma, iterations, valid=True):
        delta = self.delta_loss(policy, spec.metric)
        return SolveReport(
            method=method,
            metric=spec.metric,
            epsilon=spec.epsilon,
            sigma=sigma,
            policy=policy,
            w_s=self.secondary_reward(policy),
            w_p=self.primary_throughput(policy),
            delta=delta,
            binding=abs(delta - sigma) <= CONSTRAINT_TOL,
            iterations=iterations,
            valid=valid,
        )

    def _admissible(self, policy, spec, sigma):
        return self.delta_loss(policy, spec.metric) <= sigma * (1.0 + PROB_TOL) + 1e-16

    def solve_vertical(self, spec, allow_general=False):
        T = self.params.t_max
        if spec.metric == METRIC_NUM_TX:
            raise ConfigurationError("ERROR: vertical flooding covers throughput and failure_prob, use lp or enumerate")
        valid = True
        if not self.params.z_channel:
            if not allow_general:
                raise ConfigurationError("ERROR: vertical flooding is optimal only for nu* = nu, pass allow_general")
            warnings.warn("nu* > nu: vertical flooding policy is not guaranteed optimal")
            valid = False

        sigma = self.sigma_from_epsilon(spec)
        kappa = [1.0] * (T + 1)
        if self._admissible(Policy(tuple(kappa)), spec, sigma):
            return self._report("vertical", spec, Policy(tuple(kappa)), sigma, 0, valid)

        steps = 0
        for j in range(T, 0, -1):
            kappa[j] = 0.0
            steps += 1
            if self._admissible(Policy(tuple(kappa)), spec, sigma):
                break

        # kappa_j = 0 is admissible, kappa_j = 1 is not
        if sigma <= 0.0 or self._randomised_value(kappa, j, spec, self.cost_bound(spec)) is None:
            kappa[j] = 0.0
        logger.debug("vertical flooding: zeroed %d states, kappa_%d=%g", steps, j, kappa[j])
        return self._report("vertical", spec, Policy(tuple(kappa)), sigma, steps + 1, valid)

    def solve_horizontal(self, spec):
        T = self.params.t_max
        sigma = self.sigma_from_epsilon(spec)
        if self._admissible(Policy.ones(T), spec, sigma):
            return self._report("horizontal", spec, Policy.ones(T), sigma, 0)
        value = bisect_root(lambda x: self.delta_loss(Policy.horizontal(T, x), spec.metric) - sigma, 0.0, 1.0,
                            keep="nonpositive")
        return self._report("horizontal", spec, Policy.horizontal(T, value), sigma, 1)

    """
        Value x of kappa[position] in [0,1] putting the cost exactly on the bound. Numerator and
        denominator of every cost are affine in a single entry, so the root is explicit; bisection
        is the fallback when the slope vanishes numerically.
    """
    def _randomised_value(self, kappa, position, spec, bound):
        kappa[position] = 0.0
        n0, d0 = self.cost_terms(Policy(tuple(kappa)), spec.metric)
        kappa[position] = 1.0
        n1, d1 = self.cost_terms(Policy(tuple(kappa)), spec.metric)
        if n0 / d0 > bound or n1 / d1 <= bound:
            return None
        if n0 / d0 == bound:
            kappa[position] = 0.0
            return 0.0
        slope = (n1 - n0) - bound * (d1 - d0)
        if slope > 0.0:
            x = min(1.0, max(0.0, (bound * d0 - n0) / slope))
        else:
            def gap(y):
                kappa[position] = y
                n, d = self.cost_terms(Policy(tuple(kappa)), spec.metric)
                return n / d - bound
            x = bisect_root(gap, 0.0, 1.0, keep="nonpositive")
        kappa[position] = x
        return x

    def solve_enumerate(self, spec):
        T = self.params.t_max
        if T > ENUMERATE_MAX_T:
            raise BudgetError(f"ERROR: enumeration over 2^{T} patterns exceeds the budget T <= {ENUMERATE_MAX_T}")
        sigma = self.sigma_from_epsilon(spec)
        bound = self.cost_bound(spec)

        best, best_reward, candidates = None, None, 0
        for pattern in itertools.product((0.0, 1.0), repeat=T):
            kappa = [1.0] + list(pattern)
            policy = Policy(tuple(kappa))
            if self._admissible(policy, spec, sigma):
                best, best_reward = self._better(policy, best, best_reward)
                candidates += 1
            for position in range(1, T + 1):
                if pattern[position - 1] != 0.0:
                    continue
                trial = list(kappa)
                if self._randomised_value(trial, position, spec, bound) is None:
                    continue
                best, best_reward = self._better(Policy(tuple(trial)), best, best_reward)
                candidates += 1
        logger.debug("enumeration: %d admissible candidates", candidates)
        return self._report("enumerate", spec, best, sigma, candidates)

    # Maximum reward, ties within TIE_TOL go to the lexicographically largest kappa
    def _better(self, policy, best, best_reward):
        reward = self.secondary_reward(policy)
        if best is None or reward > best_reward + TIE_TOL:
            return policy, reward
        if abs(reward - best_reward) <= TIE_TOL and policy.kappa > best.kappa:
            return policy, max(reward, best_reward)
        return best, best_reward

    def solve(self, spec, solver="vertical", allow_general=False):
        if solver == "vertical":
            return self.solve_vertical(spec, allow_general=allow_general)
        if solver == "horizontal":
            return self.solve_horizontal(spec)
        if solver == "enumerate":
            return self.solve_enumerate(spec)
        raise ConfigurationError(f"ERROR: unknown solver {solver}. Check inputs!")
