import dataclasses
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from constants import METRIC_FAILURE_PROB, METRIC_NUM_TX, METRIC_THROUGHPUT, METRICS, PROB_TOL
from utils import ConfigurationError, DomainError, InvariantViolation

logger = logging.getLogger(__name__)

"""
    ChainModel holds the Markov chain of the primary source's retransmission process, with the
    secondary source transmitting in state theta with probability kappa[theta]. State 0 is an idle
    primary slot; state theta >= 1 is the theta-th transmission of the packet in service. Packets
    and slots are normalised to unit size, so every throughput is a fraction of slots.

    Given the system parameters it evaluates, for any transmission policy:

    1) The transition matrix and the closed-form steady state distribution

    2) The primary costs: throughput cost J_P, packet failure probability and the average number
       of transmissions per packet, as well as the loss Delta with respect to a silent secondary

    3) The secondary reward W_S, its throughput
"""

@dataclass(frozen=True)
class SystemParams:
    alpha: float
    rho: float
    lam: float
    nu: float = 0.0
    lambda_s: float = 0.0
    t_max: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvariantViolation(f"ERROR: alpha={self.alpha} must lie in (0,1). Check inputs!")
        for name in ("rho", "lam", "lambda_s"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvariantViolation(f"ERROR: {name}={value} must lie in [0,1]. Check inputs!")
        if not 0.0 <= self.nu < 1.0:
            raise InvariantViolation(f"ERROR: nu={self.nu} must lie in [0,1). Check inputs!")
        if int(self.t_max) != self.t_max or self.t_max < 1:
            raise InvariantViolation(f"ERROR: t_max={self.t_max} must be an integer >= 1. Check inputs!")
        object.__setattr__(self, "t_max", int(self.t_max))

    @property
    def rho_star(self):
        return self.rho + (1.0 - self.rho) * self.lam

    @property
    def nu_star(self):
        return self.nu + (1.0 - self.nu) * self.lambda_s

    # (1-rho)*lambda, the slope of the effective failure probability in kappa
    @property
    def coupling(self):
        return (1.0 - self.rho) * self.lam

    @property
    def z_channel(self):
        return self.lambda_s == 0.0

    def replace(self, **changes):
        if "lambda" in changes:
            changes["lam"] = changes.pop("lambda")
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigurationError(f"ERROR: params must be a mapping, got {type(d).__name__}. Check inputs!")
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigurationError(f"ERROR: unknown system parameters {sorted(unknown)}. Check inputs!")
        try:
            return cls(**d)
        except TypeError as err:
            raise ConfigurationError(f"ERROR: incomplete or malformed system parameters: {err}")

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "rho": self.rho,
            "lambda": self.lam,
            "nu": self.nu,
            "lambda_s": self.lambda_s,
            "t_max": self.t_max,
        }


@dataclass(frozen=True)
class Policy:
    kappa: Tuple[float, ...]

    def __post_init__(self):
        kappa = tuple(float(k) for k in self.kappa)
        if len(kappa) < 2:
            raise InvariantViolation("ERROR: a policy needs at least states 0 and 1. Check inputs!")
        for theta, k in enumerate(kappa):
            if not (-PROB_TOL <= k <= 1.0 + PROB_TOL) or np.isnan(k):
                raise InvariantViolation(f"ERROR: kappa[{theta}]={k} must lie in [0,1]. Check inputs!")
        object.__setattr__(self, "kappa", tuple(min(1.0, max(0.0, k)) for k in kappa))

    @property
    def t_max(self):
        return len(self.kappa) - 1

    def __len__(self):
        return len(self.kappa)

    def __getitem__(self, theta):
        return self.kappa[theta]

    def as_array(self):
        return np.array(self.kappa, dtype=float)

    def with_entry(self, theta, value):
        kappa = list(self.kappa)
        kappa[theta] = value
        return Policy(tuple(kappa))

    def perturbed(self, theta, delta):
        return self.with_entry(theta, self.kappa[theta] + delta)

    def to_list(self):
        return list(self.kappa)

    @classmethod
    def zeros(cls, t_max):
        return cls((0.0,) * (t_max + 1))

    @classmethod
    def ones(cls, t_max):
        return cls((1.0,) * (t_max + 1))

    # kappa_0 = 1 and one common probability in every busy state
    @classmethod
    def horizontal(cls, t_max, value):
        return cls((1.0,) + (float(value),) * t_max)

    # [1, 1 .. 1, value, 0 .. 0] with n_ones busy states flooded before the randomised one
    @classmethod
    def vertical(cls, t_max, n_ones, value=0.0):
        kappa = [1.0] + [0.0] * t_max
        for theta in range(1, n_ones + 1):
            kappa[theta] = 1.0
        if n_ones < t_max:
            kappa[n_ones + 1] = float(value)
        return cls(tuple(kappa))


@dataclass(frozen=True)
class StateDistribution:
    pi: Tuple[float, ...]

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if np.any(pi < -PROB_TOL):
            raise InvariantViolation(f"ERROR: negative steady-state probability in {pi}")
        if abs(pi.sum() - 1.0) > PROB_TOL:
            raise InvariantViolation(f"ERROR: steady state sums to {pi.sum()}, not 1")
        if np.any(np.diff(pi[1:]) > PROB_TOL):
            raise InvariantViolation(f"ERROR: steady state must be nonincreasing over busy states, got {pi}")
        object.__setattr__(self, "pi", tuple(float(p) for p in np.clip(pi, 0.0, 1.0)))

    def __getitem__(self, theta):
        return self.pi[theta]

    def as_array(self):
        return np.array(self.pi)


@dataclass(frozen=True)
class Metrics:
    j_p: float
    w_p: float
    w_s: float
    j_fp: float
    j_ntx: float

    def to_dict(self):
        return dataclasses.asdict(self)


def check_metric(metric):
    if metric not in METRICS:
        raise ConfigurationError(f"ERROR: unknown metric {metric}, expected one of {METRICS}. Check inputs!")
    return metric


class ChainModel:
    def __init__(self, params):
        self.params = params

    def set_params(self, params):
        self.params = params

    def _check_policy(self, policy):
        if len(policy) != self.params.t_max + 1:
            raise InvariantViolation(
                f"ERROR: policy has {len(policy)} entries, expected t_max+1={self.params.t_max + 1}. Check inputs!")

    """
        Average failure probability of a primary transmission in state theta >= 1 when the
        secondary source transmits there with probability kappa[theta]
    """
    def effective_failure(self, policy, theta):
        self._check_policy(policy)
        if not 1 <= theta <= self.params.t_max:
            raise DomainError(f"ERROR: theta={theta} outside 1..T; no primary transmission in state 0")
        return self.params.rho + self.params.coupling * policy[theta]

    # rho_1 .. rho_T as an array of length T
    def effective_failures(self, policy):
        self._check_policy(policy)
        return self.params.rho + self.params.coupling * policy.as_array()[1:]

    # P_t = rho_1 ... rho_t for t = 0..T, P_0 = 1
    def survival_products(self, policy):
        return np.concatenate(([1.0], np.cumprod(self.effective_failures(policy))))

    def denominator(self, policy):
        P = self.survival_products(policy)
        return 1.0 + self.params.alpha * P[1:self.params.t_max].sum()

    def cost_numerator(self, policy):
        P = self.survival_products(policy)
        return (1.0 - self.params.alpha) + self.params.alpha * P[1:].sum()

    def transition_matrix(self, policy):
        T, alpha = self.params.t_max, self.params.alpha
        rho_theta = self.effective_failures(policy)
        matrix = np.zeros((T + 1, T + 1))
        matrix[0, 0], matrix[0, 1] = 1.0 - alpha, alpha
        for theta in range(1, T):
            r = rho_theta[theta - 1]
            matrix[theta, 0] = (1.0 - alpha) * (1.0 - r)
            matrix[theta, 1] += alpha * (1.0 - r)
            matrix[theta, theta + 1] += r
        matrix[T, 0], matrix[T, 1] = 1.0 - alpha, alpha
        return matrix

    def steady_state(self, policy):
        alpha = self.params.alpha
        P = self.survival_products(policy)
        D = self.denominator(policy)
        pi = np.empty(self.params.t_max + 1)
        pi[0] = (1.0 - alpha) / D
        pi[1:] = alpha * P[:-1] / D
        return StateDistribution(tuple(pi))

    # Stationary vector as the left eigenvector of the transition matrix for eigenvalue 1
    def stationary_eigenvector(self, policy):
        w, vl = scipy.linalg.eig(self.transition_matrix(policy), left=True, right=False)
        k = int(np.argmin(np.abs(w - 1.0)))
        v = np.real(vl[:, k])
        return v / v.sum()

    def primary_cost(self, policy):
        return self.cost_numerator(policy) / self.denominator(policy)

    def primary_throughput(self, policy):
        return 1.0 - self.primary_cost(policy)

    def secondary_reward(self, policy):
        p = self.params
        pi = self.steady_state(policy).as_array()
        kappa = policy.as_array()
        return pi[0] * kappa[0] * (1.0 - p.nu) + (1.0 - p.nu_star) * float(np.dot(pi[1:], kappa[1:]))

    # Fraction of slots in which the secondary source transmits, i.e. the reward with nu = nu* = 0
    def normalised_reward(self, policy):
        pi = self.steady_state(policy).as_array()
        return float(np.dot(pi, policy.as_array()))

    def failure_prob_cost(self, policy):
        return float(np.prod(self.effective_failures(policy)))

    def num_tx_cost(self, policy):
        P = self.survival_products(policy)
        return 1.0 + P[1:self.params.t_max].sum()

    def cost(self, policy, metric=METRIC_THROUGHPUT):
        if check_metric(metric) == METRIC_THROUGHPUT:
            return self.primary_cost(policy)
        if metric == METRIC_FAILURE_PROB:
            return self.failure_prob_cost(policy)
        return self.num_tx_cost(policy)

    """
        Every cost is a ratio N/D that is affine in N and D along any single kappa[theta],
        the enumeration solver relies on this to place the randomised entry exactly
    """
    def cost_terms(self, policy, metric=METRIC_THROUGHPUT):
        if check_metric(metric) == METRIC_THROUGHPUT:
            return self.cost_numerator(policy), self.denominator(policy)
        if metric == METRIC_FAILURE_PROB:
            return self.failure_prob_cost(policy), 1.0
        return self.num_tx_cost(policy), 1.0

    def delta_loss(self, policy, metric=METRIC_THROUGHPUT):
        silent = Policy.zeros(self.params.t_max)
        return max(0.0, self.cost(policy, metric) - self.cost(silent, metric))

    def metrics(self, policy):
        j_p = self.primary_cost(policy)
        return Metrics(
            j_p=j_p,
            w_p=1.0 - j_p,
            w_s=self.secondary_reward(policy),
            j_fp=self.failure_prob_cost(policy),
            j_ntx=self.num_tx_cost(policy),
        )
