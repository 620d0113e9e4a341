import logging
from dataclasses import dataclass

import numpy as np

from ChainModel import Policy, check_metric
from constants import METRIC_FAILURE_PROB, METRIC_NUM_TX, METRIC_THROUGHPUT, OCCUPANCY_TOL, TRANSIENT_TOL
from PolicyOptimiser import PolicyOptimiser
from Simplex import (STATUS_INFEASIBLE, STATUS_OPTIMAL, STATUS_UNBOUNDED, LinearProgram, SimplexSolver)
from utils import ConfigurationError, InfeasibleError, NumericalError, UnboundedError

logger = logging.getLogger(__name__)

"""
    OccupancyLP inherits from PolicyOptimiser and solves the constrained problem as a linear
    program over the stationary state-action probabilities z_u(theta), u = 0 silent, u = 1
    transmit. Variables are ordered z_0(0), z_1(0), z_0(1), z_1(1), ..., i.e. index 2*theta + u.

    1) The objective is the expected secondary reward per slot, sum of w(u, theta) z_u(theta)

    2) Equalities: the z sum to one and balance the probability flow into every busy state
       (the flow row of state 0 is implied by the others and dropped)

    3) One inequality row for the selected cost. Throughput bounds the expected primary cost per
       slot; the failure probability and the number of transmissions are ratios over the
       fraction of first transmissions pi(1), linearised by multiplying through

    4) z_0(0) is fixed to zero, i.e. kappa_0 = 1

    The randomised policy is recovered as kappa_theta = z_1(theta) / (z_0(theta) + z_1(theta)).
"""

@dataclass
class Occupancy:
    z: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).reshape(-1, 2)
        if np.any(z < -OCCUPANCY_TOL):
            raise NumericalError(f"ERROR: negative occupancy {z.min()}")
        z = np.where(z < 0.0, 0.0, z)
        if abs(z.sum() - 1.0) > OCCUPANCY_TOL:
            raise NumericalError(f"ERROR: occupancy sums to {z.sum()}, not 1")
        self.z = z

    @property
    def t_max(self):
        return self.z.shape[0] - 1

    def state_probabilities(self):
        return self.z.sum(axis=1)


def _label(theta, u):
    return f"z_{u}({theta})"


class OccupancyLP(PolicyOptimiser):
    def __init__(self, params, solver=None):
        super().__init__(params)
        self.solver = SimplexSolver() if solver is None else solver

    # zeta[u, theta, theta1]: probability of moving from theta to theta1 under action u
    def transition_tensor(self):
        p = self.params
        T, alpha = p.t_max, p.alpha
        zeta = np.zeros((2, T + 1, T + 1))
        for u, fail in ((0, p.rho), (1, p.rho_star)):
            zeta[u, 0, 0], zeta[u, 0, 1] = 1.0 - alpha, alpha
            for theta in range(1, T):
                zeta[u, theta, 0] = (1.0 - alpha) * (1.0 - fail)
                zeta[u, theta, 1] += alpha * (1.0 - fail)
                zeta[u, theta, theta + 1] += fail
            zeta[u, T, 0], zeta[u, T, 1] = 1.0 - alpha, alpha
        return zeta

    """
        Per-state cost coefficients gamma[theta, u] of the constraint row and reward
        coefficients omega[theta, u] of the objective. For failure_prob and num_tx the cost table
        is the linearised constraint row, which needs the absolute bound on the ratio.
    """
    def per_state_values(self, metric, bound=None):
        check_metric(metric)
        p = self.params
        T = p.t_max
        omega = np.zeros((T + 1, 2))
        omega[0, 1] = 1.0 - p.nu
        omega[1:, 1] = 1.0 - p.nu_star

        gamma = np.zeros((T + 1, 2))
        if metric == METRIC_THROUGHPUT:
            gamma[0, :] = 1.0
            gamma[1:, 0] = p.rho
            gamma[1:, 1] = p.rho_star
            return gamma, omega

        if bound is None:
            raise ConfigurationError(f"ERROR: the {metric} constraint row needs the absolute bound")
        if metric == METRIC_FAILURE_PROB:
            gamma[T, 0] += p.rho
            gamma[T, 1] += p.rho_star
            gamma[1, :] -= bound
        elif metric == METRIC_NUM_TX:
            gamma[1:, :] = 1.0
            gamma[1, :] -= bound
        return gamma, omega

    def build_lp(self, spec):
        T = self.params.t_max
        n = 2 * (T + 1)
        bound = self.cost_bound(spec)
        gamma, omega = self.per_state_values(spec.metric, bound)
        zeta = self.transition_tensor()

        a_eq = np.zeros((T + 1, n))
        a_eq[0, :] = 1.0
        for theta1 in range(1, T + 1):
            for theta in range(T + 1):
                for u in (0, 1):
                    a_eq[theta1, 2 * theta + u] -= zeta[u, theta, theta1]
            a_eq[theta1, 2 * theta1] += 1.0
            a_eq[theta1, 2 * theta1 + 1] += 1.0
        b_eq = np.zeros(T + 1)
        b_eq[0] = 1.0

        a_ub = gamma.reshape(1, n)
        b_ub = np.array([bound if spec.metric == METRIC_THROUGHPUT else 0.0])
        labels = [_label(theta, u) for theta in range(T + 1) for u in (0, 1)]
        return LinearProgram(c=omega.reshape(n), a_eq=a_eq, b_eq=b_eq, a_ub=a_ub, b_ub=b_ub,
                             fixed_zero=[0], labels=labels)

    def simplex_solve(self, lp):
        solution = self.solver.solve(lp)
        if solution.status == STATUS_INFEASIBLE:
            raise InfeasibleError("ERROR: occupancy LP is infeasible. Check the constraint!")
        if solution.status == STATUS_UNBOUNDED:
            raise UnboundedError("ERROR: occupancy LP is unbounded")
        if solution.status != STATUS_OPTIMAL:
            raise NumericalError(f"ERROR: simplex stopped with status {solution.status}")
        logger.debug("LP optimum %g in %d pivots", solution.objective, solution.iterations)
        return Occupancy(solution.x, solution.iterations)

    def flow_residual(self, occupancy):
        zeta = self.transition_tensor()
        z = occupancy.z
        inflow = np.einsum("tu,uts->s", z, zeta)
        return float(np.max(np.abs(z.sum(axis=1) - inflow)))

    # States never visited (no occupancy) are given kappa = 0
    @staticmethod
    def extract_policy(occupancy):
        z = occupancy.z
        total = z.sum(axis=1)
        kappa = np.where(total > TRANSIENT_TOL, z[:, 1] / np.where(total > TRANSIENT_TOL, total, 1.0), 0.0)
        return Policy(tuple(np.clip(kappa, 0.0, 1.0)))

    def solve_lp(self, spec):
        lp = self.build_lp(spec)
        occupancy = self.simplex_solve(lp)
        residual = self.flow_residual(occupancy)
        if residual > OCCUPANCY_TOL:
            raise NumericalError(f"ERROR: LP solution violates flow balance by {residual}")
        policy = self.extract_policy(occupancy)
        # kappa_0 = 1 even when the idle state carries no mass
        policy = policy.with_entry(0, 1.0)
        return self._report("lp", spec, policy, self.sigma_from_epsilon(spec), occupancy.iterations)

    def solve(self, spec, solver="lp", allow_general=False):
        if solver == "lp":
            return self.solve_lp(spec)
        return super().solve(spec, solver, allow_general=allow_general)
