import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from constants import FEASIBILITY_TOL, PIVOT_TOL, SIMPLEX_MAX_ITER
from utils import ConfigurationError

logger = logging.getLogger(__name__)

"""
    Dense two-phase primal simplex on a full tableau, for the desk-scale linear programs of the
    occupancy formulation (a few dozen variables at most).

    Problems are stated as

        maximise c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0,  x_k = 0 for k in fixed_zero

    1) Phase I drives a sum of artificial variables to zero, which yields a basic feasible
       solution or proves infeasibility. Artificials left in the basis at zero level are pivoted
       out, or their row is dropped when it is redundant

    2) Phase II optimises the original objective from that basis

    Entering and leaving variables follow Bland's rule (lowest index), so degenerate problems
    terminate.
"""

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_ITERATION_LIMIT = "iteration_limit"


@dataclass
class LinearProgram:
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    fixed_zero: List[int] = field(default_factory=list)
    labels: Optional[List[str]] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.a_eq = np.asarray(self.a_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        self.a_ub = np.asarray(self.a_ub, dtype=float).reshape(-1, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        if self.a_eq.shape[0] != self.b_eq.size or self.a_ub.shape[0] != self.b_ub.size:
            raise ConfigurationError("ERROR: constraint rows and right-hand sides disagree in size")
        if any(not 0 <= k < n for k in self.fixed_zero):
            raise ConfigurationError("ERROR: fixed variable index out of range")
        if self.labels is None:
            self.labels = [f"x{k}" for k in range(n)]

    @property
    def n_vars(self):
        return self.c.size

    """
        Plain-text dump, one row per line: the objective, then the equality rows, then the
        inequality rows, then the fixed variables. Columns follow the variable order of `labels`.
    """
    def to_text(self):
        fmt = lambda row: " ".join(f"{v:.12g}" for v in row)
        lines = ["max", "# " + " ".join(self.labels), fmt(self.c)]
        lines += [f"{fmt(row)} = {b:.12g}" for row, b in zip(self.a_eq, self.b_eq)]
        lines += [f"{fmt(row)} <= {b:.12g}" for row, b in zip(self.a_ub, self.b_ub)]
        for k in self.fixed_zero:
            row = np.zeros(self.n_vars)
            row[k] = 1.0
            lines.append(f"{fmt(row)} = 0")
        lines.append("end")
        return "\n".join(lines) + "\n"


@dataclass
class LPSolution:
    status: str
    x: Optional[np.ndarray]
    objective: Optional[float]
    iterations: int


class SimplexSolver:
    def __init__(self, pivot_tol=PIVOT_TOL, feasibility_tol=FEASIBILITY_TOL, max_iter=SIMPLEX_MAX_ITER):
        self.pivot_tol = pivot_tol
        self.feasibility_tol = feasibility_tol
        self.max_iter = max_iter

    @staticmethod
    def _pivot(tableau, row, col):
        tableau[row, :] /= tableau[row, col]
        for r in range(tableau.shape[0]):
            if r != row and tableau[r, col] != 0.0:
                tableau[r, :] -= tableau[r, col] * tableau[row, :]

    # Bland: lowest-index column with negative reduced cost
    def _entering(self, objective_row, allowed):
        for j in range(objective_row.size - 1):
            if allowed[j] and objective_row[j] < -self.pivot_tol:
                return j
        return -1

    # Minimum ratio, ties broken towards the lowest basic variable index
    def _leaving(self, tableau, basis, col):
        best, best_ratio = -1, np.inf
        for i in range(tableau.shape[0] - 1):
            a = tableau[i, col]
            if a > self.pivot_tol:
                ratio = tableau[i, -1] / a
                if ratio < best_ratio - 1e-12 or (abs(ratio - best_ratio) <= 1e-12 and basis[i] < basis[best]):
                    best, best_ratio = i, ratio
        return best

    def _iterate(self, tableau, basis, allowed):
        for it in range(self.max_iter):
            col = self._entering(tableau[-1], allowed)
            if col == -1:
                return STATUS_OPTIMAL, it
            row = self._leaving(tableau, basis, col)
            if row == -1:
                return STATUS_UNBOUNDED, it
            self._pivot(tableau, row, col)
            basis[row] = col
        return STATUS_ITERATION_LIMIT, self.max_iter

    @staticmethod
    def _price_out(tableau, basis, costs):
        tableau[-1, :] = 0.0
        tableau[-1, :costs.size] = -costs
        for r, b in enumerate(basis):
            if costs[b] != 0.0:
                tableau[-1, :] += costs[b] * tableau[r, :]

    def solve(self, lp):
        keep = [k for k in range(lp.n_vars) if k not in set(lp.fixed_zero)]
        c = lp.c[keep]
        a_eq, b_eq = lp.a_eq[:, keep].copy(), lp.b_eq.copy()
        a_ub, b_ub = lp.a_ub[:, keep].copy(), lp.b_ub.copy()
        n = len(keep)
        m_eq, m_ub = a_eq.shape[0], a_ub.shape[0]
        m = m_eq + m_ub

        # Slack per inequality row; rows with negative right-hand side flip sign
        rows = np.zeros((m, n + m_ub))
        rhs = np.zeros(m)
        rows[:m_eq, :n], rhs[:m_eq] = a_eq, b_eq
        rows[m_eq:, :n], rhs[m_eq:] = a_ub, b_ub
        rows[m_eq:, n:] = np.eye(m_ub)
        flip = rhs < 0
        rows[flip] *= -1.0
        rhs[flip] *= -1.0

        # Artificials on equality rows and on flipped inequality rows
        needs_artificial = [i for i in range(m) if i < m_eq or flip[i]]
        n_art = len(needs_artificial)
        width = n + m_ub + n_art
        tableau = np.zeros((m + 1, width + 1))
        tableau[:m, :n + m_ub] = rows
        tableau[:m, -1] = rhs
        basis = []
        for i in range(m):
            if i in needs_artificial:
                col = n + m_ub + needs_artificial.index(i)
                tableau[i, col] = 1.0
                basis.append(col)
            else:
                basis.append(n + i - m_eq)

        iterations = 0
        if n_art:
            phase_one_costs = np.zeros(width)
            phase_one_costs[n + m_ub:] = -1.0
            self._price_out(tableau, basis, phase_one_costs)
            status, it = self._iterate(tableau, basis, np.ones(width, dtype=bool))
            iterations += it
            if status != STATUS_OPTIMAL:
                return LPSolution(status, None, None, iterations)
            if tableau[-1, -1] < -self.feasibility_tol:
                logger.debug("phase I optimum %g, infeasible", tableau[-1, -1])
                return LPSolution(STATUS_INFEASIBLE, None, None, iterations)
            tableau, basis = self._drive_out_artificials(tableau, basis, n + m_ub)

        allowed = np.zeros(tableau.shape[1] - 1, dtype=bool)
        allowed[:n + m_ub] = True
        costs = np.zeros(tableau.shape[1] - 1)
        costs[:n] = c
        self._price_out(tableau, basis, costs)
        status, it = self._iterate(tableau, basis, allowed)
        iterations += it
        if status != STATUS_OPTIMAL:
            return LPSolution(status, None, None, iterations)

        values = np.zeros(tableau.shape[1] - 1)
        for r, b in enumerate(basis):
            values[b] = tableau[r, -1]
        x = np.zeros(lp.n_vars)
        x[keep] = np.where(np.abs(values[:n]) < 1e-12, 0.0, values[:n])
        x = np.maximum(x, 0.0)
        logger.debug("simplex optimum %g after %d pivots", tableau[-1, -1], iterations)
        return LPSolution(STATUS_OPTIMAL, x, float(np.dot(lp.c, x)), iterations)

    def _drive_out_artificials(self, tableau, basis, first_artificial):
        redundant = []
        for r, b in enumerate(basis):
            if b < first_artificial:
                continue
            candidates = [j for j in range(first_artificial) if abs(tableau[r, j]) > self.pivot_tol]
            if candidates:
                self._pivot(tableau, r, candidates[0])
                basis[r] = candidates[0]
            else:
                redundant.append(r)
        if redundant:
            logger.debug("dropping %d redundant rows", len(redundant))
            keep_rows = [r for r in range(tableau.shape[0]) if r not in redundant]
            tableau = tableau[keep_rows]
            basis = [b for r, b in enumerate(basis) if r not in redundant]
        return tableau, basis
