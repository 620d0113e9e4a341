import unittest

import numpy as np
import numpy.testing as npt
from scipy.optimize import linprog

from Simplex import (STATUS_INFEASIBLE, STATUS_OPTIMAL, STATUS_UNBOUNDED, LinearProgram, SimplexSolver)
from utils import ConfigurationError


def _empty(n):
    return np.zeros((0, n)), np.zeros(0)


class TestSimplex(unittest.TestCase):

    def setUp(self):
        self.solver = SimplexSolver()

    def test_inequalities_only(self):
        a_eq, b_eq = _empty(2)
        lp = LinearProgram(c=[3.0, 2.0], a_eq=a_eq, b_eq=b_eq,
                           a_ub=[[1.0, 1.0], [1.0, 3.0], [1.0, 0.0]], b_ub=[4.0, 6.0, 3.0])
        solution = self.solver.solve(lp)
        self.assertEqual(solution.status, STATUS_OPTIMAL)
        npt.assert_allclose(solution.x, [3.0, 1.0], atol=1e-12)
        self.assertAlmostEqual(solution.objective, 11.0, delta=1e-12)

    def test_equality_row(self):
        a_ub, b_ub = _empty(2)
        lp = LinearProgram(c=[1.0, 1.0], a_eq=[[1.0, 2.0]], b_eq=[4.0], a_ub=a_ub, b_ub=b_ub)
        solution = self.solver.solve(lp)
        npt.assert_allclose(solution.x, [4.0, 0.0], atol=1e-12)

    def test_negative_right_hand_side(self):
        a_eq, b_eq = _empty(1)
        # max -x s.t. x >= 2
        lp = LinearProgram(c=[-1.0], a_eq=a_eq, b_eq=b_eq, a_ub=[[-1.0]], b_ub=[-2.0])
        solution = self.solver.solve(lp)
        self.assertEqual(solution.status, STATUS_OPTIMAL)
        self.assertAlmostEqual(solution.x[0], 2.0, delta=1e-12)

    def test_infeasible(self):
        a_ub, b_ub = _empty(2)
        lp = LinearProgram(c=[1.0, 1.0], a_eq=[[1.0, 1.0]], b_eq=[-1.0], a_ub=a_ub, b_ub=b_ub)
        self.assertEqual(self.solver.solve(lp).status, STATUS_INFEASIBLE)

    def test_unbounded(self):
        a_eq, b_eq = _empty(2)
        lp = LinearProgram(c=[1.0, 0.0], a_eq=a_eq, b_eq=b_eq, a_ub=[[1.0, -1.0]], b_ub=[1.0])
        self.assertEqual(self.solver.solve(lp).status, STATUS_UNBOUNDED)

    def test_redundant_equalities(self):
        a_ub, b_ub = _empty(2)
        lp = LinearProgram(c=[1.0, 0.0], a_eq=[[1.0, 1.0], [2.0, 2.0]], b_eq=[1.0, 2.0], a_ub=a_ub, b_ub=b_ub)
        solution = self.solver.solve(lp)
        self.assertEqual(solution.status, STATUS_OPTIMAL)
        npt.assert_allclose(solution.x, [1.0, 0.0], atol=1e-12)

    def test_fixed_zero(self):
        a_eq, b_eq = _empty(2)
        lp = LinearProgram(c=[2.0, 1.0], a_eq=a_eq, b_eq=b_eq, a_ub=[[1.0, 1.0]], b_ub=[2.0], fixed_zero=[0])
        solution = self.solver.solve(lp)
        npt.assert_allclose(solution.x, [0.0, 2.0], atol=1e-12)

    def test_matches_linprog(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n, m_ub, m_eq = int(rng.integers(2, 7)), int(rng.integers(1, 4)), int(rng.integers(0, 2))
            c = rng.normal(size=n)
            a_ub = rng.uniform(0.1, 1.0, (m_ub, n))
            b_ub = rng.uniform(1.0, 2.0, m_ub)
            x0 = rng.uniform(0.0, 0.1, n)
            a_eq = rng.uniform(0.0, 1.0, (m_eq, n))
            b_eq = a_eq @ x0
            lp = LinearProgram(c=c, a_eq=a_eq, b_eq=b_eq, a_ub=a_ub, b_ub=b_ub)
            ours = self.solver.solve(lp)
            reference = linprog(-c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq if m_eq else None,
                                b_eq=b_eq if m_eq else None, bounds=[(0, None)] * n, method="highs")
            self.assertEqual(ours.status, STATUS_OPTIMAL)
            self.assertAlmostEqual(ours.objective, -reference.fun, delta=1e-8)

    def test_to_text(self):
        a_eq, b_eq = _empty(2)
        lp = LinearProgram(c=[1.0, 2.0], a_eq=a_eq, b_eq=b_eq, a_ub=[[1.0, 1.0]], b_ub=[3.0],
                           fixed_zero=[1], labels=["x", "y"])
        lines = lp.to_text().splitlines()
        self.assertEqual(lines, ["max", "# x y", "1 2", "1 1 <= 3", "0 1 = 0", "end"])

    def test_invalid_program(self):
        with self.assertRaises(ConfigurationError):
            LinearProgram(c=[1.0], a_eq=[[1.0]], b_eq=[1.0, 2.0], a_ub=np.zeros((0, 1)), b_ub=[])
        with self.assertRaises(ConfigurationError):
            LinearProgram(c=[1.0], a_eq=np.zeros((0, 1)), b_eq=[], a_ub=[[1.0]], b_ub=[1.0], fixed_zero=[3])


if __name__ == "__main__":
    unittest.main()
