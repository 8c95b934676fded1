"""The authored LP engines against HiGHS on random standard-form LPs."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from tailassign.barrier import solve_barrier
from tailassign.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, solve_standard_form


def _partitioning_lp(rng, m, n, density=0.3, integer_costs=True):
    """Slack identity plus random 0/1 columns, the shape of the master problem."""
    R = (rng.random((m, n)) < density).astype(float)
    A = np.hstack([np.eye(m), R])
    costs = rng.uniform(0, 150, n)
    if integer_costs:
        costs = np.round(costs)  # ties make the LP heavily degenerate
    c = np.concatenate([np.full(m, 100.0), costs])
    return c, A, np.ones(m)


def _highs(c, A, b):
    return linprog(c, A_eq=A, b_eq=b, method="highs").fun


class TestSimplex:
    def test_small_random_lps(self):
        rng = np.random.default_rng(1)
        for _ in range(150):
            m = int(rng.integers(2, 8))
            c, A, b = _partitioning_lp(rng, m, int(rng.integers(m, 20)), 0.4, integer_costs=False)
            res = solve_standard_form(c, A, b)
            assert res.status == OPTIMAL
            assert res.objective == pytest.approx(_highs(c, A, b), abs=1e-7)

    @pytest.mark.parametrize("seed", range(6))
    def test_degenerate_lps_with_duals(self, seed):
        rng = np.random.default_rng(seed)
        c, A, b = _partitioning_lp(rng, int(rng.integers(10, 50)), int(rng.integers(50, 400)),
                                   rng.uniform(0.05, 0.3))
        ref = _highs(c, A, b)
        res = solve_standard_form(c, A, b, basis=list(range(len(b))))
        assert res.objective == pytest.approx(ref, rel=1e-9, abs=1e-7)
        assert (c - res.y @ A).min() >= -1e-6
        assert res.y @ b == pytest.approx(ref, rel=1e-9, abs=1e-7)
        assert np.abs(A @ res.x - b).max() <= 1e-8

    def test_warm_start_after_adding_columns(self):
        rng = np.random.default_rng(7)
        c, A, b = _partitioning_lp(rng, 30, 300)
        half = 30 + 150
        first = solve_standard_form(c[:half], A[:, :half], b)
        res = solve_standard_form(c, A, b, basis=first.basis)
        assert res.objective == pytest.approx(_highs(c, A, b), rel=1e-9)

    def test_blocked_columns_held_at_zero(self):
        rng = np.random.default_rng(3)
        c, A, b = _partitioning_lp(rng, 20, 120)
        m = len(b)
        root = solve_standard_form(c, A, b)
        support = [j for j in range(m, A.shape[1]) if root.x[j] > 1e-6]
        blocked = np.zeros(A.shape[1], dtype=bool)
        blocked[support[:3]] = True
        res = solve_standard_form(c, A, b, basis=root.basis, blocked=blocked)
        keep = ~blocked
        assert res.x[blocked].max() <= 1e-9
        assert res.objective == pytest.approx(_highs(c[keep], A[:, keep], b), rel=1e-9)
        cold = solve_standard_form(c, A, b, blocked=blocked)
        assert cold.objective == pytest.approx(res.objective, rel=1e-9)

    def test_rhs_change_from_optimal_basis(self):
        # an up-branch: subtract a column from b and re-solve from the parent basis
        rng = np.random.default_rng(4)
        c, A, b = _partitioning_lp(rng, 20, 150)
        root = solve_standard_form(c, A, b)
        fractional = [j for j in range(len(b), A.shape[1]) if 1e-6 < root.x[j] < 1 - 1e-6]
        assert fractional
        b2 = b - A[:, fractional[0]]
        res = solve_standard_form(c, A, b2, basis=root.basis)
        assert res.objective == pytest.approx(_highs(c, A, b2), rel=1e-9, abs=1e-9)

    def test_infeasible(self):
        A = np.array([[1.0, 1.0], [1.0, 1.0]])
        res = solve_standard_form(np.ones(2), A, np.array([1.0, 2.0]))
        assert res.status == INFEASIBLE

    def test_unbounded(self):
        A = np.array([[1.0, -1.0]])
        res = solve_standard_form(np.array([0.0, -1.0]), A, np.array([1.0]))
        assert res.status == UNBOUNDED

    def test_negative_rhs(self):
        A = np.array([[-1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        b = np.array([-1.0, 3.0])
        c = np.array([1.0, 2.0, 1.0])
        res = solve_standard_form(c, A, b)
        assert res.objective == pytest.approx(_highs(c, A, b))


class TestBarrier:
    @pytest.mark.parametrize("seed", range(5))
    def test_objective_and_dual_feasibility(self, seed):
        rng = np.random.default_rng(seed)
        c, A, b = _partitioning_lp(rng, int(rng.integers(10, 40)), int(rng.integers(40, 300)))
        res = solve_barrier(c, A, b)
        ref = _highs(c, A, b)
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(ref, rel=1e-7, abs=1e-6)
        assert (c - A.T @ res.y).min() >= -1e-5
        assert res.y @ b == pytest.approx(ref, rel=1e-7, abs=1e-6)
