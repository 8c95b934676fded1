"""Revised simplex for  min c'x  s.t.  Ax = b, x >= 0.

Devex pricing (approximate steepest edge) with reduced costs updated from
the pivot row.  Stalling on degenerate vertices first perturbs b, and if it
recurs, switches to Bland's rule.  The explicit basis inverse is updated by
row operations and refactorized periodically.  Duals are the simplex
multipliers y = c_B B^-1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
PIVOT_TOL = 1e-7


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    objective: float
    basis: np.ndarray
    iterations: int


class _SingularBasis(ArithmeticError):
    pass


class _Tableau:
    def __init__(self, c, A, b, basis, tol):
        self.c = c
        self.A = A
        self.AT = sp.csr_matrix(A.T)
        self.b = b
        self.rhs = b          # b, or a perturbed copy while degeneracy is being broken
        self.basis = np.array(basis, dtype=np.int64)
        self.tol = tol
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise _SingularBasis(str(exc)) from exc
        self.xB = self.Binv @ self.rhs
        self.xB[np.abs(self.xB) < self.tol] = 0.0

    def duals(self):
        return self.c[self.basis] @ self.Binv

    def reduced_costs(self, allowed):
        d = self.c - self.AT @ self.duals()
        d[~allowed] = 0.0
        d[self.basis] = 0.0
        return d

    def pivot(self, r: int, q: int, u: np.ndarray) -> None:
        theta = self.xB[r] / u[r]
        self.xB -= theta * u
        self.xB[r] = theta
        pivot_row = self.Binv[r] / u[r]
        self.Binv -= np.outer(u, pivot_row)
        self.Binv[r] = pivot_row
        self.basis[r] = q

    def perturb(self) -> None:
        """Lift degenerate basic values by small deterministic amounts."""
        rng = np.random.default_rng(len(self.basis))
        delta = np.where(self.xB <= self.tol, (1.0 + rng.random(len(self.xB))) * 1e-6, 0.0)
        self.rhs = self.rhs + self.A[:, self.basis] @ delta
        self.refactor()

    def run(self, allowed: np.ndarray, max_iter: int, degenerate_limit: int = 50,
            refactor_every: int = 100) -> tuple:
        """Primal simplex.  A run of degenerate pivots first triggers a
        perturbation of b; if stalling recurs, Bland's rule takes over."""
        tol = self.tol
        iters = 0
        degenerate = 0
        bland = False
        perturbed = used_perturbation = False
        d = self.reduced_costs(allowed)
        weights = np.ones(len(d))
        while True:
            if iters >= max_iter:
                self._unperturb()
                return ITERATION_LIMIT, iters
            candidates = np.flatnonzero(d < -tol)
            if candidates.size == 0:
                # confirm with freshly computed prices before stopping
                d = self.reduced_costs(allowed)
                candidates = np.flatnonzero(d < -tol)
            if candidates.size == 0:
                if perturbed:
                    perturbed = False
                    status, it = self._unperturb(allowed, max_iter - iters)
                    iters += it
                    if status != OPTIMAL:
                        return status, iters
                    d = self.reduced_costs(allowed)
                    continue
                return OPTIMAL, iters
            if bland:
                q = int(candidates[0])
            else:
                dc = d[candidates]
                q = int(candidates[np.argmax(dc * dc / weights[candidates])])
            u = self.Binv @ self.A[:, q]
            rows = np.flatnonzero(u > PIVOT_TOL)
            if rows.size == 0:
                self._unperturb()
                return UNBOUNDED, iters
            if bland:
                # textbook minimum ratio, smallest basic index on ties
                ratios = np.maximum(self.xB[rows], 0.0) / u[rows]
                ties = rows[ratios <= ratios.min() + 1e-12]
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                # two-pass ratio test: among near-minimal ratios take the largest pivot
                xr = np.maximum(self.xB[rows], 0.0)
                bound = ((xr + tol) / u[rows]).min()
                ties = rows[xr / u[rows] <= bound]
                r = int(ties[np.argmax(u[ties])])
            self.xB[r] = max(self.xB[r], 0.0)
            theta = self.xB[r] / u[r]
            # degeneracy is judged by objective progress; once b is perturbed,
            # tiny but genuine steps are expected and only zero steps count
            if perturbed:
                stalled = theta <= tol
            else:
                stalled = -theta * d[q] <= 1e-9 * (1.0 + abs(self.c[self.basis] @ self.xB))
            if stalled:
                degenerate += 1
                if degenerate > degenerate_limit:
                    degenerate = 0
                    if not perturbed and not used_perturbation:
                        # the ratio test above is stale once b moves: start the pivot afresh
                        perturbed = used_perturbation = True
                        self.perturb()
                        continue
                    bland = True
            else:
                degenerate = 0
                bland = False
            # pivot row of B^-1 A updates prices and devex weights
            alpha = self.AT @ self.Binv[r]
            leaving = self.basis[r]
            step = d[q] / u[r]
            d -= step * alpha
            d[leaving] = -step
            wq = weights[q]
            ratio = alpha / u[r]
            weights = np.maximum(weights, ratio * ratio * wq)
            weights[leaving] = max(wq / (u[r] * u[r]), 1.0)
            self.pivot(r, q, u)
            iters += 1
            if iters % refactor_every == 0:
                self.refactor()
                d = self.reduced_costs(allowed)
                if weights.max() > 1e8:
                    weights = np.ones(len(d))
            else:
                self.xB[np.abs(self.xB) < tol] = 0.0
                d[~allowed] = 0.0
                d[self.basis] = 0.0

    def _unperturb(self, allowed=None, max_iter: int = 0) -> tuple:
        """Restore b; repair any primal infeasibility with dual simplex pivots."""
        if self.rhs is self.b:
            return OPTIMAL, 0
        self.rhs = self.b
        self.refactor()
        if allowed is None:
            return OPTIMAL, 0
        return self.dual_simplex(allowed, max_iter)

    def dual_simplex(self, allowed: np.ndarray, max_iter: int, blocked: Optional[np.ndarray] = None) -> tuple:
        """Dual simplex from a dual feasible basis.

        A row is infeasible when x_B < 0 or when a ``blocked`` column is basic
        above zero (it leaves at its bound 0).  Rows are chosen by exact dual
        steepest edge, which the explicit inverse makes cheap; entering columns
        by a Harris two-pass ratio test.
        """
        iters = 0
        d = self.reduced_costs(allowed)
        while iters < max_iter:
            infeas = np.maximum(-self.xB, 0.0)
            if blocked is not None:
                up = blocked[self.basis]
                infeas[up] = np.maximum(self.xB[up], infeas[up])
            if infeas.max() <= 1e-9:
                return OPTIMAL, iters
            weights = np.einsum("ij,ij->i", self.Binv, self.Binv)
            r = int(np.argmax(infeas ** 2 / weights))
            sign = -1.0 if self.xB[r] < 0 else 1.0
            alpha = self.AT @ self.Binv[r]
            alpha[self.basis] = 0.0
            step = sign * alpha
            cols = np.flatnonzero(allowed & (step > PIVOT_TOL))
            if cols.size == 0:
                return INFEASIBLE, iters
            dc = np.maximum(d[cols], 0.0)
            bound = ((dc + self.tol) / step[cols]).min()
            ok = dc / step[cols] <= bound
            q = int(cols[ok][np.argmax(step[cols][ok])])
            theta_d = max(d[q], 0.0) / step[q]
            leaving = self.basis[r]
            d -= theta_d * step
            d[q] = 0.0
            d[leaving] = -sign * theta_d
            self.pivot(r, q, self.Binv @ self.A[:, q])
            iters += 1
            if iters % 100 == 0:
                self.refactor()
                d = self.reduced_costs(allowed)
        return ITERATION_LIMIT, iters

    def drive_out(self, mask: np.ndarray, allowed: np.ndarray) -> None:
        """Pivot zero-valued basic columns flagged in ``mask`` out where possible."""
        changed = False
        for r in range(len(self.basis)):
            if not mask[self.basis[r]] or self.xB[r] > self.tol:
                continue
            row = self.AT @ self.Binv[r]
            row[self.basis] = 0.0
            cols = np.flatnonzero(allowed & (np.abs(row) > 1e-7))
            if cols.size == 0:
                continue  # redundant row: the column stays basic at zero
            q = int(cols[0])
            self.xB[r] = 0.0
            self.pivot(r, q, self.Binv @ self.A[:, q])
            changed = True
        if changed:
            self.refactor()


def solve_standard_form(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    basis: Optional[Sequence[int]] = None,
    tol: float = 1e-9,
    max_iter: int = 50_000,
    blocked: Optional[np.ndarray] = None,
) -> SimplexResult:
    """Solve the LP.

    ``basis`` is a warm start: used directly when primal feasible, repaired
    by dual simplex when only dual feasible, and otherwise replaced by a
    phase 1 from artificials.  Columns flagged in ``blocked`` are held at zero.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    blocked = np.zeros(n, dtype=bool) if blocked is None else np.asarray(blocked, dtype=bool)
    if m == 0:
        if np.any(c[~blocked] < -tol):
            return SimplexResult(UNBOUNDED, np.zeros(n), np.zeros(0), -np.inf, np.zeros(0, dtype=np.int64), 0)
        return SimplexResult(OPTIMAL, np.zeros(n), np.zeros(0), 0.0, np.zeros(0, dtype=np.int64), 0)
    if basis is not None:
        try:
            res = _solve_warm(c, A, b, basis, tol, max_iter, blocked)
        except _SingularBasis:
            res = None
        if res is not None:
            return res
    return _solve_cold(c, A, b, tol, max_iter, blocked)


def _finish(tab: _Tableau, c, allowed, blocked, max_iter, iters) -> Optional[SimplexResult]:
    status, it = tab.run(allowed, max_iter - iters)
    iters += it
    n = len(c)
    x = np.zeros(tab.A.shape[1])
    x[tab.basis] = tab.xB
    x = np.clip(x[:n], 0.0, None)
    if status == OPTIMAL and np.any(x[blocked] > 1e-7):
        return None
    return SimplexResult(status, x, tab.duals(), float(c @ x), tab.basis, iters)


def _solve_warm(c, A, b, basis, tol, max_iter, blocked) -> Optional[SimplexResult]:
    m = A.shape[0]
    basis = list(basis)
    if len(basis) != m or len(set(basis)) != m:
        return None
    tab = _Tableau(c, A, b, basis, tol)
    if not np.all(np.isfinite(tab.Binv)) or np.abs(tab.Binv).max() > 1e10:
        return None
    allowed = ~blocked
    iters = 0
    if tab.reduced_costs(allowed).min() >= -1e-7:
        # bound or rhs changes on an optimal basis: dual simplex
        status, iters = tab.dual_simplex(allowed, max_iter, blocked)
        if status != OPTIMAL:
            return None
    elif tab.xB.min() >= -1e-7:
        tab.xB = np.maximum(tab.xB, 0.0)
        if np.any(blocked[tab.basis] & (tab.xB > tol)):
            # push blocked columns to zero from this feasible basis first
            tab.c = blocked.astype(float)
            status, iters = tab.run(allowed, max_iter)
            if status != OPTIMAL or tab.c[tab.basis] @ tab.xB > 1e-7:
                return None
            tab.c = c
    else:
        return None
    tab.xB = np.maximum(tab.xB, 0.0)
    tab.drive_out(blocked, allowed)
    return _finish(tab, c, allowed, blocked, max_iter, iters)


def _solve_cold(c, A, b, tol, max_iter, blocked) -> SimplexResult:
    """Phase 1 with one artificial per row, then phase 2."""
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A1 = np.hstack([A * sign[:, None], np.eye(m)])
    b1 = b * sign
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab = _Tableau(c1, A1, b1, np.arange(n, n + m), tol)
    status, iters = tab.run(np.concatenate([~blocked, np.ones(m, dtype=bool)]), max_iter)
    if status == ITERATION_LIMIT:
        return SimplexResult(status, np.zeros(n), np.zeros(m), np.nan, tab.basis, iters)
    if tab.c[tab.basis] @ tab.xB > 1e-7:
        return SimplexResult(INFEASIBLE, np.zeros(n), tab.duals() * sign, np.nan, tab.basis, iters)
    allowed = np.concatenate([~blocked, np.zeros(m, dtype=bool)])
    tab.drive_out(np.concatenate([np.zeros(n, dtype=bool), np.ones(m, dtype=bool)]), allowed)
    tab.c = np.concatenate([c, np.zeros(m)])
    status, it = tab.run(allowed, max_iter - iters)
    iters += it
    x = np.zeros(n + m)
    x[tab.basis] = tab.xB
    # the scaled rows only flip dual signs
    return SimplexResult(status, np.clip(x[:n], 0.0, None), tab.duals() * sign, float(c @ x[:n]),
                         tab.basis, iters)
