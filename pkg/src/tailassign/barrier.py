"""Primal-dual interior point method for  min c'x  s.t.  Ax = b, x >= 0.

Mehrotra predictor-corrector on the normal equations A D A' dy = r, with a
dense Cholesky factor of the m x m system and a sparse A.  No crossover: the
returned duals sit near the centre of the optimal dual face, which steadies
the prices handed to column generation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

OPTIMAL = "optimal"
NUMERICAL = "numerical"


@dataclass
class BarrierResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float
    iterations: int


def _normal_solve(A, d):
    M = (A @ sp.diags(d) @ A.T).toarray()
    reg = 1e-14 * max(1.0, float(np.abs(np.diag(M)).max()))
    M[np.diag_indices_from(M)] += reg
    try:
        factor = la.cho_factor(M, check_finite=False)
    except la.LinAlgError:
        M[np.diag_indices_from(M)] += 1e-8 * max(1.0, float(np.abs(np.diag(M)).max()))
        factor = la.cho_factor(M, check_finite=False)
    return lambda r: la.cho_solve(factor, r, check_finite=False)


def _step(v, dv):
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, (-v[neg] / dv[neg]).min()))


def solve_barrier(c, A, b, tol: float = 1e-9, feas_tol: float = 1e-8, max_iter: int = 100) -> BarrierResult:
    """``A`` must have full row rank (the master always carries one slack per row)."""
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    A = sp.csr_matrix(A)
    m, n = A.shape

    # Mehrotra starting point
    solve0 = _normal_solve(A, np.ones(n))
    x = A.T @ solve0(b)
    y = solve0(A @ c)
    s = c - A.T @ y
    x += max(-1.5 * x.min(), 0.0)
    s += max(-1.5 * s.min(), 0.0)
    if not (x.sum() > 0 and s.sum() > 0):
        # b = 0 or c in the row space of A: the shift above leaves a zero vector
        x += 1.0
        s += 1.0
    xs = x @ s
    x += 0.5 * xs / s.sum()
    s += 0.5 * xs / x.sum()

    nb, nc = 1.0 + np.linalg.norm(b), 1.0 + np.linalg.norm(c)
    status = NUMERICAL
    best = None
    it = 0
    for it in range(1, max_iter + 1):
        rp = b - A @ x
        rd = c - A.T @ y - s
        mu = (x @ s) / n
        pobj, dobj = c @ x, b @ y
        err = max(np.linalg.norm(rp) / nb, np.linalg.norm(rd) / nc, abs(pobj - dobj) / (1.0 + abs(pobj)))
        if best is None or err < best[0]:
            best = (err, x, y, s)
        if (np.linalg.norm(rp) / nb < feas_tol and np.linalg.norm(rd) / nc < feas_tol
                and abs(pobj - dobj) / (1.0 + abs(pobj)) < tol):
            status = OPTIMAL
            break
        d = x / s
        solve = _normal_solve(A, d)

        def direction(r_xs):
            dy = solve(rp + A @ (d * rd - r_xs / s))
            ds = rd - A.T @ dy
            dx = (r_xs - x * ds) / s
            return dx, dy, ds

        # predictor
        dx, dy, ds = direction(-x * s)
        ap, ad = _step(x, dx), _step(s, ds)
        mu_aff = ((x + ap * dx) @ (s + ad * ds)) / n
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        dx, dy, ds = direction(-x * s - dx * ds + sigma * mu)
        ap = 0.995 * _step(x, dx)
        ad = 0.995 * _step(s, ds)
        x = x + ap * dx
        y = y + ad * dy
        s = s + ad * ds
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(s))):
            break
    if status != OPTIMAL:
        # stalled: accept the best iterate if it is close enough
        err, x, y, s = best
        if err < 1e-7:
            status = OPTIMAL
    return BarrierResult(status, np.clip(x, 0.0, None), y, s, float(c @ x), it)
