"""Restricted master problem: coverage rows, tail convexity rows, slacks.

    min  sum_i C_i f_i + sum_r C_r x_r
    s.t. f_i + sum_r a_ir x_r  = 1     for every activity i
         sum_{r of tail t} x_r <= 1    for every tail t
         f, x >= 0

Route variables are identified by their integer position in ``columns``;
slack variables by ``"f:<activity id>"``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .model import DualSolution, Instance, IntegralSolution, Route
from .barrier import solve_barrier
from .simplex import INFEASIBLE, OPTIMAL, solve_standard_form

log = logging.getLogger(__name__)

VarId = Union[int, str]
LP_TOL = 1e-7


def slack_id(activity_id: str) -> str:
    return f"f:{activity_id}"


@dataclass
class RmpState:
    activity_ids: List[str]
    penalties: np.ndarray
    tail_ids: List[str]
    row_index: Dict[str, int]
    tail_rows: Dict[str, int]
    columns: List[Route] = field(default_factory=list)
    fixed_vars: Set[int] = field(default_factory=set)
    inactive_tails: Set[str] = field(default_factory=set)
    _keys: Dict[tuple, int] = field(default_factory=dict, repr=False)
    _matrix: np.ndarray = field(default=None, repr=False)
    _basis: Optional[List[VarId]] = field(default=None, repr=False)

    @property
    def n_rows(self) -> int:
        return len(self.activity_ids) + len(self.tail_ids)

    @property
    def slack_vars(self) -> List[str]:
        return [slack_id(a) for a in self.activity_ids]

    def column_vector(self, var: int) -> np.ndarray:
        return self._matrix[:, var]

    def route_matrix(self) -> np.ndarray:
        return self._matrix[:, : len(self.columns)]


@dataclass(frozen=True)
class LpSolution:
    objective: float
    primal: Dict[VarId, float]
    duals: DualSolution
    status: str
    conflicting_fixed: Tuple[int, ...] = ()
    iterations: int = 0
    basis: Tuple[VarId, ...] = ()

    def route_values(self) -> Dict[int, float]:
        return {k: v for k, v in self.primal.items() if isinstance(k, int)}


class InfeasibleFixing(RuntimeError):
    pass


def init_rmp(instance: Instance) -> RmpState:
    acts = sorted(a.id for a in instance.activities)
    tails = sorted(t.id for t in instance.tails)
    state = RmpState(
        activity_ids=acts,
        penalties=np.array([instance.activity_by_id[a].uncovered_penalty for a in acts], dtype=float),
        tail_ids=tails,
        row_index={a: i for i, a in enumerate(acts)},
        tail_rows={t: len(acts) + k for k, t in enumerate(tails)},
    )
    state._matrix = np.zeros((state.n_rows, 16))
    return state


def add_columns(state: RmpState, routes: Iterable[Route]) -> int:
    """Append routes as columns, skipping duplicates and inactive tails."""
    added = 0
    for route in routes:
        if route.tail_id in state.inactive_tails:
            log.warning("route for inactive tail %s skipped", route.tail_id)
            continue
        if route.tail_id not in state.tail_rows:
            raise KeyError(f"unknown tail {route.tail_id!r}")
        if route.key in state._keys:
            continue
        var = len(state.columns)
        if var >= state._matrix.shape[1]:
            grown = np.zeros((state.n_rows, 2 * state._matrix.shape[1]))
            grown[:, :var] = state._matrix[:, :var]
            state._matrix = grown
        col = state._matrix[:, var]
        for aid in route.activity_ids:
            col[state.row_index[aid]] = 1.0
        col[state.tail_rows[route.tail_id]] = 1.0
        state.columns.append(route)
        state._keys[route.key] = var
        added += 1
    return added


def fix_variable(state: RmpState, var: VarId) -> None:
    if not isinstance(var, (int, np.integer)) or not 0 <= var < len(state.columns):
        raise ValueError(f"{var!r} is not a route variable")
    var = int(var)
    state.fixed_vars.add(var)
    state.inactive_tails.add(state.columns[var].tail_id)


def _conflicts(state: RmpState, fixed: Iterable[int]) -> Tuple[int, ...]:
    fixed = sorted(fixed)
    if not fixed:
        return ()
    load = state._matrix[:, fixed].sum(axis=1)
    rows = np.flatnonzero(load > 1.0 + 1e-9)
    if rows.size == 0:
        return ()
    sub = state._matrix[np.ix_(rows, fixed)]
    return tuple(v for k, v in enumerate(fixed) if sub[:, k].any())


def solve_lp(
    state: RmpState,
    fixed_one: Optional[Iterable[int]] = None,
    excluded: Optional[Iterable[int]] = None,
    backend: str = "simplex",
    warm_start: bool = True,
    basis: Optional[Sequence[VarId]] = None,
) -> LpSolution:
    """LP relaxation with duals.  Fixed variables get lower bound 1.

    Excluded columns stay in the simplex matrix, held at zero, so a basis from
    a neighbouring node remains meaningful.  ``basis`` overrides the stored one.
    """
    fixed = set(state.fixed_vars if fixed_one is None else fixed_one)
    excluded = set(excluded or ()) - fixed
    conflict = _conflicts(state, fixed)
    if conflict:
        return LpSolution(np.nan, {}, DualSolution({}, {}), INFEASIBLE, conflict)

    n_act = len(state.activity_ids)
    n_tail = len(state.tail_ids)
    m = state.n_rows
    if backend == "simplex":
        route_vars = list(range(len(state.columns)))
    else:
        route_vars = [j for j in range(len(state.columns)) if j not in excluded]
    R = state._matrix[:, route_vars]
    costs = np.array([state.columns[j].cost for j in route_vars], dtype=float)
    c = np.concatenate([state.penalties, np.zeros(n_tail), costs])
    b = np.ones(m)
    fixed_pos = [k for k, j in enumerate(route_vars) if j in fixed]
    const = 0.0
    if fixed_pos:
        b = b - R[:, fixed_pos].sum(axis=1)
        const = float(costs[fixed_pos].sum())
    labels: List[VarId] = (
        [slack_id(a) for a in state.activity_ids]
        + [f"s:{t}" for t in state.tail_ids]
        + route_vars
    )
    found_basis: Tuple[VarId, ...] = ()

    if backend == "highs":
        x, y, status, iters = _solve_highs(c, R, b, n_act)
    elif backend == "barrier":
        A = sp.hstack([sp.identity(m, format="csr"), sp.csr_matrix(R)], format="csr")
        res = solve_barrier(c, A, b)
        x, y, status, iters = res.x, res.y, res.status, res.iterations
        if status != OPTIMAL:
            # a stalled interior point is not a verdict on the LP; let the simplex decide
            log.info("barrier %s after %d iterations; re-solving with the simplex", status, iters)
            return solve_lp(state, fixed_one, excluded, "simplex", warm_start, basis)
    else:
        A = np.hstack([np.eye(m), R])
        blocked = np.zeros(A.shape[1], dtype=bool)
        blocked[[m + j for j in excluded]] = True
        # slack basis: always feasible because b >= 0 once conflicts are ruled out
        start = list(range(m))
        wanted = basis if basis is not None else (state._basis if warm_start else None)
        if wanted is not None:
            pos = {lab: k for k, lab in enumerate(labels)}
            if all(lab in pos for lab in wanted):
                start = [pos[lab] for lab in wanted]
        res = solve_standard_form(c, A, b, basis=start, blocked=blocked)
        x, y, status, iters = res.x, res.y, res.status, res.iterations
        if status == OPTIMAL:
            found_basis = tuple(labels[k] for k in res.basis)
            if basis is None:
                state._basis = list(found_basis)
    if status != OPTIMAL:
        return LpSolution(np.nan, {}, DualSolution({}, {}), status, tuple(sorted(fixed)))

    primal: Dict[VarId, float] = {}
    for k, lab in enumerate(labels):
        if isinstance(lab, str) and lab.startswith("s:"):
            continue
        val = float(x[k])
        if k >= m and route_vars[k - m] in fixed:
            val += 1.0
        primal[lab] = val
    objective = float(c @ x) + const
    pi = {a: float(y[i]) for i, a in enumerate(state.activity_ids)}
    beta = {t: float(y[n_act + k]) for k, t in enumerate(state.tail_ids)}
    return LpSolution(objective, primal, DualSolution(pi, beta), OPTIMAL, (), iters, found_basis)


def _solve_highs(c, R, b, n_act):
    """HiGHS on the same LP; convexity rows become <= rows without explicit slacks."""
    from scipy.optimize import linprog
    from scipy.sparse import csc_matrix, hstack, identity

    m = R.shape[0]
    A_eq = hstack([identity(n_act, format="csc"), csc_matrix(R[:n_act])], format="csc")
    A_ub = hstack([csc_matrix((m - n_act, n_act)), csc_matrix(R[n_act:])], format="csc")
    cost = np.concatenate([c[:n_act], c[m:]])
    res = linprog(cost, A_ub=A_ub, b_ub=b[n_act:], A_eq=A_eq, b_eq=b[:n_act], bounds=(0, None),
                  method="highs-ds")
    if res.status != 0:
        return None, None, INFEASIBLE, 0
    x = np.zeros(m + R.shape[1])
    x[:n_act] = res.x[:n_act]
    x[m:] = res.x[n_act:]
    x[n_act:m] = b[n_act:] - A_ub @ res.x
    y = np.concatenate([res.eqlin.marginals, res.ineqlin.marginals])
    return x, y, OPTIMAL, int(getattr(res, "nit", 0))


def lp_reduced_costs(state: RmpState, duals: DualSolution) -> np.ndarray:
    """Reduced cost of every pool column under ``duals``."""
    y = np.array([duals.pi[a] for a in state.activity_ids] + [duals.beta[t] for t in state.tail_ids])
    costs = np.array([r.cost for r in state.columns])
    return costs - y @ state.route_matrix()


def coverage_residual(state: RmpState, solution: LpSolution) -> np.ndarray:
    """f_i + sum_r a_ir x_r - 1 per activity row."""
    x = np.array([solution.primal.get(j, 0.0) for j in range(len(state.columns))])
    f = np.array([solution.primal[slack_id(a)] for a in state.activity_ids])
    n_act = len(state.activity_ids)
    return f + state.route_matrix()[:n_act] @ x - 1.0


# --------------------------------------------------------------------------
# integer solve over the existing pool
# --------------------------------------------------------------------------

def _most_fractional(values: Dict[int, float], tol: float = 1e-6) -> Optional[int]:
    best = None
    best_dist = None
    for var in sorted(values):
        v = values[var]
        frac = v - np.floor(v)
        if frac <= tol or frac >= 1 - tol:
            continue
        dist = abs(frac - 0.5)
        if best is None or dist < best_dist - 1e-12:
            best, best_dist = var, dist
    return best


def _dive(state: RmpState, root: LpSolution) -> Tuple[Optional[LpSolution], int]:
    """Primal heuristic: fix the largest fractional route to 1 and re-solve until integral."""
    sol, fixed, solves = root, set(state.fixed_vars), 0
    while True:
        frac = [(v, j) for j, v in sol.route_values().items() if 1e-6 < v - np.floor(v) < 1 - 1e-6]
        if not frac:
            return sol, solves
        _, j = max(frac, key=lambda p: (p[0], -p[1]))
        fixed.add(j)
        sol = solve_lp(state, fixed_one=fixed, basis=sol.basis)
        solves += 1
        if sol.status != OPTIMAL:
            return None, solves


def solve_ip(state: RmpState, max_nodes: Optional[int] = None,
             time_limit: Optional[float] = None) -> IntegralSolution:
    """Branch-and-bound over the column pool with slacks; exact for the pool.

    Dives depth-first (x_r = 1 child first) until an incumbent exists, then
    switches to best-bound selection.  Children warm start from the parent
    basis.  Once an incumbent exists, columns whose root reduced cost alone
    closes the gap are held at zero everywhere.  Hitting ``max_nodes`` or
    ``time_limit`` returns the incumbent with ``optimal=False``.
    """
    start = time.perf_counter()
    counter = 0
    root = solve_lp(state, warm_start=True)
    nodes = 1
    incumbent = None
    incumbent_obj = np.inf
    if root.status != OPTIMAL:
        raise InfeasibleFixing(f"fixed variables conflict: {root.conflicting_fixed}")
    root_rc = lp_reduced_costs(state, root.duals)
    pruned: FrozenSet[int] = frozenset()
    seed, dive_nodes = _dive(state, root)
    nodes += dive_nodes
    if seed is not None and _most_fractional(root.route_values()) is not None:
        incumbent = (seed, frozenset())
        incumbent_obj = seed.objective
        pruned = frozenset(int(j) for j in np.flatnonzero(root_rc >= incumbent_obj - root.objective - 1e-9))
    open_nodes: List[tuple] = []

    def push(bound, depth, fixed, excluded, sol, basis):
        nonlocal counter
        counter += 1
        open_nodes.append((bound, depth, counter, fixed, excluded, sol, basis))

    push(root.objective, 0, frozenset(state.fixed_vars), frozenset(), root, root.basis)
    complete = True
    while open_nodes:
        if incumbent is None:
            # depth-first dive: deepest, then best bound
            idx = min(range(len(open_nodes)), key=lambda k: (-open_nodes[k][1], open_nodes[k][0], open_nodes[k][2]))
        else:
            idx = min(range(len(open_nodes)), key=lambda k: (open_nodes[k][0], open_nodes[k][2]))
        bound, depth, _, fixed, excluded, sol, basis = open_nodes.pop(idx)
        if bound >= incumbent_obj - 1e-9:
            continue
        if (max_nodes is not None and nodes >= max_nodes) or (
                time_limit is not None and time.perf_counter() - start > time_limit):
            complete = False
            break
        if sol is None:
            sol = solve_lp(state, fixed_one=fixed, excluded=excluded | (pruned - fixed), basis=basis)
            nodes += 1
            if sol.status != OPTIMAL or sol.objective >= incumbent_obj - 1e-9:
                continue
        branch = _most_fractional(sol.route_values())
        if branch is None:
            incumbent = (sol, fixed)
            incumbent_obj = sol.objective
            gap = incumbent_obj - root.objective
            pruned = frozenset(int(j) for j in np.flatnonzero(root_rc >= gap - 1e-9))
            continue
        # the x_r = 1 child is pushed first so it wins ties in the dive
        push(sol.objective, depth + 1, fixed | {branch}, excluded, None, sol.basis)
        push(sol.objective, depth + 1, fixed, excluded | {branch}, None, sol.basis)
    if incumbent is None:
        # fall back to the fixed routes plus slacks
        sol = solve_lp(state, fixed_one=state.fixed_vars, excluded=set(range(len(state.columns))))
        incumbent = (sol, frozenset(state.fixed_vars))
        complete = False
    sol = incumbent[0]
    chosen = tuple(sorted(j for j, v in sol.route_values().items() if v > 0.5))
    uncovered = tuple(a for a in state.activity_ids if sol.primal[slack_id(a)] > 0.5)
    objective = float(sum(state.columns[j].cost for j in chosen)
                      + sum(state.penalties[state.row_index[a]] for a in uncovered))
    return IntegralSolution(
        routes=tuple(state.columns[j] for j in chosen),
        route_vars=chosen,
        uncovered=uncovered,
        objective=objective,
        nodes=nodes,
        optimal=complete,
    )


# --------------------------------------------------------------------------
# LP text dump
# --------------------------------------------------------------------------

def write_lp(state: RmpState, path: Union[str, Path]) -> None:
    """Write the current RMP in CPLEX LP format."""
    lines = ["\\ restricted master problem", "Minimize", " obj:"]
    terms = [f" + {p:.12g} f_{i}" for i, p in enumerate(state.penalties)]
    terms += [f" + {r.cost:.12g} x_{j}" for j, r in enumerate(state.columns)]
    lines.extend(_wrap(terms))
    lines.append("Subject To")
    M = state.route_matrix()
    for i, aid in enumerate(state.activity_ids):
        row = [f" + f_{i}"] + [f" + x_{j}" for j in np.flatnonzero(M[i])]
        lines.append(f" cover_{i}:")
        lines.extend(_wrap(row))
        lines.append(" = 1")
    for t in state.tail_ids:
        r = state.tail_rows[t]
        cols = np.flatnonzero(M[r])
        if cols.size == 0:
            continue
        lines.append(f" tail_{r - len(state.activity_ids)}:")
        lines.extend(_wrap([f" + x_{j}" for j in cols]))
        lines.append(" <= 1")
    lines.append("Bounds")
    for j in sorted(state.fixed_vars):
        lines.append(f" x_{j} >= 1")
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")


def _wrap(terms: Sequence[str], width: int = 8) -> List[str]:
    return ["   " + "".join(terms[k:k + width]) for k in range(0, len(terms), width)]
