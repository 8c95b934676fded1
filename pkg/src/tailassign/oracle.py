"""Brute-force references: route enumeration, full LP, exact set partitioning.

Built only on the core model rules so it can check pricing, master and
driver independently.  Sizes are guarded; these are for desk-scale instances.
"""
from __future__ import annotations

import itertools
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .model import (
    Instance,
    IntegralSolution,
    Route,
    Tail,
    can_end,
    connection_ground_time,
    make_route,
    maintenance_possible,
    order_time,
    start_ground_time,
    tail_may_cover,
)


class OracleSizeError(RuntimeError):
    """Instance too large for brute force."""


def enumerate_routes(
    instance: Instance,
    tail: Tail,
    max_activities: int = 20,
    max_routes: int = 200_000,
    include_empty: bool = True,
) -> List[Route]:
    """Every feasible route of ``tail`` with every legal maintenance pattern."""
    allowed = [a for a in instance.activities if tail_may_cover(instance, tail, a)]
    if len(allowed) > max_activities:
        raise OracleSizeError(f"{len(allowed)} activities for tail {tail.id} (limit {max_activities})")
    allowed.sort(key=lambda a: (order_time(instance, a), a.id))
    required = {pa.activity_id for pa in tail.pre_assignments}
    succ = {}
    for a in allowed:
        out = []
        for b in allowed:
            g = connection_ground_time(instance, a, b)
            if g is not None:
                out.append((b, maintenance_possible(instance, a, b, g)))
        succ[a.id] = out
    fh_cap = tail.fh_limit_minutes
    fc_cap = tail.fc_limit
    found: List[Tuple[Tuple[str, ...], Tuple[int, ...]]] = []

    def visit(path, maint, fh, fc):
        last = path[-1]
        if can_end(tail, last) and required <= {a.id for a in path}:
            found.append((tuple(a.id for a in path), tuple(maint)))
            if len(found) > max_routes:
                raise OracleSizeError(f"more than {max_routes} routes for tail {tail.id}")
        for b, maint_ok in succ[last.id]:
            if b.resets_resources:
                nfh, nfc = b.flying_minutes, b.cycles
            else:
                nfh, nfc = fh + b.flying_minutes, fc + b.cycles
            if nfh <= fh_cap and nfc <= fc_cap:
                visit(path + [b], maint, nfh, nfc)
            if maint_ok and not b.resets_resources and b.flying_minutes <= fh_cap and b.cycles <= fc_cap:
                visit(path + [b], maint + [len(path)], b.flying_minutes, b.cycles)

    for a in allowed:
        if start_ground_time(instance, tail, a) is None:
            continue
        if a.resets_resources:
            fh, fc = a.flying_minutes, a.cycles
        else:
            fh = tail.fh_accumulated_minutes + a.flying_minutes
            fc = tail.fc_accumulated + a.cycles
        if fh <= fh_cap and fc <= fc_cap:
            visit([a], [], fh, fc)

    routes = [make_route(instance, tail.id, ids, m, check=False) for ids, m in sorted(found)]
    if include_empty and not required:
        routes.insert(0, Route(tail.id, (), (), 0.0))
    return routes


def all_routes(instance: Instance, max_total: int = 10_000, **kw) -> Dict[str, List[Route]]:
    out = {}
    total = 0
    for tail in sorted(instance.tails, key=lambda t: t.id):
        out[tail.id] = [r for r in enumerate_routes(instance, tail, **kw) if r.activity_ids]
        total += len(out[tail.id])
        if total > max_total:
            raise OracleSizeError(f"more than {max_total} routes in total")
    return out


def solve_lp_full(instance: Instance, routes: Optional[Dict[str, List[Route]]] = None) -> float:
    """LP relaxation over every enumerable route, solved by HiGHS."""
    if routes is None:
        routes = all_routes(instance)
    acts = sorted(a.id for a in instance.activities)
    row = {a: i for i, a in enumerate(acts)}
    tails = sorted(routes)
    cols = [r for t in tails for r in routes[t]]
    n_act, n_r = len(acts), len(cols)
    if n_act == 0:
        return 0.0
    A_eq = np.zeros((n_act, n_act + n_r))
    A_eq[:, :n_act] = np.eye(n_act)
    A_ub = np.zeros((len(tails), n_act + n_r))
    for j, r in enumerate(cols):
        for a in r.activity_ids:
            A_eq[row[a], n_act + j] = 1.0
        A_ub[tails.index(r.tail_id), n_act + j] = 1.0
    c = np.concatenate([
        [instance.activity_by_id[a].uncovered_penalty for a in acts],
        [r.cost for r in cols],
    ])
    res = linprog(c, A_ub=A_ub if tails else None, b_ub=np.ones(len(tails)) if tails else None,
                  A_eq=A_eq, b_eq=np.ones(n_act), bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"oracle LP failed: {res.message}")
    return float(res.fun)


def solve_exact(
    instance: Instance,
    max_tails: int = 5,
    max_routes: int = 10_000,
    routes: Optional[Dict[str, List[Route]]] = None,
) -> IntegralSolution:
    """Optimal set partitioning by dynamic programming over covered-activity sets."""
    if len(instance.tails) > max_tails:
        raise OracleSizeError(f"{len(instance.tails)} tails (limit {max_tails})")
    if routes is None:
        routes = all_routes(instance, max_total=max_routes)
    acts = sorted(a.id for a in instance.activities)
    bit = {a: 1 << i for i, a in enumerate(acts)}
    penalty = {a: instance.activity_by_id[a].uncovered_penalty for a in acts}
    total_penalty = sum(penalty.values())

    # value of a route relative to leaving its activities uncovered
    best: Dict[int, Tuple[float, tuple]] = {0: (0.0, ())}
    for tid in sorted(routes):
        options = []
        for r in routes[tid]:
            mask = 0
            for a in r.activity_ids:
                mask |= bit[a]
            options.append((mask, r.cost - sum(penalty[a] for a in r.activity_ids), r))
        nxt = dict(best)
        for state, (val, chosen) in best.items():
            for mask, delta, r in options:
                if state & mask:
                    continue
                key = state | mask
                cand = (val + delta, chosen + (r.key,))
                cur = nxt.get(key)
                if cur is None or cand < cur:
                    nxt[key] = cand
        best = nxt
    state, (val, chosen) = min(best.items(), key=lambda kv: (kv[1][0], kv[1][1]))
    lookup = {r.key: r for rs in routes.values() for r in rs}
    picked = tuple(lookup[k] for k in chosen)
    covered = {a for r in picked for a in r.activity_ids}
    uncovered = tuple(a for a in acts if a not in covered)
    objective = sum(r.cost for r in picked) + sum(penalty[a] for a in uncovered)
    return IntegralSolution(routes=picked, uncovered=uncovered, objective=float(objective))


def min_reduced_cost(routes: Sequence[Route], duals) -> Optional[float]:
    from .model import route_reduced_cost

    vals = [route_reduced_cost(r, duals) for r in routes if r.activity_ids]
    return min(vals) if vals else None


def solve_lp_by_vertices(c: np.ndarray, A: np.ndarray, b: np.ndarray) -> Optional[float]:
    """min c'x, Ax = b, x >= 0 by trying every basis (tiny, bounded LPs only)."""
    m, n = A.shape
    if n > 16:
        raise OracleSizeError("vertex enumeration limited to 16 columns")
    best = None
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        xB = np.linalg.solve(B, b)
        if np.any(xB < -1e-9):
            continue
        val = float(c[list(cols)] @ xB)
        if best is None or val < best:
            best = val
    return best
