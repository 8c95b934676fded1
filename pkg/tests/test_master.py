from __future__ import annotations

import itertools
import logging
import re

import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import chain_instance, instance_list
from tailassign.master import (
    add_columns,
    fix_variable,
    init_rmp,
    lp_reduced_costs,
    coverage_residual,
    slack_id,
    solve_ip,
    solve_lp,
    write_lp,
)
from tailassign.model import CostParams, Instance, Route, make_route
from tailassign.oracle import all_routes, solve_lp_full

PENALTY = 1000.0


def _routes(*specs):
    return [Route(t, tuple(ids), (), float(c)) for t, ids, c in specs]


def _overlapping():
    """Three pairwise overlapping routes on two tails: the LP splits them in halves."""
    inst = chain_instance(tails=2)
    state = init_rmp(inst)
    add_columns(state, _routes(("T1", ("F1", "F2"), 0), ("T1", ("F1", "F3"), 0), ("T2", ("F2", "F3"), 0)))
    return inst, state


class TestInitRmp:
    def test_slack_only_lp(self, chain):
        state = init_rmp(chain)
        assert state.slack_vars == [slack_id(a) for a in ("F1", "F2", "F3", "F4")]
        lp = solve_lp(state)
        assert lp.objective == pytest.approx(4 * PENALTY)
        assert all(v == pytest.approx(PENALTY) for v in lp.duals.pi.values())
        assert all(v == pytest.approx(0.0) for v in lp.duals.beta.values())

    def test_no_activities(self, chain):
        empty = Instance((), chain.tails, chain.airports)
        assert solve_lp(init_rmp(empty)).objective == 0.0

    def test_one_convexity_row_per_tail(self, two_tail):
        state = init_rmp(two_tail)
        assert sorted(state.tail_rows) == ["T1", "T2"]
        assert state.n_rows == len(two_tail.activities) + 2


class TestColumns:
    def test_dedup(self, chain):
        state = init_rmp(chain)
        route = make_route(chain, "T1", ("F1", "F2"))
        assert add_columns(state, [route]) == 1
        assert add_columns(state, [route]) == 0
        assert add_columns(state, [make_route(chain, "T1", ("F1",)), make_route(chain, "T1", ("F3",))]) == 2

    def test_inactive_tail_skipped_with_warning(self, chain, caplog):
        state = init_rmp(chain)
        add_columns(state, [make_route(chain, "T1", ("F1", "F2"))])
        fix_variable(state, 0)
        with caplog.at_level(logging.WARNING):
            assert add_columns(state, [make_route(chain, "T1", ("F3",))]) == 0
        assert "inactive" in caplog.text

    def test_column_growth_keeps_entries(self, chain):
        state = init_rmp(chain)
        routes = [Route("T1", ("F1",), (), float(k)) for k in range(40)]
        # distinct keys through distinct maintenance tuples
        routes = [Route(r.tail_id, r.activity_ids, (k,), r.cost) for k, r in enumerate(routes)]
        assert add_columns(state, routes) == 40
        assert state.route_matrix().shape[1] == 40
        assert state.route_matrix()[state.row_index["F1"]].sum() == 40


class TestSolveLp:
    def test_dominant_column(self):
        inst = chain_instance(cost=CostParams())
        state = init_rmp(inst)
        add_columns(state, [make_route(inst, "T1", ("F1", "F2", "F3", "F4"))])
        lp = solve_lp(state)
        assert lp.objective == pytest.approx(0.0)
        assert lp.primal[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("backend", ["simplex", "barrier", "highs"])
    def test_matches_enumeration_lp(self, backend):
        for inst in instance_list(8):
            routes = all_routes(inst)
            state = init_rmp(inst)
            add_columns(state, [r for rs in routes.values() for r in rs])
            lp = solve_lp(state, backend=backend, warm_start=False)
            ref = solve_lp_full(inst, routes)
            assert lp.objective == pytest.approx(ref, rel=1e-6, abs=1e-6)
            # dual feasibility over the pool and the tail-dual sign
            assert lp_reduced_costs(state, lp.duals).min() >= -1e-6
            assert all(b <= 1e-7 for b in lp.duals.beta.values())
            assert np.abs(coverage_residual(state, lp)).max() <= 1e-7

    def test_objective_never_rises_with_columns(self):
        inst = instance_list(1, start_seed=4)[0]
        pool = [r for rs in all_routes(inst).values() for r in rs]
        state = init_rmp(inst)
        last = solve_lp(state).objective
        for k in range(0, len(pool), 5):
            add_columns(state, pool[k:k + 5])
            now = solve_lp(state).objective
            assert now <= last + 1e-9
            last = now

    def test_fixing_a_route_covers_its_activities(self, chain):
        state = init_rmp(chain)
        add_columns(state, [make_route(chain, "T1", ("F1", "F2"))])
        fix_variable(state, 0)
        lp = solve_lp(state)
        assert lp.primal[slack_id("F1")] == pytest.approx(0.0)
        assert lp.primal[slack_id("F2")] == pytest.approx(0.0)
        assert lp.primal[0] == pytest.approx(1.0)

    def test_fixing_one_route_per_tail(self):
        inst = chain_instance(tails=2)
        state = init_rmp(inst)
        add_columns(state, _routes(("T1", ("F1", "F2"), 10), ("T2", ("F3",), 0)))
        fix_variable(state, 0)
        fix_variable(state, 1)
        assert solve_lp(state).objective == pytest.approx(10.0 + PENALTY)

    def test_fixing_a_slack_is_rejected(self, chain):
        with pytest.raises(ValueError):
            fix_variable(init_rmp(chain), slack_id("F1"))

    def test_conflicting_fixes_reported(self):
        inst, state = _overlapping()
        lp = solve_lp(state, fixed_one={0, 2})
        assert lp.status == "infeasible"
        assert set(lp.conflicting_fixed) == {0, 2}


class TestSolveIp:
    def test_integral_lp_no_branching(self):
        inst = chain_instance(cost=CostParams())
        state = init_rmp(inst)
        add_columns(state, [make_route(inst, "T1", ("F1", "F2", "F3", "F4"))])
        sol = solve_ip(state)
        assert sol.route_vars == (0,)
        assert sol.nodes == 1 and sol.optimal
        assert sol.objective == pytest.approx(0.0)

    def test_overlapping_routes_against_subsets(self):
        inst, state = _overlapping()
        lp = solve_lp(state)
        sol = solve_ip(state)
        best = _subset_optimum(state)
        assert sol.objective == pytest.approx(best)
        assert sol.objective > lp.objective + 1.0

    def test_empty_pool(self, chain):
        sol = solve_ip(init_rmp(chain))
        assert sol.routes == ()
        assert sol.objective == pytest.approx(4 * PENALTY)
        assert sol.uncovered == ("F1", "F2", "F3", "F4")

    def test_random_pools_against_subsets(self):
        rng = np.random.default_rng(2)
        for inst in instance_list(10):
            pool = [r for rs in all_routes(inst).values() for r in rs]
            picks = rng.choice(len(pool), size=min(12, len(pool)), replace=False)
            state = init_rmp(inst)
            add_columns(state, [pool[k] for k in sorted(picks)])
            sol = solve_ip(state)
            assert sol.objective == pytest.approx(_subset_optimum(state))
            assert sol.objective >= solve_lp(state).objective - 1e-6
            covered = [a for r in sol.routes for a in r.activity_ids] + list(sol.uncovered)
            assert sorted(covered) == sorted(state.activity_ids)

    def test_node_limit_reports_non_optimal(self):
        inst, state = _overlapping()
        sol = solve_ip(state, max_nodes=1)
        assert sol.objective >= _subset_optimum(state) - 1e-9


def _subset_optimum(state) -> float:
    """Exhaustive check over every subset of pool columns."""
    cols = state.columns
    pen = dict(zip(state.activity_ids, state.penalties))
    best = float(sum(pen.values()))
    for k in range(1, len(cols) + 1):
        for combo in itertools.combinations(range(len(cols)), k):
            acts = [a for j in combo for a in cols[j].activity_ids]
            tails = [cols[j].tail_id for j in combo]
            if len(set(acts)) < len(acts) or len(set(tails)) < len(tails):
                continue
            val = sum(cols[j].cost for j in combo) + sum(p for a, p in pen.items() if a not in acts)
            best = min(best, val)
    return best


def test_lp_dump_round_trip(tmp_path):
    inst = instance_list(1, start_seed=2)[0]
    state = init_rmp(inst)
    add_columns(state, [r for rs in all_routes(inst).values() for r in rs][:25])
    fix_variable(state, 0)
    path = tmp_path / "rmp.lp"
    write_lp(state, path)
    assert solve_lp(state).objective == pytest.approx(_solve_dump(path.read_text()), rel=1e-9)


def _solve_dump(text: str) -> float:
    """Tiny reader for the dump format, solved with HiGHS."""
    obj_part = text.split("Subject To")[0].split("obj:")[1]
    names = []
    cost = {}
    for coef, name in re.findall(r"\+ ([-\d.e+]+) (\w+)", obj_part):
        names.append(name)
        cost[name] = float(coef)
    index = {n: k for k, n in enumerate(names)}
    body = text.split("Subject To")[1].split("Bounds")[0]
    A_eq, A_ub = [], []
    for head, terms, sense in re.findall(r" (\w+):\n(.*?)\n (=|<=) 1", body, flags=re.S):
        row = np.zeros(len(names))
        for name in re.findall(r"\+ (\w+)", terms):
            row[index[name]] = 1.0
        (A_eq if sense == "=" else A_ub).append(row)
    lower = {m: 1.0 for m in re.findall(r" (\w+) >= 1", text.split("Bounds")[1])}
    bounds = [(lower.get(n, 0.0), None) for n in names]
    res = linprog([cost[n] for n in names], A_ub=np.array(A_ub) if A_ub else None,
                  b_ub=np.ones(len(A_ub)) if A_ub else None, A_eq=np.array(A_eq), b_eq=np.ones(len(A_eq)),
                  bounds=bounds, method="highs")
    return float(res.fun)
