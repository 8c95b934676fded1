from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import airports, chain_instance, flight, two_tail_instance
from tailassign.model import (
    CostParams,
    DualSolution,
    Instance,
    PreAssignment,
    Route,
    RouteError,
    make_route,
    route_cost,
    route_reduced_cost,
    validate_instance,
    validate_route,
)


class TestValidateInstance:
    def test_well_formed_two_tail_instance(self, two_tail):
        assert validate_instance(two_tail) == []

    def test_backwards_flight_is_named(self, chain):
        bad = dataclasses.replace(flight("F9", "A", "B", 400, 500), departure_time=500, arrival_time=400)
        inst = dataclasses.replace(chain, activities=chain.activities + (bad,))
        problems = validate_instance(inst)
        assert len(problems) == 1
        assert problems[0].entity == "F9"

    def test_preassignment_away_from_maintenance_base(self, two_tail):
        t2 = two_tail.tail_by_id["T2"]
        moved = dataclasses.replace(t2, pre_assignments=(PreAssignment("M1", "B", 520, 600, 100),))
        # keep the activity consistent with its pre-assignment so only the base rule fires
        acts = tuple(dataclasses.replace(a, departure_base="B", arrival_base="B") if a.id == "M1" else a
                     for a in two_tail.activities)
        inst = dataclasses.replace(two_tail, activities=acts, tails=(two_tail.tails[0], moved))
        problems = validate_instance(inst)
        assert len(problems) == 1
        assert "not a maintenance base" in problems[0].message

    def test_duplicate_ids_and_unknown_references(self, chain):
        dup = chain.activities[0]
        ghost = dataclasses.replace(chain.activities[1], id="F8", restricted_tails=frozenset({"T9"}))
        inst = dataclasses.replace(chain, activities=chain.activities + (dup, ghost),
                                   lof_plan={"T1": ("F1", "F77")})
        text = " ".join(str(v) for v in validate_instance(inst))
        assert "duplicate activity id" in text
        assert "T9" in text
        assert "F77" in text

    def test_bonus_must_stay_below_penalties(self, chain):
        inst = dataclasses.replace(chain, cost_params=CostParams(10.0, 50.0, 5000.0))
        assert any(v.entity == "cost_params" for v in validate_instance(inst))


class TestRouteCost:
    def test_empty_route_costs_nothing(self, chain):
        assert route_cost(Route("T1", ()), chain) == 0.0

    def test_connections_plus_maintenance(self, chain):
        route = Route("T1", ("F1", "F2", "F3", "F4"), (2,))
        assert route_cost(route, chain) == 80.0

    def test_lof_bonus_on_every_arc(self):
        inst = chain_instance(lof=True)
        route = Route("T1", ("F1", "F2", "F3", "F4"), (2,))
        assert route_cost(route, inst) == 65.0

    def test_infeasible_route_rejected(self, chain):
        with pytest.raises(RouteError):
            route_cost(Route("T1", ("F1", "F3")), chain)

    def test_maintenance_only_where_eligible(self, chain):
        # the B turn between F1 and F2 is not a maintenance base
        assert validate_route(Route("T1", ("F1", "F2"), (1,)), chain)

    def test_recomputation_is_bit_identical(self, chain):
        route = Route("T1", ("F1", "F2", "F3", "F4"), (2,))
        assert route_cost(route, chain) == route_cost(route, chain)


class TestReducedCost:
    def _route(self, cost):
        return Route("T1", ("F1", "F2"), (), cost)

    def test_zero_duals_give_cost(self, chain):
        route = make_route(chain, "T1", ("F1", "F2", "F3"))
        assert route_reduced_cost(route, DualSolution.zeros(chain)) == route.cost

    def test_hand_values(self):
        duals = DualSolution({"F1": 30.0, "F2": 40.0}, {"T1": 10.0})
        assert route_reduced_cost(self._route(100.0), duals) == 20.0
        one = Route("T1", ("F1",), (), 50.0)
        assert route_reduced_cost(one, DualSolution({"F1": 70.0}, {"T1": 0.0})) == -20.0

    def test_missing_dual_names_the_entity(self):
        with pytest.raises(KeyError, match="F2"):
            route_reduced_cost(self._route(1.0), DualSolution({"F1": 1.0}, {"T1": 0.0}))
        with pytest.raises(KeyError, match="T1"):
            route_reduced_cost(self._route(1.0), DualSolution({"F1": 1.0, "F2": 1.0}, {}))

    @settings(max_examples=200, deadline=None)
    @given(
        pis=st.lists(st.floats(-100, 100), min_size=2, max_size=2),
        beta=st.floats(-100, 0),
        scale=st.floats(0, 10),
        cost=st.floats(0, 500),
    )
    def test_dual_scaling(self, pis, beta, scale, cost):
        route = self._route(cost)
        duals = DualSolution({"F1": pis[0], "F2": pis[1]}, {"T1": beta})
        scaled = DualSolution({k: scale * v for k, v in duals.pi.items()}, {"T1": scale * beta})
        gap = cost - route_reduced_cost(route, duals)
        gap_scaled = cost - route_reduced_cost(route, scaled)
        assert gap_scaled == pytest.approx(scale * gap, abs=1e-9)


def test_instance_helpers(two_tail):
    assert two_tail.preassignment_owner["M1"][0] == "T2"
    assert two_tail.summary() == {"horizon_days": 1, "tails": 2, "flights": 6, "activities": 7}
    assert isinstance(two_tail_instance(), Instance)
    assert set(airports()) == {"A", "B"}
