from __future__ import annotations

import dataclasses
import random

import pytest

from conftest import instance_list
from tailassign.generator import GeneratorParams, generate_instance
from tailassign.model import SOURCE, DualSolution, route_reduced_cost, validate_route
from tailassign.network import build_pre_connections, build_pricing_network
from tailassign.oracle import enumerate_routes, min_reduced_cost
from tailassign.pricing import (
    Label,
    PricingConfig,
    dominates,
    extend_label,
    prune_node_labels,
    solve_pricing,
)


def _arc(net, u, v):
    return next(a for a in net.arcs[u] if a.to_activity == v)


@pytest.fixture
def chain_net(chain):
    return build_pricing_network(chain, chain.tails[0], build_pre_connections(chain))


def _random_duals(instance, rng, lo=-50.0, hi=400.0):
    pi = {a.id: rng.uniform(lo, hi) for a in instance.activities}
    beta = {t.id: -rng.uniform(0, 100) for t in instance.tails}
    return DualSolution(pi, beta)


class TestExtendLabel:
    def test_plain_arc_one_child(self, chain, chain_net):
        duals = DualSolution({"F1": 0.0, "F2": 7.0, "F3": 0.0, "F4": 0.0}, {"T1": 0.0})
        lab = Label("F1", 0.0, 60, 1)
        kids = extend_label(lab, _arc(chain_net, "F1", "F2"), duals, chain.tails[0], chain_net)
        assert len(kids) == 1
        assert (kids[0].reduced_cost, kids[0].fh_used, kids[0].fc_used) == (10.0 - 7.0, 120, 2)

    def test_eligible_arc_twin_resets(self, chain, chain_net):
        duals = DualSolution.zeros(chain)
        lab = Label("F2", 0.0, 500, 6)
        kids = extend_label(lab, _arc(chain_net, "F2", "F3"), duals, chain.tails[0], chain_net)
        assert len(kids) == 2
        keep, reset = kids
        assert (keep.fh_used, keep.fc_used, keep.did_maintenance_here) == (560, 7, False)
        assert (reset.fh_used, reset.fc_used, reset.did_maintenance_here) == (60, 1, True)
        assert reset.reduced_cost == keep.reduced_cost + 50.0

    def test_flying_hour_limit_blocks_extension(self, chain, chain_net):
        # 149 h flown against a 150 h limit; a 2 h leg does not fit
        long_leg = dataclasses.replace(chain_net.node_data["F2"], fh=120)
        net = dataclasses.replace(chain_net, node_data={**chain_net.node_data, "F2": long_leg})
        lab = Label("F1", 0.0, 149 * 60, 1)
        assert extend_label(lab, _arc(net, "F1", "F2"), DualSolution.zeros(chain), chain.tails[0], net) == []


class TestDominance:
    def test_reflexive(self):
        p = Label("X", -1.0, 10, 1)
        assert dominates(p, p)

    def test_cost_better_hours_worse(self):
        assert not dominates(Label("X", -5.0, 130, 1), Label("X", -4.0, 120, 1))

    def test_componentwise(self):
        assert dominates(Label("X", -5.0, 100, 3), Label("X", -4.0, 120, 3))


class TestPruneNodeLabels:
    def _antichain(self, n):
        # cost rises as FH falls: nobody dominates anybody
        return [Label("X", float(k), 1000 - k, 1) for k in range(n)]

    def test_small_antichain_kept(self):
        assert len(prune_node_labels(self._antichain(5), PricingConfig())) == 5

    def test_cap_keeps_lexicographic_smallest(self):
        labels = self._antichain(25)
        random.Random(0).shuffle(labels)
        kept = prune_node_labels(labels, PricingConfig())
        assert [lab.reduced_cost for lab in kept] == [float(k) for k in range(20)]

    def test_single_dominator(self):
        labels = [Label("X", 0.0, 10, 1)] + [Label("X", float(k), 10 + k, 2) for k in range(1, 8)]
        assert prune_node_labels(labels, PricingConfig()) == labels[:1]

    def test_caps_off(self):
        assert len(prune_node_labels(self._antichain(25), PricingConfig.exact())) == 25


class TestSolvePricing:
    def test_zero_duals_nothing_negative(self, chain, chain_net):
        res = solve_pricing(chain_net, DualSolution.zeros(chain), chain.tails[0])
        assert res.routes == ()

    def test_returns_valid_routes_with_tail_dual(self, chain, chain_net):
        duals = DualSolution({"F1": 40.0, "F2": 40.0, "F3": 40.0, "F4": 40.0}, {"T1": -5.0})
        res = solve_pricing(chain_net, duals, chain.tails[0])
        assert res.routes
        for route, rc in zip(res.routes, res.reduced_costs):
            assert validate_route(route, chain) == []
            assert route_reduced_cost(route, duals) == pytest.approx(rc, abs=1e-9)
        assert list(res.reduced_costs) == sorted(res.reduced_costs)
        assert res.min_reduced_cost == res.reduced_costs[0]

    def test_matches_enumeration_on_toy_networks(self):
        rng = random.Random(11)
        for inst in instance_list(12):
            arcs = build_pre_connections(inst)
            for tail in inst.tails:
                net = build_pricing_network(inst, tail, arcs)
                routes = enumerate_routes(inst, tail, include_empty=False)
                for _ in range(5):
                    duals = _random_duals(inst, rng)
                    res = solve_pricing(net, duals, tail, PricingConfig.exact(sink_pool_size=None))
                    expected = min_reduced_cost(routes, duals)
                    if expected is None:
                        assert res.min_reduced_cost is None
                    else:
                        assert res.min_reduced_cost == pytest.approx(expected, abs=1e-9)

    def test_caps_never_beat_exact(self):
        rng = random.Random(5)
        params = GeneratorParams(tails=3, flights=30, horizon_days=3, bases=3, seed=2)
        inst = generate_instance(params)
        arcs = build_pre_connections(inst)
        for tail in inst.tails:
            net = build_pricing_network(inst, tail, arcs)
            for _ in range(10):
                duals = _random_duals(inst, rng)
                capped = solve_pricing(net, duals, tail, PricingConfig()).min_reduced_cost
                exact = solve_pricing(net, duals, tail, PricingConfig.exact()).min_reduced_cost
                if exact is None:
                    assert capped is None
                else:
                    assert capped >= exact - 1e-9

    def test_dominance_does_not_change_minimum(self):
        rng = random.Random(9)
        for inst in instance_list(6):
            arcs = build_pre_connections(inst)
            for tail in inst.tails:
                net = build_pricing_network(inst, tail, arcs)
                duals = _random_duals(inst, rng)
                with_dom = PricingConfig.exact(sink_pool_size=None)
                without = dataclasses.replace(with_dom, use_dominance=False)
                a = solve_pricing(net, duals, tail, with_dom).min_reduced_cost
                b = solve_pricing(net, duals, tail, without).min_reduced_cost
                assert a == pytest.approx(b, abs=1e-9) if a is not None else b is None

    def test_raising_a_dual_never_raises_minimum(self):
        rng = random.Random(4)
        for inst in instance_list(6):
            arcs = build_pre_connections(inst)
            for tail in inst.tails:
                net = build_pricing_network(inst, tail, arcs)
                duals = _random_duals(inst, rng)
                aid = rng.choice(sorted(duals.pi))
                up = DualSolution({**duals.pi, aid: duals.pi[aid] + 100.0}, duals.beta)
                cfg = PricingConfig.exact(sink_pool_size=None)
                before = solve_pricing(net, duals, tail, cfg).min_reduced_cost
                after = solve_pricing(net, up, tail, cfg).min_reduced_cost
                if before is not None:
                    assert after <= before + 1e-9

    def test_sink_pool_limit(self):
        inst = generate_instance(GeneratorParams(tails=2, flights=24, horizon_days=3, bases=3, seed=1))
        tail = inst.tails[0]
        net = build_pricing_network(inst, tail, build_pre_connections(inst))
        duals = DualSolution({a.id: 500.0 for a in inst.activities}, {t.id: 0.0 for t in inst.tails})
        res = solve_pricing(net, duals, tail, PricingConfig(sink_pool_size=7))
        assert len(res.routes) == 7

    def test_unreachable_preassignment_noted(self, two_tail):
        t2 = two_tail.tail_by_id["T2"]
        late = dataclasses.replace(t2, carry_in_ready_time=2000)
        inst = dataclasses.replace(two_tail, tails=(two_tail.tails[0], late))
        net = build_pricing_network(inst, late, build_pre_connections(inst))
        res = solve_pricing(net, DualSolution({a.id: 1e4 for a in inst.activities}, {"T1": 0.0, "T2": 0.0}), late)
        assert res.routes == ()
        assert res.notes
        assert SOURCE not in net.arcs or not net.arcs.get(SOURCE)
