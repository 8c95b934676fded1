"""Connection arcs and per-tail pricing networks."""
from __future__ import annotations

import bisect
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .model import (
    SINK,
    SOURCE,
    ConnectionArc,
    CostParams,
    Instance,
    Tail,
    can_end,
    connection_ground_time,
    maintenance_possible,
    order_time,
    start_ground_time,
    tail_may_cover,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeData:
    """Per-node consumption copied into the network so pricing needs no instance."""

    fh: int
    fc: int
    resets: bool


@dataclass(frozen=True)
class PricingNetwork:
    tail_id: str
    nodes: Tuple[str, ...]
    arcs: Mapping[str, Tuple[ConnectionArc, ...]]
    intermediate_sinks: Tuple[str, ...]
    segment_boundaries: Tuple[Tuple[str, ...], ...]
    node_data: Mapping[str, NodeData]
    cost_params: CostParams
    diagnostics: Tuple[str, ...] = ()

    @property
    def activity_nodes(self) -> Tuple[str, ...]:
        return tuple(n for n in self.nodes if n not in (SOURCE, SINK))

    def arc_list(self) -> List[ConnectionArc]:
        return [a for n in self.nodes for a in self.arcs.get(n, ())]

    @property
    def is_empty(self) -> bool:
        return not self.arcs.get(SOURCE)


def build_pre_connections(instance: Instance) -> List[ConnectionArc]:
    """Every activity pair joined by a base match and an admissible ground time."""
    by_departure: Dict[str, list] = defaultdict(list)
    for act in instance.activities:
        by_departure[act.departure_base].append(act)
    arcs = []
    lof = instance.lof_pairs
    for a in instance.activities:
        for b in by_departure.get(a.arrival_base, ()):
            ground = connection_ground_time(instance, a, b)
            if ground is None:
                continue
            arcs.append(ConnectionArc(
                a.id, b.id, ground,
                is_planned_lof=(a.id, b.id) in lof,
                maintenance_eligible=maintenance_possible(instance, a, b, ground),
            ))
    return sort_arcs(instance, arcs)


def sort_arcs(instance: Instance, arcs: Iterable[ConnectionArc]) -> List[ConnectionArc]:
    key = {a.id: (order_time(instance, a), a.id) for a in instance.activities}
    return sorted(arcs, key=lambda arc: (key[arc.from_activity], key[arc.to_activity]))


def build_pricing_network(
    instance: Instance,
    tail: Tail,
    arcs: Iterable[ConnectionArc],
    prune: bool = True,
) -> PricingNetwork:
    """Restrict the arc set to one tail and split it at its pre-assignments.

    Pre-assigned events act as intermediate sinks: an arc is kept only if it
    stays inside one segment or closes the segment at its pre-assignment.
    """
    diagnostics: List[str] = []
    allowed = {a.id: a for a in instance.activities if tail_may_cover(instance, tail, a)}
    pas = sorted(tail.pre_assignments, key=lambda pa: pa.latest_start)
    for pa in pas:
        if pa.activity_id not in allowed:
            diagnostics.append(f"pre-assignment {pa.activity_id} not coverable by {tail.id}")
    pa_keys = [pa.latest_start for pa in pas]
    pa_index = {pa.activity_id: k for k, pa in enumerate(pas)}
    n_seg = len(pas) + 1

    in_seg: Dict[str, int] = {SINK: n_seg - 1}
    out_seg: Dict[str, int] = {SOURCE: 0}
    for aid, act in allowed.items():
        if aid in pa_index:
            in_seg[aid] = pa_index[aid]
            out_seg[aid] = pa_index[aid] + 1
        else:
            seg = bisect.bisect_right(pa_keys, order_time(instance, act))
            in_seg[aid] = out_seg[aid] = seg

    adjacency: Dict[str, List[ConnectionArc]] = defaultdict(list)
    for arc in arcs:
        f, t = arc.from_activity, arc.to_activity
        if f in allowed and t in allowed and out_seg[f] == in_seg[t]:
            adjacency[f].append(arc)
    for aid, act in allowed.items():
        ground = start_ground_time(instance, tail, act) if in_seg[aid] == 0 else None
        if ground is not None:
            adjacency[SOURCE].append(ConnectionArc(SOURCE, aid, ground))
        if out_seg[aid] == n_seg - 1 and can_end(tail, act):
            adjacency[aid].append(ConnectionArc(aid, SINK, 0))

    order = sorted(allowed, key=lambda aid: (order_time(instance, allowed[aid]), aid))
    rank = {aid: i for i, aid in enumerate(order)}
    rank[SINK] = len(order)
    for node in adjacency:
        adjacency[node].sort(key=lambda arc: (rank[arc.to_activity], arc.to_activity))

    net = PricingNetwork(
        tail_id=tail.id,
        nodes=(SOURCE, *order, SINK),
        arcs={n: tuple(v) for n, v in adjacency.items()},
        intermediate_sinks=tuple(pa.activity_id for pa in pas),
        segment_boundaries=_segments((SOURCE, *order, SINK), in_seg, n_seg),
        node_data={
            aid: NodeData(act.flying_minutes, act.cycles, act.resets_resources)
            for aid, act in allowed.items()
        },
        cost_params=instance.cost_params,
        diagnostics=tuple(diagnostics),
    )
    if prune:
        net = reachability_prune(net)
    return net


def _segments(nodes: Sequence[str], in_seg: Mapping[str, int], n_seg: int) -> Tuple[Tuple[str, ...], ...]:
    parts: List[List[str]] = [[] for _ in range(n_seg)]
    for node in nodes:
        parts[0 if node == SOURCE else in_seg[node]].append(node)
    return tuple(tuple(p) for p in parts)


def reachability_prune(network: PricingNetwork) -> PricingNetwork:
    """Drop nodes that lie on no SOURCE -> SINK path."""
    succ = network.arcs
    pred: Dict[str, List[str]] = defaultdict(list)
    for node, out in succ.items():
        for arc in out:
            pred[arc.to_activity].append(node)
    forward = _reach(SOURCE, lambda n: (a.to_activity for a in succ.get(n, ())))
    backward = _reach(SINK, lambda n: pred.get(n, ()))
    keep = forward & backward
    diagnostics = list(network.diagnostics)
    if SOURCE not in keep:
        keep = set()
    for pa in network.intermediate_sinks:
        if pa not in keep:
            diagnostics.append(f"pre-assignment {pa} unreachable for {network.tail_id}: tail has no feasible route")
            keep = set()
            break
    keep_nodes = tuple(n for n in network.nodes if n in keep or n in (SOURCE, SINK))
    arcs = {}
    for node in keep_nodes:
        if node not in keep:
            continue
        out = tuple(a for a in succ.get(node, ()) if a.to_activity in keep)
        if out:
            arcs[node] = out
    segments = tuple(tuple(n for n in seg if n in keep_nodes) for seg in network.segment_boundaries)
    return replace(
        network,
        nodes=keep_nodes,
        arcs=arcs,
        segment_boundaries=segments,
        node_data={n: d for n, d in network.node_data.items() if n in keep},
        diagnostics=tuple(diagnostics),
    )


def _reach(start: str, neighbours) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in neighbours(node):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def build_all_networks(
    instance: Instance, arcs: Sequence[ConnectionArc]
) -> Dict[str, PricingNetwork]:
    nets = {}
    for tail in sorted(instance.tails, key=lambda t: t.id):
        nets[tail.id] = build_pricing_network(instance, tail, arcs)
        for note in nets[tail.id].diagnostics:
            log.warning(note)
    return nets
