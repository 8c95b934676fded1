"""Connection filtering by propagation under a full-coverage assumption.

Assuming every activity is flown, each activity has exactly one predecessor
(another activity or a tail's carry-in) and at most one activity successor.
That is a matching that saturates all activities; an arc survives only if
some such matching uses it.  Arcs must also lie in at least one tail's
pruned pricing network (qualification, reachability, pre-assignment
segments).  Both filters are repeated until nothing changes.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence, Set, Tuple

import networkx as nx

from .model import SINK, SOURCE, ConnectionArc, Instance
from .network import build_pricing_network, sort_arcs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuccessorDomains:
    domains: Dict[str, FrozenSet[str]]
    assigned_tail_domains: Dict[str, FrozenSet[str]]


@dataclass(frozen=True)
class PropagationResult:
    arcs: Tuple[ConnectionArc, ...]
    available: bool
    pre_count: int
    post_count: int
    rounds: int
    domains: SuccessorDomains = None
    reason: str = ""

    def summary(self) -> str:
        flag = "" if self.available else f" (propagation unavailable: {self.reason})"
        return f"pre-connections {self.pre_count}, post-connections {self.post_count}{flag}"


def propagate_connections(instance: Instance, pre_arcs: Sequence[ConnectionArc]) -> PropagationResult:
    pre = sort_arcs(instance, pre_arcs)
    current = {a.key: a for a in pre}
    tails = sorted(instance.tails, key=lambda t: t.id)
    activity_ids = sorted(a.id for a in instance.activities)
    rounds = 0
    while True:
        rounds += 1
        arcs = [current[k] for k in sorted(current)]
        usable: Set[Tuple[str, str]] = set()
        starts: Dict[str, Set[str]] = defaultdict(set)
        tail_dom: Dict[str, Set[str]] = defaultdict(set)
        ends: Set[str] = set()
        for tail in tails:
            net = build_pricing_network(instance, tail, arcs)
            for arc in net.arc_list():
                if arc.from_activity == SOURCE:
                    starts[arc.to_activity].add(tail.id)
                elif arc.to_activity == SINK:
                    ends.add(arc.from_activity)
                else:
                    usable.add(arc.key)
            for aid in net.activity_nodes:
                tail_dom[aid].add(tail.id)
        uncoverable = [a for a in activity_ids if not tail_dom.get(a)]
        if uncoverable:
            return _unavailable(instance, pre, rounds, f"no tail can cover {uncoverable[0]}")
        kept = {k: current[k] for k in current if k in usable}
        survivors = _matching_filter(activity_ids, kept, starts)
        if survivors is None:
            return _unavailable(instance, pre, rounds, "no assignment covers every activity")
        kept = {k: kept[k] for k in survivors}
        if len(kept) == len(current):
            break
        current = kept

    post = tuple(sort_arcs(instance, current.values()))
    succ: Dict[str, Set[str]] = defaultdict(set)
    for arc in post:
        succ[arc.from_activity].add(arc.to_activity)
    domains = SuccessorDomains(
        domains={a: frozenset(succ[a] | ({SINK} if a in ends else set())) for a in activity_ids},
        assigned_tail_domains={a: frozenset(tail_dom[a]) for a in activity_ids},
    )
    if any(not d for d in domains.domains.values()):
        return _unavailable(instance, pre, rounds, "empty successor domain")
    res = PropagationResult(post, True, len(pre), len(post), rounds, domains)
    log.info(res.summary())
    return res


def _unavailable(instance, pre, rounds, reason) -> PropagationResult:
    res = PropagationResult(tuple(pre), False, len(pre), len(pre), rounds, None, reason)
    log.info(res.summary())
    return res


def _matching_filter(activity_ids, arcs, starts):
    """Keys of arcs used by at least one activity-saturating matching, or None."""
    G = nx.Graph()
    right = [("R", a) for a in activity_ids]
    G.add_nodes_from(right, bipartite=1)
    left_nodes = [("L", a) for a in activity_ids]
    sources = sorted({("S", t) for ts in starts.values() for t in ts})
    G.add_nodes_from(left_nodes + sources, bipartite=0)
    for (f, t) in arcs:
        G.add_edge(("L", f), ("R", t))
    for aid, ts in starts.items():
        for t in ts:
            G.add_edge(("S", t), ("R", aid))
    matching = nx.bipartite.hopcroft_karp_matching(G, top_nodes=left_nodes + sources)
    if any(r not in matching for r in right):
        return None
    D = nx.DiGraph()
    D.add_nodes_from(G.nodes)
    for u, v in G.edges:
        left, rt = (u, v) if u[0] != "R" else (v, u)
        if matching.get(rt) == left:
            D.add_edge(rt, left)
        else:
            D.add_edge(left, rt)
    free = [n for n in left_nodes + sources if n not in matching]
    reach: Set = set()
    for n in free:
        if n not in reach:
            reach |= nx.descendants(D, n) | {n}
    comp = {}
    for k, scc in enumerate(nx.strongly_connected_components(D)):
        for n in scc:
            comp[n] = k
    keep = []
    for (f, t) in arcs:
        lu, rv = ("L", f), ("R", t)
        if matching.get(rv) == lu or comp[lu] == comp[rv] or lu in reach:
            keep.append((f, t))
    return keep
