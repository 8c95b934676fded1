"""Label-setting pricing for one tail's resource-constrained shortest path."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .model import (
    SINK,
    SOURCE,
    ConnectionArc,
    DualSolution,
    Route,
    Tail,
)
from .network import PricingNetwork


class Label:
    """Partial path: reduced cost so far, FH minutes and cycles since the last check."""

    __slots__ = ("node", "reduced_cost", "fh_used", "fc_used", "predecessor", "did_maintenance_here")

    def __init__(self, node, reduced_cost, fh_used, fc_used, predecessor=None, did_maintenance_here=False):
        self.node = node
        self.reduced_cost = reduced_cost
        self.fh_used = fh_used
        self.fc_used = fc_used
        self.predecessor = predecessor
        self.did_maintenance_here = did_maintenance_here

    def __repr__(self) -> str:
        return (f"Label({self.node!r}, rc={self.reduced_cost:.6g}, fh={self.fh_used}, "
                f"fc={self.fc_used}{', M' if self.did_maintenance_here else ''})")

    def path(self) -> Tuple[Tuple[str, ...], Tuple[int, ...]]:
        """Decode activity ids and maintenance positions from the predecessor chain."""
        nodes = []
        flags = []
        lab = self
        while lab is not None:
            if lab.node not in (SOURCE, SINK):
                nodes.append(lab.node)
                flags.append(lab.did_maintenance_here)
            lab = lab.predecessor
        nodes.reverse()
        flags.reverse()
        return tuple(nodes), tuple(i for i, m in enumerate(flags) if m)


@dataclass(frozen=True)
class PricingConfig:
    lex_sort_threshold: Optional[int] = 12
    max_labels_per_node: Optional[int] = 20
    sink_pool_size: Optional[int] = 100
    reduced_cost_tolerance: float = 1e-6
    use_dominance: bool = True

    def __post_init__(self):
        if (self.lex_sort_threshold is not None and self.max_labels_per_node is not None
                and not self.lex_sort_threshold < self.max_labels_per_node):
            raise ValueError("lex_sort_threshold must be below max_labels_per_node")

    @classmethod
    def exact(cls, sink_pool_size: Optional[int] = 100) -> "PricingConfig":
        """Caps disabled: dominance only, so the minimum is exact."""
        return cls(lex_sort_threshold=None, max_labels_per_node=None, sink_pool_size=sink_pool_size)


@dataclass(frozen=True)
class PricingResult:
    tail_id: str
    routes: Tuple[Route, ...]
    reduced_costs: Tuple[float, ...]
    min_reduced_cost: Optional[float]
    labels_created: int
    notes: Tuple[str, ...] = ()


def extend_label(label: Label, arc: ConnectionArc, duals: DualSolution, tail: Tail,
                 network: PricingNetwork) -> List[Label]:
    """Push a label along one arc; maintenance-eligible arcs produce a reset twin."""
    target = arc.to_activity
    if target == SINK:
        return [Label(SINK, label.reduced_cost, label.fh_used, label.fc_used, label)]
    data = network.node_data[target]
    cp = network.cost_params
    rc = label.reduced_cost - duals.pi[target]
    if arc.from_activity != SOURCE:
        rc += cp.connection_cost
        if arc.is_planned_lof:
            rc -= cp.lof_bonus
    fh_cap = tail.fh_limit_minutes
    fc_cap = tail.fc_limit
    out = []
    if data.resets:
        fh, fc = data.fh, data.fc
    else:
        fh, fc = label.fh_used + data.fh, label.fc_used + data.fc
    if fh <= fh_cap and fc <= fc_cap:
        out.append(Label(target, rc, fh, fc, label))
    if arc.maintenance_eligible and not data.resets and data.fh <= fh_cap and data.fc <= fc_cap:
        out.append(Label(target, rc + cp.maintenance_cost, data.fh, data.fc, label, True))
    return out


def dominates(p: Label, q: Label) -> bool:
    return p.reduced_cost <= q.reduced_cost and p.fh_used <= q.fh_used and p.fc_used <= q.fc_used


def _lex_key(label: Label):
    return (label.reduced_cost, label.fh_used, label.fc_used)


def prune_node_labels(labels: List[Label], config: PricingConfig) -> List[Label]:
    """Keep non-dominated labels, then cap them in lexicographic order."""
    if len(labels) <= 1:
        return list(labels)
    ordered = sorted(labels, key=_lex_key)
    if config.use_dominance:
        kept: List[Label] = []
        for lab in ordered:
            # sorted by cost, so only an earlier label can dominate this one
            for k in kept:
                if k.fh_used <= lab.fh_used and k.fc_used <= lab.fc_used:
                    break
            else:
                kept.append(lab)
    else:
        kept = ordered
    thr = config.lex_sort_threshold
    cap = config.max_labels_per_node
    if thr is not None and cap is not None and len(kept) > thr:
        kept = kept[:cap]
    return kept


def label_sweep(network: PricingNetwork, duals: DualSolution, tail: Tail,
                config: PricingConfig) -> Tuple[List[Label], int]:
    """Run the labeling pass; returns the sink labels (tail dual not yet applied)."""
    if network.is_empty:
        return [], 0
    root = Label(SOURCE, 0.0, tail.fh_accumulated_minutes, tail.fc_accumulated)
    pending: Dict[str, List[Label]] = {SOURCE: [root]}
    created = 1
    sink: List[Label] = []
    arcs = network.arcs
    node_data = network.node_data
    pi = duals.pi
    cp = network.cost_params
    conn, bonus, maint_cost = cp.connection_cost, cp.lof_bonus, cp.maintenance_cost
    fh_cap = tail.fh_limit_minutes
    fc_cap = tail.fc_limit
    for node in network.nodes:
        labels = pending.pop(node, None)
        if not labels:
            continue
        if node == SINK:
            sink = labels
            break
        if node != SOURCE:
            labels = prune_node_labels(labels, config)
        for arc in arcs.get(node, ()):
            target = arc.to_activity
            bucket = pending.setdefault(target, [])
            if target == SINK:
                bucket.extend(Label(SINK, lab.reduced_cost, lab.fh_used, lab.fc_used, lab) for lab in labels)
                created += len(labels)
                continue
            # same arithmetic as extend_label, hoisted out of the label loop
            data = node_data[target]
            delta = -pi[target]
            if node != SOURCE:
                delta += conn
                if arc.is_planned_lof:
                    delta -= bonus
            twin = arc.maintenance_eligible and not data.resets and data.fh <= fh_cap and data.fc <= fc_cap
            for lab in labels:
                rc = lab.reduced_cost + delta
                if data.resets:
                    fh, fc = data.fh, data.fc
                else:
                    fh, fc = lab.fh_used + data.fh, lab.fc_used + data.fc
                if fh <= fh_cap and fc <= fc_cap:
                    bucket.append(Label(target, rc, fh, fc, lab))
                    created += 1
                if twin:
                    bucket.append(Label(target, rc + maint_cost, data.fh, data.fc, lab, True))
                    created += 1
    return sink, created


def solve_pricing(network: PricingNetwork, duals: DualSolution, tail: Tail,
                  config: PricingConfig = PricingConfig()) -> PricingResult:
    """Negative reduced cost routes for one tail, most negative first."""
    notes = tuple(d for d in network.diagnostics if "unreachable" in d)
    sink, created = label_sweep(network, duals, tail, config)
    beta = duals.beta[tail.id]
    tol = config.reduced_cost_tolerance
    best = min((lab.reduced_cost for lab in sink), default=None)
    best = None if best is None else best - beta
    negative = sorted((lab for lab in sink if lab.reduced_cost - beta < -tol), key=_lex_key)
    pool = config.sink_pool_size
    if pool is not None and len(negative) > pool:
        # keep labels tied with the last slot so the path tie-break stays exact
        cut = pool
        while cut < len(negative) and _lex_key(negative[cut]) == _lex_key(negative[pool - 1]):
            cut += 1
        negative = negative[:cut]
    chosen = sorted((lab.reduced_cost - beta, lab.fh_used, lab.fc_used) + lab.path() for lab in negative)
    if pool is not None:
        chosen = chosen[:pool]
    routes = []
    for _, _, _, ids, maint in chosen:
        routes.append(Route(tail.id, ids, maint, _path_cost(network, ids, maint)))
    return PricingResult(
        tail_id=tail.id,
        routes=tuple(routes),
        reduced_costs=tuple(s[0] for s in chosen),
        min_reduced_cost=best,
        labels_created=created,
        notes=notes,
    )


def _path_cost(network: PricingNetwork, ids: Tuple[str, ...], maint: Tuple[int, ...]) -> float:
    cp = network.cost_params
    lof = 0
    for a, b in zip(ids, ids[1:]):
        for arc in network.arcs.get(a, ()):
            if arc.to_activity == b:
                lof += arc.is_planned_lof
                break
    return cp.connection_cost * max(len(ids) - 1, 0) + cp.maintenance_cost * len(maint) - cp.lof_bonus * lof
