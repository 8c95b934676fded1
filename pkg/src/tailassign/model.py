"""Domain types, business rules and cost arithmetic for tail assignment.

Times are integer minutes from the start of the planning horizon.  Flying
hours are carried in hours on the public types and converted to integer
minutes wherever resources are accumulated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

COST_TOL = 1e-6

SOURCE = "__source__"
SINK = "__sink__"


class ActivityKind(str, Enum):
    FLIGHT = "flight"
    MAINTENANCE_OPPORTUNITY = "maintenance-opportunity"
    PRE_ASSIGNED = "pre-assigned-maintenance"


def hours_to_minutes(hours: float) -> int:
    return int(round(hours * 60.0))


@dataclass(frozen=True)
class Activity:
    id: str
    kind: ActivityKind
    departure_base: str
    arrival_base: str
    departure_time: int
    arrival_time: int
    flying_hours: float
    cycles: int
    uncovered_penalty: float
    restricted_tails: FrozenSet[str] = frozenset()
    required_tags: FrozenSet[str] = frozenset()

    @property
    def flying_minutes(self) -> int:
        return hours_to_minutes(self.flying_hours)

    @property
    def is_flight(self) -> bool:
        return self.kind is ActivityKind.FLIGHT

    @property
    def resets_resources(self) -> bool:
        # any maintenance activity is a check: FH/FC restart from zero
        return self.kind is not ActivityKind.FLIGHT


@dataclass(frozen=True)
class PreAssignment:
    activity_id: str
    base: str
    earliest_start: int
    latest_start: int
    duration: int

    @property
    def latest_finish(self) -> int:
        return self.latest_start + self.duration


@dataclass(frozen=True)
class Tail:
    id: str
    carry_in_base: str
    carry_in_ready_time: int
    fh_limit: float
    fc_limit: int
    fh_accumulated: float = 0.0
    fc_accumulated: int = 0
    qualified_sector_tags: FrozenSet[str] = frozenset()
    pre_assignments: Tuple[PreAssignment, ...] = ()
    overnight_base: Optional[str] = None

    @property
    def fh_limit_minutes(self) -> int:
        return hours_to_minutes(self.fh_limit)

    @property
    def fh_accumulated_minutes(self) -> int:
        return hours_to_minutes(self.fh_accumulated)


@dataclass(frozen=True)
class Airport:
    mgt: int
    mct: int
    is_maintenance_base: bool = False
    hangar_capacity: int = 0
    required_maintenance_time: int = 0


@dataclass(frozen=True)
class CostParams:
    connection_cost: float = 0.0
    maintenance_cost: float = 0.0
    lof_bonus: float = 0.0


@dataclass(frozen=True)
class ConnectionArc:
    from_activity: str
    to_activity: str
    ground_time: int
    is_planned_lof: bool = False
    maintenance_eligible: bool = False

    @property
    def key(self) -> Tuple[str, str]:
        return (self.from_activity, self.to_activity)


@dataclass(frozen=True)
class DualSolution:
    pi: Mapping[str, float]
    beta: Mapping[str, float]

    @classmethod
    def zeros(cls, instance: "Instance") -> "DualSolution":
        return cls({a.id: 0.0 for a in instance.activities}, {t.id: 0.0 for t in instance.tails})


@dataclass(frozen=True)
class Route:
    tail_id: str
    activity_ids: Tuple[str, ...]
    maintenance_positions: Tuple[int, ...] = ()
    cost: float = 0.0

    @property
    def coverage(self) -> FrozenSet[str]:
        return frozenset(self.activity_ids)

    @property
    def key(self) -> Tuple[str, Tuple[str, ...], Tuple[int, ...]]:
        return (self.tail_id, self.activity_ids, self.maintenance_positions)

    @property
    def n_connections(self) -> int:
        return max(len(self.activity_ids) - 1, 0)


@dataclass(frozen=True)
class Instance:
    activities: Tuple[Activity, ...]
    tails: Tuple[Tail, ...]
    airports: Mapping[str, Airport]
    lof_plan: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)
    cost_params: CostParams = CostParams()
    horizon_days: int = 1

    @cached_property
    def activity_by_id(self) -> Dict[str, Activity]:
        return {a.id: a for a in self.activities}

    @cached_property
    def tail_by_id(self) -> Dict[str, Tail]:
        return {t.id: t for t in self.tails}

    @cached_property
    def preassignment_owner(self) -> Dict[str, Tuple[str, PreAssignment]]:
        """Activity id -> (tail id, pre-assignment) for every mandatory event."""
        owner = {}
        for t in self.tails:
            for pa in t.pre_assignments:
                owner[pa.activity_id] = (t.id, pa)
        return owner

    @cached_property
    def lof_pairs(self) -> FrozenSet[Tuple[str, str]]:
        pairs = set()
        for seq in self.lof_plan.values():
            pairs.update(zip(seq, seq[1:]))
        return frozenset(pairs)

    def summary(self) -> Dict[str, int]:
        return {
            "horizon_days": self.horizon_days,
            "tails": len(self.tails),
            "flights": sum(1 for a in self.activities if a.is_flight),
            "activities": len(self.activities),
        }


@dataclass(frozen=True)
class IntegralSolution:
    routes: Tuple[Route, ...]
    uncovered: Tuple[str, ...]
    objective: float
    route_vars: Tuple[int, ...] = ()
    nodes: int = 0
    optimal: bool = True


class RouteError(ValueError):
    """A route violates the feasibility rules of its tail."""


# --------------------------------------------------------------------------
# business rules shared by network construction, enumeration and validation
# --------------------------------------------------------------------------

def order_time(instance: Instance, activity: Activity) -> int:
    """Sort key that makes every feasible connection point forward in time."""
    owned = instance.preassignment_owner.get(activity.id)
    if owned is not None:
        return owned[1].latest_start
    return activity.departure_time


def effective_arrival(instance: Instance, activity: Activity) -> int:
    owned = instance.preassignment_owner.get(activity.id)
    if owned is not None:
        return owned[1].latest_finish
    return activity.arrival_time


def connection_ground_time(instance: Instance, a: Activity, b: Activity) -> Optional[int]:
    """Ground time of the connection a -> b, or None if it is infeasible.

    Ordinary connections need MGT <= ground time <= MCT at the connection
    airport.  A pre-assigned event starts as early as its window allows after
    the inbound arrival; the next activity must leave after its latest finish.
    MCT is not applied around pre-assigned events.
    """
    if a.id == b.id or a.arrival_base != b.departure_base:
        return None
    airport = instance.airports.get(a.arrival_base)
    if airport is None:
        return None
    owner = instance.preassignment_owner
    a_pa = owner.get(a.id)
    b_pa = owner.get(b.id)
    if a_pa is not None and b_pa is not None and a_pa[0] != b_pa[0]:
        return None
    arrival = effective_arrival(instance, a)
    if b_pa is not None:
        pa = b_pa[1]
        start = max(pa.earliest_start, arrival + airport.mgt)
        if start > pa.latest_start:
            return None
        return start - arrival
    ground = b.departure_time - arrival
    if ground < airport.mgt:
        return None
    if a_pa is None and ground > airport.mct:
        return None
    return ground


def maintenance_possible(instance: Instance, a: Activity, b: Activity, ground_time: int) -> bool:
    """A periodic check fits on the connection a -> b."""
    owner = instance.preassignment_owner
    if a.id in owner or b.id in owner:
        return False
    airport = instance.airports.get(a.arrival_base)
    if airport is None or not airport.is_maintenance_base:
        return False
    return ground_time >= airport.required_maintenance_time


def tail_may_cover(instance: Instance, tail: Tail, activity: Activity) -> bool:
    if tail.id in activity.restricted_tails:
        return False
    if not activity.required_tags <= tail.qualified_sector_tags:
        return False
    owned = instance.preassignment_owner.get(activity.id)
    if owned is not None:
        return owned[0] == tail.id
    if activity.kind is ActivityKind.PRE_ASSIGNED:
        # orphan pre-assigned events belong to nobody
        return False
    return True


def start_ground_time(instance: Instance, tail: Tail, activity: Activity) -> Optional[int]:
    """Idle time from carry-in readiness to the first activity, None if impossible."""
    if activity.departure_base != tail.carry_in_base:
        return None
    owned = instance.preassignment_owner.get(activity.id)
    if owned is not None:
        start = max(owned[1].earliest_start, tail.carry_in_ready_time)
        if start > owned[1].latest_start:
            return None
        return start - tail.carry_in_ready_time
    if activity.departure_time < tail.carry_in_ready_time:
        return None
    return activity.departure_time - tail.carry_in_ready_time


def can_end(tail: Tail, activity: Activity) -> bool:
    return tail.overnight_base is None or activity.arrival_base == tail.overnight_base


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    entity: str
    message: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.message}"


def validate_instance(instance: Instance) -> List[Violation]:
    """Return every invariant violation found; an empty list means valid."""
    out: List[Violation] = []
    seen = set()
    for a in instance.activities:
        if a.id in seen:
            out.append(Violation(a.id, "duplicate activity id"))
        seen.add(a.id)
        if a.is_flight:
            if a.arrival_time <= a.departure_time:
                out.append(Violation(a.id, "flight arrival_time must be after departure_time"))
        elif a.arrival_time < a.departure_time:
            out.append(Violation(a.id, "maintenance arrival_time before departure_time"))
        if a.flying_hours < 0:
            out.append(Violation(a.id, "negative flying_hours"))
        if a.cycles not in (0, 1):
            out.append(Violation(a.id, "cycles must be 0 or 1"))
        if not a.is_flight and (a.flying_hours != 0 or a.cycles != 0):
            out.append(Violation(a.id, "maintenance must not consume FH/FC"))
        if not a.uncovered_penalty > 0:
            out.append(Violation(a.id, "uncovered_penalty must be positive"))
        for base in (a.departure_base, a.arrival_base):
            if base not in instance.airports:
                out.append(Violation(a.id, f"unknown airport {base!r}"))
        for t in a.restricted_tails:
            if t not in instance.tail_by_id:
                out.append(Violation(a.id, f"restricted_tails references unknown tail {t!r}"))

    for code, ap in instance.airports.items():
        if ap.mgt < 0 or ap.mct < ap.mgt:
            out.append(Violation(code, "need 0 <= mgt <= mct"))
        if ap.hangar_capacity < 0 or ap.required_maintenance_time < 0:
            out.append(Violation(code, "negative hangar data"))

    owners: Dict[str, List[str]] = {}
    tail_ids = set()
    for t in instance.tails:
        if t.id in tail_ids:
            out.append(Violation(t.id, "duplicate tail id"))
        tail_ids.add(t.id)
        if t.carry_in_base not in instance.airports:
            out.append(Violation(t.id, f"unknown carry-in airport {t.carry_in_base!r}"))
        if t.overnight_base is not None and t.overnight_base not in instance.airports:
            out.append(Violation(t.id, f"unknown overnight airport {t.overnight_base!r}"))
        if not 0 <= t.fh_accumulated <= t.fh_limit:
            out.append(Violation(t.id, "need 0 <= fh_accumulated <= fh_limit"))
        if not 0 <= t.fc_accumulated <= t.fc_limit:
            out.append(Violation(t.id, "need 0 <= fc_accumulated <= fc_limit"))
        windows = []
        for pa in t.pre_assignments:
            owners.setdefault(pa.activity_id, []).append(t.id)
            ent = f"{t.id}/{pa.activity_id}"
            if pa.earliest_start > pa.latest_start:
                out.append(Violation(ent, "earliest_start after latest_start"))
            if pa.duration <= 0:
                out.append(Violation(ent, "duration must be positive"))
            ap = instance.airports.get(pa.base)
            if ap is None:
                out.append(Violation(ent, f"unknown airport {pa.base!r}"))
            elif not ap.is_maintenance_base:
                out.append(Violation(ent, f"pre-assignment base {pa.base!r} is not a maintenance base"))
            act = instance.activity_by_id.get(pa.activity_id)
            if act is None:
                out.append(Violation(ent, "pre-assignment references unknown activity"))
            else:
                if act.kind is not ActivityKind.PRE_ASSIGNED:
                    out.append(Violation(ent, "pre-assignment activity must be pre-assigned-maintenance"))
                if act.departure_base != pa.base or act.arrival_base != pa.base:
                    out.append(Violation(ent, "activity bases differ from pre-assignment base"))
            windows.append((pa.earliest_start, pa.latest_finish, pa.activity_id))
        windows.sort()
        for (s1, e1, i1), (s2, e2, i2) in zip(windows, windows[1:]):
            if s2 < e1:
                out.append(Violation(t.id, f"pre-assignments {i1} and {i2} overlap"))

    for aid, tids in owners.items():
        if len(tids) > 1:
            out.append(Violation(aid, f"pre-assigned to several tails {sorted(tids)}"))
    for a in instance.activities:
        if a.kind is ActivityKind.PRE_ASSIGNED and a.id not in owners:
            out.append(Violation(a.id, "pre-assigned activity not referenced by any tail"))

    for tid, seq in instance.lof_plan.items():
        if tid not in tail_ids:
            out.append(Violation(tid, "lof_plan references unknown tail"))
        for aid in seq:
            if aid not in instance.activity_by_id:
                out.append(Violation(tid, f"lof_plan references unknown activity {aid!r}"))

    cp = instance.cost_params
    if cp.lof_bonus < 0:
        out.append(Violation("cost_params", "lof_bonus must be >= 0"))
    if instance.activities:
        smallest = min(a.uncovered_penalty for a in instance.activities)
        if cp.lof_bonus >= smallest:
            out.append(Violation("cost_params", "lof_bonus must be below every uncovered_penalty"))
    if instance.horizon_days <= 0:
        out.append(Violation("horizon_days", "must be positive"))
    return out


def route_schedule(route: Route, instance: Instance) -> List[int]:
    """Start minute of each activity (pre-assigned events start greedily early)."""
    tail = instance.tail_by_id[route.tail_id]
    starts = []
    prev: Optional[Activity] = None
    for aid in route.activity_ids:
        act = instance.activity_by_id[aid]
        owned = instance.preassignment_owner.get(aid)
        if owned is None:
            starts.append(act.departure_time)
        else:
            pa = owned[1]
            if prev is None:
                ready = tail.carry_in_ready_time
            else:
                ready = effective_arrival(instance, prev) + instance.airports[pa.base].mgt
            starts.append(max(pa.earliest_start, ready))
        prev = act
    return starts


def validate_route(route: Route, instance: Instance) -> List[str]:
    """Re-check every route rule directly against the instance data."""
    problems: List[str] = []
    tail = instance.tail_by_id.get(route.tail_id)
    if tail is None:
        return [f"unknown tail {route.tail_id!r}"]
    acts = []
    for aid in route.activity_ids:
        act = instance.activity_by_id.get(aid)
        if act is None:
            return [f"unknown activity {aid!r}"]
        acts.append(act)
    if len(set(route.activity_ids)) != len(route.activity_ids):
        problems.append("activity repeated")
    for act in acts:
        if not tail_may_cover(instance, tail, act):
            problems.append(f"tail {tail.id} may not cover {act.id}")

    n = len(acts)
    bad_pos = [p for p in route.maintenance_positions if not 1 <= p < n]
    if bad_pos:
        problems.append(f"maintenance positions out of range: {bad_pos}")
    maint = set(route.maintenance_positions)

    if n:
        if start_ground_time(instance, tail, acts[0]) is None:
            problems.append(f"first activity {acts[0].id} not reachable from carry-in")
        if not can_end(tail, acts[-1]):
            problems.append(f"route must end at {tail.overnight_base}")

    fh = tail.fh_accumulated_minutes
    fc = tail.fc_accumulated
    fh_cap = tail.fh_limit_minutes
    for i, act in enumerate(acts):
        if i > 0:
            prev = acts[i - 1]
            ground = connection_ground_time(instance, prev, act)
            if ground is None:
                problems.append(f"no feasible connection {prev.id} -> {act.id}")
            elif i in maint and not maintenance_possible(instance, prev, act, ground):
                problems.append(f"no maintenance opportunity between {prev.id} and {act.id}")
        if act.resets_resources or i in maint:
            fh, fc = 0, 0
        fh += act.flying_minutes
        fc += act.cycles
        if fh > fh_cap:
            problems.append(f"FH limit exceeded at {act.id} ({fh} > {fh_cap} min)")
        if fc > tail.fc_limit:
            problems.append(f"FC limit exceeded at {act.id} ({fc} > {tail.fc_limit})")

    present = set(route.activity_ids)
    for pa in tail.pre_assignments:
        if pa.activity_id not in present:
            problems.append(f"pre-assignment {pa.activity_id} missing")
    if n:
        for act, start in zip(acts, route_schedule(route, instance)):
            owned = instance.preassignment_owner.get(act.id)
            if owned is not None and not owned[1].earliest_start <= start <= owned[1].latest_start:
                problems.append(f"pre-assignment {act.id} starts outside its window")
    return problems


# --------------------------------------------------------------------------
# costs
# --------------------------------------------------------------------------

def route_cost(route: Route, instance: Instance, check: bool = True) -> float:
    """Connection costs plus maintenance costs minus retention bonuses."""
    if check:
        problems = validate_route(route, instance)
        if problems:
            raise RouteError(f"route for {route.tail_id} infeasible: " + "; ".join(problems))
    cp = instance.cost_params
    ids = route.activity_ids
    lof = sum(1 for pair in zip(ids, ids[1:]) if pair in instance.lof_pairs)
    return (
        cp.connection_cost * route.n_connections
        + cp.maintenance_cost * len(route.maintenance_positions)
        - cp.lof_bonus * lof
    )


def make_route(
    instance: Instance,
    tail_id: str,
    activity_ids: Sequence[str],
    maintenance_positions: Sequence[int] = (),
    check: bool = True,
) -> Route:
    route = Route(tail_id, tuple(activity_ids), tuple(sorted(set(maintenance_positions))))
    cost = route_cost(route, instance, check=check)
    return Route(route.tail_id, route.activity_ids, route.maintenance_positions, cost)


def route_reduced_cost(route: Route, duals: DualSolution) -> float:
    """C_r minus the coverage duals of its activities minus its tail dual."""
    total = 0.0
    for aid in route.activity_ids:
        try:
            total += duals.pi[aid]
        except KeyError:
            raise KeyError(f"no dual value for activity {aid!r}") from None
    try:
        beta = duals.beta[route.tail_id]
    except KeyError:
        raise KeyError(f"no dual value for tail {route.tail_id!r}") from None
    return route.cost - total - beta
