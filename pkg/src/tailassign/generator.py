"""Synthetic tail-assignment instances shaped like airline short-haul schedules.

Routes are planted first, one rotation per tail, then decomposed into the
flight list; the planted rotations become the line-of-flight plan.  With
``guarantee_feasible`` the planted rotations form a complete assignment.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .model import (
    Activity,
    ActivityKind,
    Airport,
    CostParams,
    Instance,
    PreAssignment,
    Route,
    Tail,
    connection_ground_time,
    make_route,
    maintenance_possible,
)

DAY = 1440
FIRST_WAVE = 6 * 60
LAST_ARRIVAL = 24 * 60
MCT = 16 * 60


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorParams:
    tails: int = 14
    flights: int = 243
    horizon_days: int = 5
    bases: int = 5
    maintenance_base_fraction: float = 0.4
    mgt_range: Tuple[int, int] = (25, 45)
    preassignment_rate: float = 0.2
    seed: int = 0
    guarantee_feasible: bool = True
    block_range: Tuple[int, int] = (50, 150)
    restriction_rate: float = 0.05

    def check(self) -> None:
        for name in ("tails", "flights", "horizon_days", "bases"):
            if getattr(self, name) <= 0:
                raise GeneratorError(f"{name} must be positive")
        for name in ("maintenance_base_fraction", "preassignment_rate", "restriction_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise GeneratorError(f"{name} must lie in [0, 1]")
        lo, hi = self.mgt_range
        if not 0 <= lo <= hi:
            raise GeneratorError("mgt_range must be an ordered non-negative pair")
        if self.bases < 2:
            raise GeneratorError("need at least two bases")
        if self.flights < self.tails:
            raise GeneratorError("every tail needs at least one flight")
        per_day = -(-self.flights // (self.tails * self.horizon_days))
        if per_day * (self.block_range[1] + hi) > LAST_ARRIVAL - FIRST_WAVE:
            raise GeneratorError(f"{per_day} flights per tail per day do not fit in a day")


def generate_instance(params: GeneratorParams) -> Instance:
    params.check()
    rng = np.random.default_rng(params.seed)
    codes = [f"B{k}" for k in range(params.bases)]
    n_maint = max(1, int(round(params.maintenance_base_fraction * params.bases)))
    airports = {}
    for k, code in enumerate(codes):
        maint = k < n_maint
        airports[code] = Airport(
            mgt=int(rng.integers(params.mgt_range[0], params.mgt_range[1] + 1)),
            mct=MCT,
            is_maintenance_base=maint,
            hangar_capacity=int(rng.integers(2, 5)) if maint else 0,
            required_maintenance_time=int(rng.integers(5, 9)) * 60 if maint else 0,
        )
    maint_bases = codes[:n_maint]

    counts = [params.flights // params.tails] * params.tails
    for k in range(params.flights % params.tails):
        counts[k] += 1

    # planted legs: (tail index, dep base, arr base, dep, arr)
    legs: List[Tuple[int, str, str, int, int]] = []
    plans: Dict[int, List[int]] = {}
    for t in range(params.tails):
        days = min(params.horizon_days, counts[t])
        per_day = [counts[t] // days] * days
        for d in range(counts[t] % days):
            per_day[d] += 1
        base = codes[int(rng.integers(0, params.bases))]
        plans[t] = []
        for d in range(days):
            k_day = per_day[d]
            clock = d * DAY + FIRST_WAVE + int(rng.integers(0, 60))
            day_end = d * DAY + 21 * 60 + int(rng.integers(0, 60))
            blocks = [int(rng.integers(params.block_range[0], params.block_range[1] + 1))
                      for _ in range(k_day)]
            # spread the day's legs so the overnight gap stays below MCT
            spare = (day_end - clock - sum(blocks)) / max(k_day - 1, 1)
            for k in range(k_day):
                last = k == k_day - 1
                if last and d < days - 1 and rng.random() < 0.6:
                    dest = maint_bases[int(rng.integers(0, len(maint_bases)))]
                    if dest == base:
                        dest = _other(codes, base, rng)
                else:
                    dest = _other(codes, base, rng)
                legs.append((t, base, dest, clock, clock + blocks[k]))
                plans[t].append(len(legs) - 1)
                ground = airports[dest].mgt + int(rng.integers(0, 40))
                ground = max(ground, min(int(spare * rng.uniform(0.6, 1.2)), MCT))
                clock += blocks[k] + ground
                base = dest

    order = sorted(range(len(legs)), key=lambda i: (legs[i][3], legs[i][0]))
    width = len(str(len(legs)))
    leg_id = {i: f"F{n + 1:0{width}d}" for n, i in enumerate(order)}
    if not params.guarantee_feasible:
        legs = _jitter(legs, rng)

    activities: Dict[str, Activity] = {}
    restricted: Dict[str, set] = {leg_id[i]: set() for i in range(len(legs))}
    for i, (t, dep_b, arr_b, dep, arr) in enumerate(legs):
        if params.tails > 1 and rng.random() < params.restriction_rate:
            other = int(rng.integers(0, params.tails - 1))
            other += other >= t
            restricted[leg_id[i]].add(_tail_id(other, params.tails))
    for i, (t, dep_b, arr_b, dep, arr) in enumerate(legs):
        aid = leg_id[i]
        activities[aid] = Activity(
            id=aid, kind=ActivityKind.FLIGHT, departure_base=dep_b, arrival_base=arr_b,
            departure_time=dep, arrival_time=arr, flying_hours=(arr - dep) / 60.0, cycles=1,
            uncovered_penalty=float(5000 + 20 * (arr - dep)),
            restricted_tails=frozenset(restricted[aid]),
        )

    # pre-assignments fill overnight gaps at maintenance bases
    sequences: Dict[int, List[str]] = {t: [leg_id[i] for i in plans[t]] for t in plans}
    pre: Dict[int, List[PreAssignment]] = {t: [] for t in plans}
    candidates = []
    for t in range(params.tails):
        for a, b in zip(plans[t], plans[t][1:]):
            base = legs[a][2]
            gap = legs[b][3] - legs[a][4]
            if airports[base].is_maintenance_base and gap >= 2 * airports[base].mgt + 240:
                candidates.append((t, a, b))
    chosen = [c for c in candidates if rng.random() < params.preassignment_rate]
    if params.preassignment_rate > 0 and not chosen and candidates:
        chosen = [candidates[0]]
    taken = set()
    n_pa = 0
    for t, a, b in chosen:
        if t in taken:
            continue
        taken.add(t)
        base = legs[a][2]
        mgt = airports[base].mgt
        earliest = legs[a][4] + mgt
        slack = legs[b][3] - mgt - earliest
        flex = min(60, slack // 4)
        latest = earliest + flex
        duration = legs[b][3] - mgt - latest
        n_pa += 1
        pid = f"M{n_pa:02d}"
        pa = PreAssignment(pid, base, earliest, latest, duration)
        pre[t].append(pa)
        activities[pid] = Activity(
            id=pid, kind=ActivityKind.PRE_ASSIGNED, departure_base=base, arrival_base=base,
            departure_time=earliest, arrival_time=latest + duration, flying_hours=0.0, cycles=0,
            uncovered_penalty=20000.0,
        )
        seq = sequences[t]
        seq.insert(seq.index(leg_id[b]), pid)

    tails = []
    for t in range(params.tails):
        seq = sequences[t]
        first = activities[seq[0]]
        fh_need, fc_need, first_fh, first_fc = _segment_usage(seq, activities, airports)
        fh_limit = fh_need + int(rng.integers(0, 120))
        fc_limit = fc_need + int(rng.integers(0, 2))
        fh_acc = int(rng.integers(0, fh_limit - first_fh + 1))
        fc_acc = int(rng.integers(0, fc_limit - first_fc + 1))
        tails.append(Tail(
            id=_tail_id(t, params.tails),
            carry_in_base=first.departure_base,
            carry_in_ready_time=max(0, first.departure_time - int(rng.integers(30, 120))),
            fh_limit=fh_limit / 60.0,
            fc_limit=fc_limit,
            fh_accumulated=fh_acc / 60.0,
            fc_accumulated=fc_acc,
            pre_assignments=tuple(pre[t]),
        ))

    lof = {_tail_id(t, params.tails): tuple(sequences[t]) for t in range(params.tails)}
    acts = tuple(sorted(activities.values(), key=lambda a: (a.departure_time, a.id)))
    return Instance(
        activities=acts,
        tails=tuple(tails),
        airports=airports,
        lof_plan=lof,
        cost_params=CostParams(connection_cost=100.0, maintenance_cost=400.0, lof_bonus=40.0),
        horizon_days=params.horizon_days,
    )


def _tail_id(t: int, n: int) -> str:
    return f"T{t + 1:0{len(str(n))}d}"


def _other(codes, base, rng) -> str:
    choices = [c for c in codes if c != base]
    return choices[int(rng.integers(0, len(choices)))]


def _jitter(legs, rng):
    out = []
    for t, dep_b, arr_b, dep, arr in legs:
        if rng.random() < 0.15:
            shift = int(rng.integers(-60, 61))
            dep, arr = max(0, dep + shift), max(0, dep + shift) + (arr - dep)
        out.append((t, dep_b, arr_b, dep, arr))
    return out


def _segment_usage(seq, activities, airports):
    """Largest FH/FC between planted checks, and the usage before the first one.

    Overnight stops at maintenance bases long enough for a check count as
    planted maintenance; pre-assigned events always reset.
    """
    segments = []
    fh = fc = 0
    prev = None
    for aid in seq:
        act = activities[aid]
        reset = act.resets_resources
        if prev is not None and not reset and not prev.resets_resources:
            ap = airports[prev.arrival_base]
            gap = act.departure_time - prev.arrival_time
            if ap.is_maintenance_base and ap.required_maintenance_time <= gap <= ap.mct:
                reset = True
        if reset:
            segments.append((fh, fc))
            fh = fc = 0
        fh += act.flying_minutes
        fc += act.cycles
        prev = act
    segments.append((fh, fc))
    return (max(s[0] for s in segments), max(s[1] for s in segments),
            segments[0][0], segments[0][1])


def planted_routes(instance: Instance) -> List[Route]:
    """The line-of-flight plan as routes, with a check at every planted opportunity."""
    routes = []
    acts = instance.activity_by_id
    for tail in instance.tails:
        seq = instance.lof_plan.get(tail.id, ())
        maint = []
        for i in range(1, len(seq)):
            a, b = acts[seq[i - 1]], acts[seq[i]]
            ground = connection_ground_time(instance, a, b)
            if ground is not None and maintenance_possible(instance, a, b, ground):
                maint.append(i)
        routes.append(make_route(instance, tail.id, seq, maint, check=False))
    return routes
