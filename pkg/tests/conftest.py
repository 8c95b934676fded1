"""Shared toy instances and instance streams for the test suite."""
from __future__ import annotations

from typing import Dict, Iterator, List, Optional

import pytest

from tailassign.generator import GeneratorParams, generate_instance
from tailassign.model import (
    Activity,
    ActivityKind,
    Airport,
    CostParams,
    Instance,
    PreAssignment,
    Tail,
)
from tailassign.network import build_pre_connections


def flight(fid: str, dep: str, arr: str, t0: int, t1: int, penalty: float = 1000.0, **kw) -> Activity:
    return Activity(fid, ActivityKind.FLIGHT, dep, arr, t0, t1, (t1 - t0) / 60.0, 1, penalty, **kw)


def check(aid: str, base: str, t0: int, t1: int, penalty: float = 1000.0) -> Activity:
    return Activity(aid, ActivityKind.PRE_ASSIGNED, base, base, t0, t1, 0.0, 0, penalty)


def airports(maint_time: int = 60) -> Dict[str, Airport]:
    return {
        "A": Airport(mgt=30, mct=600, is_maintenance_base=True, hangar_capacity=2,
                     required_maintenance_time=maint_time),
        "B": Airport(mgt=30, mct=600),
    }


def chain_instance(cost: CostParams = CostParams(10.0, 50.0, 5.0), lof: bool = False,
                   tails: int = 1) -> Instance:
    """A -> B -> A -> B -> A shuttle; the A turn between F2 and F3 fits a check."""
    acts = (
        flight("F1", "A", "B", 360, 420),
        flight("F2", "B", "A", 480, 540),
        flight("F3", "A", "B", 660, 720),
        flight("F4", "B", "A", 780, 840),
    )
    ts = tuple(Tail(f"T{k + 1}", "A", 300, fh_limit=150.0, fc_limit=100) for k in range(tails))
    plan = {"T1": ("F1", "F2", "F3", "F4")} if lof else {}
    return Instance(acts, ts, airports(), plan, cost, 1)


def two_tail_instance() -> Instance:
    """Two shuttles plus a mid-day check pre-assigned to T2."""
    acts = (
        flight("F1", "A", "B", 360, 420),
        flight("F2", "B", "A", 480, 540),
        flight("F3", "A", "B", 700, 760),
        flight("F4", "B", "A", 820, 880),
        flight("G1", "B", "A", 400, 460),
        flight("G2", "A", "B", 900, 960),
        check("M1", "A", 540, 640),
    )
    t1 = Tail("T1", "A", 300, fh_limit=150.0, fc_limit=100)
    t2 = Tail("T2", "B", 300, fh_limit=150.0, fc_limit=100,
              pre_assignments=(PreAssignment("M1", "A", 520, 600, 100),))
    return Instance(acts, (t1, t2), airports(), {}, CostParams(10.0, 50.0, 0.0), 1)


@pytest.fixture
def chain() -> Instance:
    return chain_instance()


@pytest.fixture
def two_tail() -> Instance:
    return two_tail_instance()


SMALL_SHAPES = ((3, 12, 2, 3), (4, 14, 2, 3), (2, 10, 2, 2), (4, 16, 2, 3))


def small_params(seed: int, shape=(3, 12, 2, 3), **kw) -> GeneratorParams:
    tails, flights, days, bases = shape
    return GeneratorParams(tails=tails, flights=flights, horizon_days=days, bases=bases, seed=seed,
                           preassignment_rate=kw.pop("preassignment_rate", 0.5),
                           guarantee_feasible=kw.pop("guarantee_feasible", seed % 3 != 0), **kw)


def has_maintenance_arc(instance: Instance) -> bool:
    return any(a.maintenance_eligible for a in build_pre_connections(instance))


def has_preassignment(instance: Instance) -> bool:
    return any(t.pre_assignments for t in instance.tails)


def oracle_instances(count: int, start_seed: int = 0, limit: Optional[int] = None) -> Iterator[Instance]:
    """Small seeded instances with a maintenance-eligible arc and a pre-assignment."""
    found = 0
    seed = start_seed
    while found < count:
        if limit is not None and seed - start_seed >= limit:
            raise RuntimeError(f"only {found} qualifying instances in {limit} seeds")
        shape = SMALL_SHAPES[seed % len(SMALL_SHAPES)]
        inst = generate_instance(small_params(seed, shape))
        seed += 1
        if has_maintenance_arc(inst) and has_preassignment(inst):
            found += 1
            yield inst


def instance_list(count: int, start_seed: int = 0) -> List[Instance]:
    return list(oracle_instances(count, start_seed, limit=20 * count))


# --------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run
# --------------------------------------------------------------------------

ACCEPTANCE_LINES: List[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
