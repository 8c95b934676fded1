"""Column generation driver: parallel pricing, disjoint path selection,
variable fixing and the final integer solve."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .master import (
    OPTIMAL,
    LpSolution,
    RmpState,
    add_columns,
    fix_variable,
    init_rmp,
    solve_ip,
    solve_lp,
)
from .model import (
    DualSolution,
    Instance,
    IntegralSolution,
    Route,
    route_reduced_cost,
    validate_route,
)
from .network import PricingNetwork, build_all_networks, build_pre_connections
from .pricing import PricingConfig, PricingResult, solve_pricing
from .propagation import PropagationResult, propagate_connections

log = logging.getLogger(__name__)

LP_BACKENDS = ("simplex", "barrier", "highs")
POST = "post"
PRE = "pre"


@dataclass(frozen=True)
class DriverConfig:
    epsilon: float = 0.9
    strict_disjoint: bool = False
    fix_threshold_init: float = 0.95
    fix_threshold_floor: float = 0.8
    fix_threshold_step: float = 0.05
    cp_iterations: int = 10
    use_propagation: bool = True
    max_cg_iterations: int = 2000
    convergence_tolerance: float = 1e-6
    parallel_workers: int = 1
    serial_mode: bool = False
    exact_final_pricing: bool = True
    time_limit: Optional[float] = None
    # a node cap keeps runs reproducible; a wall-clock cap does not
    ip_max_nodes: Optional[int] = 300
    ip_time_limit: Optional[float] = None
    lp_backend: str = "simplex"
    pricing: PricingConfig = PricingConfig()

    def __post_init__(self):
        if not 0.8 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0.8, 1.0]")
        if not self.fix_threshold_floor < self.fix_threshold_init:
            raise ValueError("fix threshold floor must be below the initial threshold")
        if self.fix_threshold_step <= 0:
            raise ValueError("fix threshold step must be positive")
        if self.lp_backend not in LP_BACKENDS:
            raise ValueError(f"lp_backend must be one of {LP_BACKENDS}")
        if self.parallel_workers < 1:
            raise ValueError("need at least one worker")


@dataclass
class IterationLog:
    iteration: int
    phase: str
    lp_objective: float
    generated: int
    selected: int
    added: int
    min_reduced_cost: Optional[float]
    wall_time: float

    def line(self) -> str:
        rc = "-" if self.min_reduced_cost is None else f"{self.min_reduced_cost:.4f}"
        return (f"iter {self.iteration:4d} [{self.phase}] lp={self.lp_objective:.4f} "
                f"generated={self.generated} selected={self.selected} min_rc={rc} "
                f"time={self.wall_time:.3f}s")


@dataclass
class FixStep:
    action: str                 # "fix" or "lower"
    threshold: float
    fixed: List[int] = field(default_factory=list)
    deferred: List[int] = field(default_factory=list)
    lp_objective: Optional[float] = None


@dataclass
class RunReport:
    lp_objective: float = float("nan")
    ip_objective: float = float("nan")
    cg_iterations: int = 0
    columns_generated: int = 0
    columns_selected: int = 0
    uncovered_activities: List[str] = field(default_factory=list)
    phase_times: Dict[str, float] = field(default_factory=dict)
    iterations: List[IterationLog] = field(default_factory=list)
    selected_sequence: List[List[list]] = field(default_factory=list)
    fixing_trace: List[FixStep] = field(default_factory=list)
    fixed_vars: List[int] = field(default_factory=list)
    lp_after_fixing: float = float("nan")
    propagation: Dict[str, object] = field(default_factory=dict)
    converged: bool = False
    warnings: List[str] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)
    remarks: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# Algorithm 1: disjoint path selection
# --------------------------------------------------------------------------

def canonical_order(paths: Sequence[Route], duals: DualSolution) -> List[Tuple[float, Route]]:
    scored = [(route_reduced_cost(p, duals), p) for p in paths]
    scored.sort(key=lambda s: (s[0], s[1].tail_id, s[1].activity_ids, s[1].maintenance_positions))
    return scored


def select_disjoint_paths(duals: DualSolution, paths: Sequence[Route], epsilon: float,
                          strict: bool = False) -> List[Route]:
    """Keep a path while its duals outweigh the penalties left by earlier picks.

    Paths are visited most negative reduced cost first.  Each pick adds
    epsilon * pi_f to the penalty of every activity it covers.  In strict
    mode the comparison is strict and, additionally, no positive-dual
    activity may already be fully penalised, which makes epsilon = 1 yield
    activity-disjoint picks.
    """
    pen: Dict[str, float] = {}
    chosen = []
    for _, path in canonical_order(paths, duals):
        acts = path.activity_ids
        actual = sum(duals.pi[f] for f in acts)
        penalty = sum(pen.get(f, 0.0) for f in acts)
        if strict:
            ok = actual > penalty and all(
                duals.pi[f] <= 0 or duals.pi[f] > pen.get(f, 0.0) for f in acts)
        else:
            ok = actual >= penalty
        if not ok:
            continue
        chosen.append(path)
        for f in acts:
            pen[f] = pen.get(f, 0.0) + epsilon * duals.pi[f]
    return chosen


# --------------------------------------------------------------------------
# pricing fan-out
# --------------------------------------------------------------------------

_WORKER: dict = {}


def _init_worker(networks, tails, config, exact_config):
    _WORKER["networks"] = networks
    _WORKER["tails"] = tails
    _WORKER["configs"] = {False: config, True: exact_config}


def _price_task(phase: str, tail_id: str, duals: DualSolution, exact: bool) -> PricingResult:
    net = _WORKER["networks"][phase][tail_id]
    return solve_pricing(net, duals, _WORKER["tails"][tail_id], _WORKER["configs"][exact])


class PricingPool:
    """Runs one pricing problem per tail, in worker processes when asked to."""

    def __init__(self, networks: Dict[str, Dict[str, PricingNetwork]], instance: Instance,
                 config: PricingConfig, workers: int = 1):
        self.networks = networks
        self.tails = dict(instance.tail_by_id)
        self.config = config
        self.exact_config = PricingConfig.exact(sink_pool_size=config.sink_pool_size)
        self.workers = workers
        self._executor = None

    def __enter__(self) -> "PricingPool":
        if self.workers > 1:
            self._executor = ProcessPoolExecutor(
                max_workers=self.workers,
                initializer=_init_worker,
                initargs=(self.networks, self.tails, self.config, self.exact_config),
            )
        else:
            _init_worker(self.networks, self.tails, self.config, self.exact_config)
        return self

    def __exit__(self, *exc) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def price(self, phase: str, tail_ids: Sequence[str], duals: DualSolution,
              exact: bool = False) -> List[PricingResult]:
        tail_ids = sorted(tail_ids)
        if self._executor is None:
            return [_price_task(phase, t, duals, exact) for t in tail_ids]
        futures = [self._executor.submit(_price_task, phase, t, duals, exact) for t in tail_ids]
        return [f.result() for f in futures]


@dataclass
class SolverContext:
    instance: Instance
    config: DriverConfig
    pre_arcs: list
    propagation: PropagationResult
    pool: PricingPool

    @classmethod
    def build(cls, instance: Instance, config: DriverConfig) -> "SolverContext":
        pre = build_pre_connections(instance)
        if config.use_propagation and config.cp_iterations > 0:
            prop = propagate_connections(instance, pre)
        else:
            prop = PropagationResult(tuple(pre), False, len(pre), len(pre), 0, None, "disabled")
        networks = {PRE: build_all_networks(instance, pre)}
        if prop.available:
            networks[POST] = build_all_networks(instance, prop.arcs)
        pool = PricingPool(networks, instance, config.pricing, config.parallel_workers)
        return cls(instance, config, pre, prop, pool)

    def __enter__(self):
        self.pool.__enter__()
        return self

    def __exit__(self, *exc):
        self.pool.__exit__(*exc)


@dataclass
class RoundResult:
    generated: int
    selected: List[Route]
    min_reduced_cost: Optional[float]


def pricing_round(ctx: SolverContext, state: RmpState, duals: DualSolution, phase: str,
                  exact: bool = False) -> RoundResult:
    """Price all active tails and pick the columns to add."""
    cfg = ctx.config
    active = [t for t in state.tail_ids if t not in state.inactive_tails]
    if cfg.serial_mode:
        return _serial_round(ctx, state, active, duals, phase, exact)
    results = ctx.pool.price(phase, active, duals, exact)
    paths = [r for res in results for r in res.routes if r.key not in state._keys]
    mins = [res.min_reduced_cost for res in results if res.routes]
    selected = select_disjoint_paths(duals, paths, cfg.epsilon, cfg.strict_disjoint)
    if paths and not selected:
        # keep column generation moving when every pooled path is rejected
        selected = [canonical_order(paths, duals)[0][1]]
    return RoundResult(len(paths), selected, min(mins) if mins else None)


def _serial_round(ctx, state, active, duals, phase, exact) -> RoundResult:
    """Tails in id order; duals of covered activities are penalised after each tail.

    Priced duals never exceed the true ones, so an empty round is a true
    convergence test: the first tail, and every tail after an empty pick,
    sees the LP duals unchanged.
    """
    cfg = ctx.config
    pi = dict(duals.pi)
    selected: List[Route] = []
    generated = 0
    best = None
    for tail_id in active:
        current = DualSolution(pi, duals.beta)
        res = ctx.pool.price(phase, [tail_id], current, exact)[0]
        routes = [r for r in res.routes if r.key not in state._keys]
        if not routes:
            continue
        generated += len(routes)
        rc = res.min_reduced_cost
        best = rc if best is None else min(best, rc)
        picks = select_disjoint_paths(current, routes, cfg.epsilon, cfg.strict_disjoint)
        if not picks:
            picks = [canonical_order(routes, current)[0][1]]
        selected.extend(picks)
        for route in picks:
            for f in route.activity_ids:
                # only positive prices are damped; raising a negative one would
                # make the activity look more attractive to the next tail
                pi[f] -= cfg.epsilon * max(duals.pi[f], 0.0)
    return RoundResult(generated, selected, best)


# --------------------------------------------------------------------------
# column generation
# --------------------------------------------------------------------------

def run_column_generation(instance: Instance, config: DriverConfig,
                          context: Optional[SolverContext] = None):
    """Iterate LP solve / pricing / selection until no improving column exists."""
    own = context is None
    ctx = context or SolverContext.build(instance, config)
    report = RunReport()
    report.propagation = {
        "available": ctx.propagation.available,
        "pre_connections": ctx.propagation.pre_count,
        "post_connections": ctx.propagation.post_count,
        "reason": ctx.propagation.reason,
    }
    if own:
        ctx.__enter__()
    try:
        state = init_rmp(instance)
        t_start = time.perf_counter()
        lp = _solve(state, config.lp_backend)
        use_post = ctx.propagation.available
        it = 0
        pricing_time = 0.0
        while True:
            if it >= config.max_cg_iterations:
                report.warnings.append(f"stopped at max_cg_iterations={config.max_cg_iterations}")
                break
            if config.time_limit is not None and time.perf_counter() - t_start > config.time_limit:
                report.warnings.append("column generation stopped by time limit")
                break
            t_iter = time.perf_counter()
            phase = POST if use_post and it < config.cp_iterations else PRE
            t0 = time.perf_counter()
            rnd = pricing_round(ctx, state, lp.duals, phase)
            if not rnd.selected and phase == PRE:
                rnd, lp = _certify(ctx, state, lp)
            pricing_time += time.perf_counter() - t0
            if not rnd.selected:
                if phase == POST:
                    log.info("post-connection phase exhausted at iteration %d; switching to pre-connections", it)
                    use_post = False
                    continue
                report.converged = True
                break
            added = add_columns(state, rnd.selected)
            lp = _solve(state, config.lp_backend)
            it += 1
            report.columns_generated += rnd.generated
            report.columns_selected += added
            report.selected_sequence.append([_route_key(r) for r in rnd.selected])
            entry = IterationLog(it, phase, lp.objective, rnd.generated, len(rnd.selected), added,
                                 rnd.min_reduced_cost, time.perf_counter() - t_iter)
            report.iterations.append(entry)
            log.info(entry.line())
        report.cg_iterations = it
        report.lp_objective = lp.objective
        report.phase_times["column_generation"] = time.perf_counter() - t_start
        report.phase_times["pricing"] = pricing_time
        return state, lp, report
    finally:
        if own:
            ctx.__exit__(None, None, None)


def _certify(ctx: SolverContext, state: RmpState, lp: LpSolution) -> Tuple[RoundResult, LpSolution]:
    """Last pricing pass before declaring convergence.

    Interior solutions are replaced by a simplex vertex, whose objective is
    exact and whose duals are priced, and label caps are lifted when
    ``exact_final_pricing`` is set, so an empty round proves the LP optimal
    over the whole route space.
    """
    cfg = ctx.config
    if cfg.lp_backend == "simplex" and not cfg.exact_final_pricing:
        return RoundResult(0, [], None), lp
    if cfg.lp_backend != "simplex":
        lp = _solve(state, "simplex")
    return pricing_round(ctx, state, lp.duals, PRE, exact=cfg.exact_final_pricing), lp


def _solve(state: RmpState, backend: str = "simplex") -> LpSolution:
    lp = solve_lp(state, backend=backend)
    if lp.status != OPTIMAL:
        raise RuntimeError(f"RMP LP {lp.status}; conflicting fixed variables {lp.conflicting_fixed}")
    return lp


def _route_key(route: Route) -> list:
    return [route.tail_id, list(route.activity_ids), list(route.maintenance_positions)]


# --------------------------------------------------------------------------
# Algorithm 2: variable fixing
# --------------------------------------------------------------------------

def run_variable_fixing(state: RmpState, config: DriverConfig, context: SolverContext,
                        report: Optional[RunReport] = None) -> RunReport:
    """Fix route variables above a falling threshold; re-price after each fix.

    LPs here are solved with the simplex whatever the backend: an interior
    point spreads weight over alternative optima, so its values rarely reach
    the threshold even when an integral vertex is optimal.
    """
    report = report if report is not None else RunReport()
    t0 = time.perf_counter()
    init = config.fix_threshold_init
    floor = config.fix_threshold_floor
    step = config.fix_threshold_step
    threshold = init
    lp = _solve(state, "simplex")
    while threshold >= floor - 1e-9:
        values = lp.route_values()
        group = sorted(
            (v for v, x in values.items() if v not in state.fixed_vars and x >= threshold - 1e-9),
            key=lambda v: (-values[v], v),
        )
        fixed_now, deferred = _conflict_free(state, group)
        if not fixed_now:
            threshold = round(threshold - step, 10)
            report.fixing_trace.append(FixStep("lower", threshold))
            continue
        used = threshold
        threshold = init
        for v in fixed_now:
            fix_variable(state, v)
        lp = _solve(state, "simplex")
        rnd = pricing_round(context, state, lp.duals, PRE)
        added = add_columns(state, rnd.selected)
        report.columns_generated += rnd.generated
        report.columns_selected += added
        report.selected_sequence.append([_route_key(r) for r in rnd.selected])
        lp = _solve(state, "simplex")
        report.fixing_trace.append(FixStep("fix", used, fixed_now, deferred, lp.objective))
        log.info("fixed %s at threshold %.2f (deferred %s); lp=%.4f", fixed_now, used, deferred, lp.objective)
    report.fixed_vars = sorted(state.fixed_vars)
    report.lp_after_fixing = lp.objective
    report.phase_times["variable_fixing"] = time.perf_counter() - t0
    return report


def _conflict_free(state: RmpState, group: Sequence[int]) -> Tuple[List[int], List[int]]:
    """Greedy by LP value: skip candidates clashing with fixed routes or each other."""
    busy_tails = {state.columns[v].tail_id for v in state.fixed_vars}
    busy_acts = {a for v in state.fixed_vars for a in state.columns[v].activity_ids}
    fixed, deferred = [], []
    for v in group:
        route = state.columns[v]
        if route.tail_id in busy_tails or busy_acts.intersection(route.activity_ids):
            deferred.append(v)
            continue
        fixed.append(v)
        busy_tails.add(route.tail_id)
        busy_acts.update(route.activity_ids)
    return fixed, deferred


# --------------------------------------------------------------------------
# end to end
# --------------------------------------------------------------------------

def solve(instance: Instance, config: DriverConfig = DriverConfig()) -> Tuple[IntegralSolution, RunReport]:
    t0 = time.perf_counter()
    with SolverContext.build(instance, config) as ctx:
        state, lp, report = run_column_generation(instance, config, context=ctx)
        run_variable_fixing(state, config, ctx, report)
    t1 = time.perf_counter()
    solution = solve_ip(state, max_nodes=config.ip_max_nodes, time_limit=config.ip_time_limit)
    report.phase_times["integer"] = time.perf_counter() - t1
    if not solution.optimal:
        report.warnings.append("integer search stopped early; solution may be suboptimal for the pool")
    report.ip_objective = solution.objective
    report.uncovered_activities = list(solution.uncovered)
    report.violations = check_solution(instance, solution)
    report.warnings.extend(hangar_warnings(instance, solution))
    report.remarks = remarks_for(instance, solution.uncovered)
    if report.ip_objective < report.lp_objective - 1e-6:
        report.violations.append("integer objective below LP bound")
    report.phase_times["total"] = time.perf_counter() - t0
    return solution, report


def check_solution(instance: Instance, solution: IntegralSolution) -> List[str]:
    """Independent feasibility re-check: route rules, one route per tail, exact coverage."""
    problems = []
    count: Dict[str, int] = {a.id: 0 for a in instance.activities}
    tails_used: Dict[str, int] = {}
    for route in solution.routes:
        for p in validate_route(route, instance):
            problems.append(f"{route.tail_id}: {p}")
        tails_used[route.tail_id] = tails_used.get(route.tail_id, 0) + 1
        for a in route.activity_ids:
            count[a] += 1
    for a in solution.uncovered:
        count[a] += 1
    for aid, n in count.items():
        if n != 1:
            problems.append(f"activity {aid} covered {n} times (slack included)")
    for tid, n in tails_used.items():
        if n > 1:
            problems.append(f"tail {tid} has {n} routes")
    return problems


def hangar_warnings(instance: Instance, solution: IntegralSolution) -> List[str]:
    """Maintenance events per base and day against hangar capacity."""
    load: Dict[Tuple[str, int], int] = {}
    acts = instance.activity_by_id
    for route in solution.routes:
        for i in route.maintenance_positions:
            prev = acts[route.activity_ids[i - 1]]
            key = (prev.arrival_base, prev.arrival_time // 1440)
            load[key] = load.get(key, 0) + 1
        for aid in route.activity_ids:
            owned = instance.preassignment_owner.get(aid)
            if owned is not None:
                key = (owned[1].base, owned[1].earliest_start // 1440)
                load[key] = load.get(key, 0) + 1
    out = []
    for (base, day), n in sorted(load.items()):
        cap = instance.airports[base].hangar_capacity
        if n > cap:
            out.append(f"hangar capacity exceeded at {base} on day {day}: {n} > {cap}")
    return out


_WORDS = ["No", "One", "Two", "Three", "Four", "Five", "Six", "Seven", "Eight", "Nine", "Ten"]


def remarks_for(instance: Instance, uncovered: Sequence[str]) -> str:
    if not uncovered:
        return "Complete Assignment"
    n = len(uncovered)
    word = _WORDS[n] if n < len(_WORDS) else str(n)
    noun = "flight" if n == 1 else "flights"
    if not all(instance.activity_by_id[a].is_flight for a in uncovered):
        noun = "activity" if n == 1 else "activities"
    return f"{word} uncovered {noun}: {', '.join(uncovered)}"
