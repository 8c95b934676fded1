"""JSON instance files and solve reports."""
from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Union

import jsonschema

from .model import (
    Activity,
    ActivityKind,
    Airport,
    CostParams,
    Instance,
    IntegralSolution,
    PreAssignment,
    Tail,
    validate_instance,
)

FORMAT_VERSION = 1
PathLike = Union[str, Path]


class InstanceFormatError(ValueError):
    """Schema or validation failure; ``problems`` holds one message per issue."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


_INT = {"type": "integer"}
_NONNEG = {"type": "integer", "minimum": 0}
_NUM = {"type": "number"}
_STR = {"type": "string"}
_STRSET = {"type": "array", "items": _STR, "uniqueItems": True}


def _obj(props: dict, required: List[str]) -> dict:
    return {"type": "object", "properties": props, "required": required, "additionalProperties": False}


_AIRPORT = _obj(
    {"mgt": _NONNEG, "mct": _NONNEG, "is_maintenance_base": {"type": "boolean"},
     "hangar_capacity": _NONNEG, "required_maintenance_time": _NONNEG},
    ["mgt", "mct"],
)
_ACTIVITY = _obj(
    {"id": _STR, "kind": {"enum": [k.value for k in ActivityKind]},
     "departure_base": _STR, "arrival_base": _STR,
     "departure_time": _INT, "arrival_time": _INT,
     "flying_hours": _NUM, "cycles": _NONNEG, "uncovered_penalty": _NUM,
     "restricted_tails": _STRSET, "required_tags": _STRSET},
    ["id", "kind", "departure_base", "arrival_base", "departure_time", "arrival_time",
     "flying_hours", "cycles", "uncovered_penalty"],
)
_PREASSIGNMENT = _obj(
    {"activity_id": _STR, "base": _STR, "earliest_start": _INT, "latest_start": _INT, "duration": _NONNEG},
    ["activity_id", "base", "earliest_start", "latest_start", "duration"],
)
_TAIL = _obj(
    {"id": _STR, "carry_in_base": _STR, "carry_in_ready_time": _INT,
     "fh_limit": _NUM, "fc_limit": _NONNEG, "fh_accumulated": _NUM, "fc_accumulated": _NONNEG,
     "qualified_sector_tags": _STRSET,
     "pre_assignments": {"type": "array", "items": _PREASSIGNMENT},
     "overnight_base": {"type": ["string", "null"]}},
    ["id", "carry_in_base", "carry_in_ready_time", "fh_limit", "fc_limit"],
)
INSTANCE_SCHEMA = _obj(
    {"version": {"const": FORMAT_VERSION},
     "horizon_days": {"type": "integer", "minimum": 1},
     "cost_params": _obj({"connection_cost": _NUM, "maintenance_cost": _NUM, "lof_bonus": _NUM}, []),
     "airports": {"type": "object", "additionalProperties": _AIRPORT},
     "activities": {"type": "array", "items": _ACTIVITY},
     "tails": {"type": "array", "items": _TAIL},
     "lof_plan": {"type": "object", "additionalProperties": {"type": "array", "items": _STR}}},
    ["version", "horizon_days", "airports", "activities", "tails"],
)


def instance_to_dict(instance: Instance) -> dict:
    def act(a: Activity) -> dict:
        d = asdict(a)
        d["kind"] = a.kind.value
        d["restricted_tails"] = sorted(a.restricted_tails)
        d["required_tags"] = sorted(a.required_tags)
        return d

    def tail(t: Tail) -> dict:
        d = asdict(t)
        d["qualified_sector_tags"] = sorted(t.qualified_sector_tags)
        d["pre_assignments"] = [asdict(p) for p in t.pre_assignments]
        return d

    return {
        "version": FORMAT_VERSION,
        "horizon_days": instance.horizon_days,
        "cost_params": asdict(instance.cost_params),
        "airports": {code: asdict(ap) for code, ap in sorted(instance.airports.items())},
        "activities": [act(a) for a in instance.activities],
        "tails": [tail(t) for t in instance.tails],
        "lof_plan": {t: list(seq) for t, seq in sorted(instance.lof_plan.items())},
    }


def instance_from_dict(data: dict, validate: bool = True) -> Instance:
    """Build an Instance from a decoded document; schema first, then model rules."""
    validator = jsonschema.Draft7Validator(INSTANCE_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise InstanceFormatError([f"{_field_path(e)}: {e.message}" for e in errors])
    activities = tuple(
        Activity(
            **{**a, "kind": ActivityKind(a["kind"]),
               "restricted_tails": frozenset(a.get("restricted_tails", ())),
               "required_tags": frozenset(a.get("required_tags", ()))}
        )
        for a in data["activities"]
    )
    tails = tuple(
        Tail(
            **{**t, "qualified_sector_tags": frozenset(t.get("qualified_sector_tags", ())),
               "pre_assignments": tuple(PreAssignment(**p) for p in t.get("pre_assignments", ()))}
        )
        for t in data["tails"]
    )
    instance = Instance(
        activities=activities,
        tails=tails,
        airports={code: Airport(**ap) for code, ap in data["airports"].items()},
        lof_plan={t: tuple(seq) for t, seq in data.get("lof_plan", {}).items()},
        cost_params=CostParams(**data.get("cost_params", {})),
        horizon_days=data["horizon_days"],
    )
    if validate:
        problems = validate_instance(instance)
        if problems:
            raise InstanceFormatError([str(v) for v in problems])
    return instance


def _field_path(error) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in error.absolute_path)


def parse_instance(path: PathLike, validate: bool = True) -> Instance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError([f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    return instance_from_dict(data, validate=validate)


def write_instance(instance: Instance, path: PathLike) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n")


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

TIMING_FIELDS = ("phase_times", "wall_time")


def report_to_dict(solution: IntegralSolution, report) -> dict:
    routes = sorted(solution.routes, key=lambda r: r.tail_id)
    return {
        "version": FORMAT_VERSION,
        "objective": solution.objective,
        "lp_objective": report.lp_objective,
        "iterations": report.cg_iterations,
        "remarks": report.remarks,
        "uncovered": list(solution.uncovered),
        "routes": [
            {"tail": r.tail_id, "activities": list(r.activity_ids),
             "maintenance_positions": list(r.maintenance_positions), "cost": r.cost}
            for r in routes
        ],
        "run": _finite(report.to_dict()),
    }


def _finite(obj):
    """NaN is not valid JSON; unset numbers become null."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def strip_timing(obj):
    """Drop wall-clock fields so two runs can be compared exactly."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_FIELDS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def format_summary(solution: IntegralSolution, report) -> str:
    total = report.phase_times.get("total", sum(report.phase_times.values()))
    header = f"{'LP Obj':>14} {'Iter':>6} {'Time(s)':>9} {'Objective':>14}  Remarks"
    row = (f"{report.lp_objective:>14.2f} {report.cg_iterations:>6d} {total:>9.2f} "
           f"{solution.objective:>14.2f}  {report.remarks}")
    lines = [header, row, ""]
    for r in sorted(solution.routes, key=lambda r: r.tail_id):
        marks = set(r.maintenance_positions)
        seq = " ".join(("[M] " if i in marks else "") + a for i, a in enumerate(r.activity_ids))
        lines.append(f"{r.tail_id}: {seq}")
    return "\n".join(lines) + "\n"


def write_report(solution: IntegralSolution, report, path: PathLike) -> Dict[str, Path]:
    """Write ``path`` (JSON) and a summary table next to it; returns both paths."""
    path = Path(path)
    path.write_text(json.dumps(report_to_dict(solution, report), indent=2) + "\n")
    table = path.with_suffix(".txt")
    table.write_text(format_summary(solution, report))
    return {"json": path, "summary": table}


def read_report(path: PathLike) -> dict:
    return json.loads(Path(path).read_text())
