"""Airline tail assignment by column generation with parallel pricing."""
from .driver import DriverConfig, RunReport, select_disjoint_paths, solve
from .fileio import parse_instance, write_instance, write_report
from .generator import GeneratorParams, generate_instance
from .model import Activity, ActivityKind, Airport, CostParams, Instance, PreAssignment, Route, Tail

__all__ = [
    "Activity", "ActivityKind", "Airport", "CostParams", "DriverConfig", "GeneratorParams", "Instance",
    "PreAssignment", "Route", "RunReport", "Tail", "generate_instance", "parse_instance",
    "select_disjoint_paths", "solve", "write_instance", "write_report",
]
__version__ = "0.1.0"
