"""Headless scenario runner and evaluation tools.

Scripted flights, closed-loop tracking scenarios, flight-path export, and
tracker benchmarks — everything needed to exercise the full stack from the
command line without a UI or a network connection.
"""

from .bench import bench_tracker, format_bench_report, shift_accuracy, throughput
from .runner import RunnerError, ScriptPilot, run_scenario, triangle_vertices
from .scenario import Scenario, ScenarioError, ScenarioStep, load_scenario, parse_scenario

__all__ = [
    "Scenario",
    "ScenarioError",
    "ScenarioStep",
    "RunnerError",
    "ScriptPilot",
    "bench_tracker",
    "format_bench_report",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "shift_accuracy",
    "throughput",
    "triangle_vertices",
]
