"""Discrete-event and agent-based simulation of a university student-support office.

The same scenario can be run as a process-oriented model (passive entities
flowing through queues) or as a hybrid model whose students, callers and staff
are state-chart agents. Both share one event kernel.
"""

from isstsim.kernel import (
    ArrivalSchedule,
    EventCalendar,
    ExponentialParams,
    RngStream,
    SimEvent,
    TriangularParams,
)
from isstsim.behavior import BehaviorRuleSet
from isstsim.model import ReplicationMetrics, ScenarioConfig, run_day
from isstsim.experiments import ExperimentId, ExperimentRun, aggregate, run_experiment
from isstsim.stats import TTestResult, student_t_cdf, welch_t_test

__version__ = "0.1.0"

__all__ = [
    "ArrivalSchedule",
    "BehaviorRuleSet",
    "EventCalendar",
    "ExperimentId",
    "ExperimentRun",
    "ExponentialParams",
    "ReplicationMetrics",
    "RngStream",
    "ScenarioConfig",
    "SimEvent",
    "TTestResult",
    "TriangularParams",
    "aggregate",
    "run_day",
    "run_experiment",
    "student_t_cdf",
    "welch_t_test",
]
