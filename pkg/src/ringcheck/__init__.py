"""Explicit-state model checker for process-manager ring protocols.

The model is three layers. sockets simulates the Unix-domain plumbing a
process manager would use: a descriptor table of cross-linked endpoint pairs,
bounded FIFO channels, and readiness derived from the table rather than
stored. daemons and barrier put protocol state machines on top: ring
insertion in a raced sequential flavor and a correct parallel one, failure
recovery over recorded second-right neighbors, a circulating ring trace, and
a token barrier across a manager ring. explorer turns any of these into a
checkable transition system: depth-first search over every handler
interleaving with state hashing, plus seeded random simulation and schedule
replay over the exact same step relation.
"""

from .errors import (
    BrokenConnectionError,
    CheckError,
    ContractViolation,
    InvariantViolation,
    ModelSizingError,
    PropertyViolation,
    ProtocolViolation,
    ScenarioError,
)
from .explorer import (
    RESOURCE_LIMIT,
    VERIFIED,
    VIOLATION,
    GlobalState,
    Property,
    ScheduleStep,
    SimulationReport,
    VerificationReport,
    apply,
    enabled_steps,
    encode,
    explore,
    replay_iter,
    replay_outcome,
    simulate,
)
from .scenarios import ALGORITHMS, Scenario, ScenarioConfig, build_scenario

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "BrokenConnectionError",
    "CheckError",
    "ContractViolation",
    "GlobalState",
    "InvariantViolation",
    "ModelSizingError",
    "Property",
    "PropertyViolation",
    "ProtocolViolation",
    "RESOURCE_LIMIT",
    "Scenario",
    "ScenarioConfig",
    "ScenarioError",
    "ScheduleStep",
    "SimulationReport",
    "VERIFIED",
    "VIOLATION",
    "VerificationReport",
    "apply",
    "build_scenario",
    "enabled_steps",
    "encode",
    "explore",
    "replay_iter",
    "replay_outcome",
    "simulate",
]
