"""Error taxonomy shared by the socket layer, the protocol handlers and the explorer.

Everything deriving from CheckError is a verification outcome, not a programming
accident: the explorer catches it and reports a VIOLATION with the schedule that
led there. ScenarioError is different in kind; it means the requested scenario
itself is malformed and is raised before any exploration starts.
"""

from __future__ import annotations


class CheckError(Exception):
    """Base class for every condition the explorer reports as a violation."""


class ModelSizingError(CheckError):
    """A fixed resource bound was exceeded (descriptor table or channel capacity).

    This signals that the model was built with bounds too small for the scenario,
    so it is fatal rather than recoverable.
    """


class BrokenConnectionError(CheckError):
    """Write attempted on a descriptor whose peer endpoint is closed."""


class ContractViolation(CheckError):
    """An operation was called outside its precondition (read on empty, accept
    with nothing pending, acting on a descriptor the caller does not own)."""


class ProtocolViolation(CheckError):
    """A handler observed a message or condition the protocol forbids."""


class InvariantViolation(CheckError):
    """A structural invariant of the descriptor table failed a check."""


class PropertyViolation(CheckError):
    """A scenario property evaluated false at its checkpoint."""


class ScenarioError(ValueError):
    """The scenario configuration is invalid; nothing was explored."""
