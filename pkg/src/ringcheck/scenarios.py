"""Scenario construction: sizing, initial wiring and property selection.

A scenario is the static half of the model: which algorithm runs, how many
processes exist, where newcomers enter, what may fail. The dynamic half lives
in GlobalState. Handlers reach the static half through g.scenario, and none
of it participates in state encoding.

Descriptor-table sizing is derived, not guessed: a ring of M daemons uses
2*M endpoints, each insertion transiently holds its entry connection and its
new right-hand connection open while the spliced edge still exists, and
recovery reuses slots the failure freed. Queue capacity is bounded by the
total process count; the counterclockwise update bursts at the entry daemon's
left neighbor are the worst case and there are at most K of them in flight.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import properties as props
from .barrier import BarrierBits, ManagerState
from .daemons import (
    IDLE,
    IN_RING,
    PARALLEL,
    SEQUENTIAL,
    DaemonState,
    TraceState,
    first_daemon_init,
)
from .errors import ScenarioError
from .explorer import GlobalState, Property
from .messages import Registry, make_identities
from .sockets import LHS, RHS, SocketTable

ALGORITHMS = ("ring-seq", "ring-par", "trace", "recovery", "barrier")

# Failure policy markers; an int means a fixed victim pid.
FAIL_NONDET = "nondet"


@dataclass(frozen=True)
class ScenarioConfig:
    """User-facing knobs, as they arrive from the command line."""

    algorithm: str
    size: int = 2
    inserters: int = 0
    blocking: bool = False
    fail_pid: int | None = None  # recovery only; None picks the victim freely


class Scenario:
    """Static description shared by every state of one exploration."""

    __slots__ = (
        "kind", "algorithm", "variant", "n_initial", "n_inserters",
        "inserter_pids", "entry_pid", "seq_blocking", "failure",
        "trace_enabled", "conn_max", "qsz", "hop_budget", "registry",
    )

    def __init__(self, *, kind, algorithm, variant, n_initial, n_inserters,
                 seq_blocking, failure, trace_enabled):
        self.kind = kind
        self.algorithm = algorithm
        self.variant = variant
        self.n_initial = n_initial
        self.n_inserters = n_inserters
        self.inserter_pids = tuple(range(n_initial, n_initial + n_inserters))
        self.entry_pid = 0
        self.seq_blocking = seq_blocking
        self.failure = failure
        self.trace_enabled = trace_enabled
        total = n_initial + n_inserters
        self.conn_max = 2 * total + 2 * n_inserters
        self.qsz = max(1, total)
        self.hop_budget = total
        self.registry = Registry(make_identities(total))

    @property
    def total(self) -> int:
        return self.n_initial + self.n_inserters

    def config_fields(self) -> dict:
        if self.failure is None:
            failure = "none"
        elif self.failure == FAIL_NONDET:
            failure = FAIL_NONDET
        else:
            failure = str(self.failure)
        return {
            "algorithm": self.algorithm,
            "size": self.n_initial,
            "inserters": self.n_inserters,
            "blocking": int(self.seq_blocking),
            "failure": failure,
        }

    # ------------------------------------------------------------------
    # initial state
    # ------------------------------------------------------------------

    def initial_state(self) -> GlobalState:
        if self.kind == "barrier":
            return self._initial_barrier()
        return self._initial_ring()

    def _initial_ring(self) -> GlobalState:
        reg = self.registry
        table = SocketTable(self.conn_max, self.qsz)
        procs = [
            DaemonState(i, reg.identity_of(i), self.variant)
            for i in range(self.total)
        ]
        g = GlobalState(self, table, procs, trace=TraceState(), bits=None)
        m = self.n_initial
        if m == 1:
            first_daemon_init(g, procs[0])
        else:
            for i in range(m):
                j = (i + 1) % m
                cfd = table.connect(i, j)
                table.set_flag(cfd, RHS)
                sfd = table.accept(j)
                table.set_flag(sfd, LHS)
                procs[i].rhs_fd = cfd
                procs[j].lhs_fd = sfd
            for i in range(m):
                d = procs[i]
                d.rhs_id = reg.identity_of((i + 1) % m)
                d.rhs2_id = reg.identity_of((i + 2) % m)
                d.lhs_id = reg.identity_of((i - 1) % m)
                d.phase = IN_RING
        return g

    def _initial_barrier(self) -> GlobalState:
        n = self.n_initial
        table = SocketTable(self.conn_max, self.qsz)
        procs = [ManagerState(i, rank=i) for i in range(n)]
        for i in range(n):
            j = (i + 1) % n
            cfd = table.connect(i, j)
            table.set_flag(cfd, RHS)
            sfd = table.accept(j)
            table.set_flag(sfd, LHS)
            procs[i].rhs_fd = cfd
            procs[j].lhs_fd = sfd
        return GlobalState(self, table, procs, trace=None, bits=BarrierBits(n))

    # ------------------------------------------------------------------
    # properties
    # ------------------------------------------------------------------

    def default_properties(self) -> tuple[Property, ...]:
        if self.kind == "barrier":
            return (
                props.socket_invariants(),
                props.barrier_invariant(),
                props.barrier_end(),
            )
        checks = [props.socket_invariants(), props.ring_topology()]
        if self.variant == PARALLEL:
            checks.append(props.neighbor_state())
        if self.trace_enabled:
            checks.append(props.trace_completion())
        return tuple(checks)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    """Validate a configuration and produce the static scenario for it."""
    if cfg.algorithm not in ALGORITHMS:
        raise ScenarioError(
            f"unknown algorithm {cfg.algorithm!r}; choose from {', '.join(ALGORITHMS)}"
        )
    if cfg.size < 1:
        raise ScenarioError("size must be at least 1")
    if cfg.inserters < 0:
        raise ScenarioError("inserters must be non-negative")
    if cfg.blocking and cfg.algorithm != "ring-seq":
        raise ScenarioError("blocking applies to the sequential insertion algorithm only")
    if cfg.fail_pid is not None and cfg.algorithm != "recovery":
        raise ScenarioError("fail-pid applies to the recovery scenario only")

    if cfg.algorithm == "barrier":
        if cfg.inserters:
            raise ScenarioError("the barrier scenario has no inserters")
        return Scenario(
            kind="barrier", algorithm=cfg.algorithm, variant=None,
            n_initial=cfg.size, n_inserters=0, seq_blocking=False,
            failure=None, trace_enabled=False,
        )

    if cfg.algorithm == "recovery":
        if cfg.inserters:
            raise ScenarioError("the recovery scenario runs on a fixed ring; no inserters")
        if cfg.size < 2:
            raise ScenarioError("recovery needs a ring of at least 2")
        if cfg.fail_pid is not None and not (0 <= cfg.fail_pid < cfg.size):
            raise ScenarioError(f"fail-pid {cfg.fail_pid} is not a ring member")
        failure = FAIL_NONDET if cfg.fail_pid is None else cfg.fail_pid
        return Scenario(
            kind="ring", algorithm=cfg.algorithm, variant=PARALLEL,
            n_initial=cfg.size, n_inserters=0, seq_blocking=False,
            failure=failure, trace_enabled=True,
        )

    variant = SEQUENTIAL if cfg.algorithm == "ring-seq" else PARALLEL
    return Scenario(
        kind="ring", algorithm=cfg.algorithm, variant=variant,
        n_initial=cfg.size, n_inserters=cfg.inserters,
        seq_blocking=cfg.blocking, failure=None,
        trace_enabled=(cfg.algorithm == "trace"),
    )


def config_from_fields(fields: dict) -> ScenarioConfig:
    """Inverse of Scenario.config_fields, for trace files."""
    try:
        algorithm = fields["algorithm"]
        size = int(fields["size"])
        inserters = int(fields["inserters"])
        blocking = bool(int(fields["blocking"]))
        failure = fields["failure"]
    except (KeyError, ValueError) as e:
        raise ScenarioError(f"incomplete scenario description: {e}") from e
    if failure == "none":
        fail_pid = None
    elif failure == FAIL_NONDET:
        fail_pid = None
    else:
        fail_pid = int(failure)
    return ScenarioConfig(
        algorithm=algorithm, size=size, inserters=inserters,
        blocking=blocking, fail_pid=fail_pid,
    )
