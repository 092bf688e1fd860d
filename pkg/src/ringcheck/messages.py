"""Message vocabulary and process identities for the ring protocols."""

from __future__ import annotations

from dataclasses import dataclass, field

# Ring maintenance commands.
RHS_INFO_REQUEST = "rhs_info_request"
RHS_INFO_RETURN = "rhs_info_return"
NEW_RHS = "new_rhs"
NEW_LHS = "new_lhs"
RECONNECT_RHS = "reconnect_rhs"
RHS2INFO = "rhs2info"
# Ring trace commands.
TRACE_REQ = "trace_req"
TRACE_DONE = "trace_done"
# Barrier commands.
BARRIER_IN = "barrier_in"
BARRIER_OUT = "barrier_out"

ALL_COMMANDS = (
    RHS_INFO_REQUEST,
    RHS_INFO_RETURN,
    NEW_RHS,
    NEW_LHS,
    RECONNECT_RHS,
    RHS2INFO,
    TRACE_REQ,
    TRACE_DONE,
    BARRIER_IN,
    BARRIER_OUT,
)

# Small integers for canonical encodings; the strings above stay the wire names.
CMD_INDEX = {cmd: i for i, cmd in enumerate(ALL_COMMANDS)}


@dataclass(frozen=True, slots=True)
class Identity:
    """Contact coordinates of a daemon: an opaque host label and a port."""

    host: str
    port: int


@dataclass(frozen=True, slots=True)
class Message:
    """One protocol message.

    The payload slots are used per command:
      new_rhs, new_lhs   a = sender's identity
      reconnect_rhs      a = identity of the daemon to attach to on the right
      rhs2info           a = target daemon, b = its new second-right neighbor,
                         hops = remaining counterclockwise forwarding budget
      rhs_info_return    a = the identity being answered
      trace_req/done     origin = initiator, ids = identities collected so far
    """

    cmd: str
    a: Identity | None = None
    b: Identity | None = None
    origin: Identity | None = None
    ids: tuple[Identity, ...] = ()
    hops: int = 0


class Registry:
    """Static mapping between process ids and daemon identities.

    Built once per scenario and never mutated, so it is shared by every state
    the explorer produces rather than cloned with them.
    """

    def __init__(self, identities: list[Identity]):
        self._by_pid = list(identities)
        self._by_identity = {ident: pid for pid, ident in enumerate(identities)}
        if len(self._by_identity) != len(self._by_pid):
            raise ValueError("duplicate identities in registry")

    def identity_of(self, pid: int) -> Identity:
        return self._by_pid[pid]

    def pid_of(self, identity: Identity) -> int:
        return self._by_identity[identity]

    def key(self, identity: Identity | None) -> int:
        """Canonical small-int stand-in for an identity (-1 for absent)."""
        if identity is None:
            return -1
        # Hot path of state encoding: identities inside states are the
        # registry's own objects, so an identity check beats hashing.
        k = identity.port - 9000
        by_pid = self._by_pid
        if 0 <= k < len(by_pid) and by_pid[k] is identity:
            return k
        return self._by_identity[identity]

    def __len__(self) -> int:
        return len(self._by_pid)

    def __contains__(self, identity: Identity) -> bool:
        return identity in self._by_identity


def canon_message(m: Message, reg: Registry) -> tuple:
    """Canonical tuple for a message; equal messages map to equal tuples."""
    return (
        CMD_INDEX[m.cmd],
        reg.key(m.a),
        reg.key(m.b),
        reg.key(m.origin),
        tuple(reg.key(i) for i in m.ids),
        m.hops,
    )


def make_identities(n: int) -> list[Identity]:
    """Deterministic identities for n daemons: node<i> on port 9000+i."""
    return [Identity(f"node{i}", 9000 + i) for i in range(n)]
