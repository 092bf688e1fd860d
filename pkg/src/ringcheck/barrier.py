"""Manager ring barrier.

N managers sit on a hard-wired ring; manager rank 0 is the leader. Each
manager fronts one client, tracked as two global bit vectors: client_barrier_in
(the client reached the barrier) and client_barrier_out (the client was
released). The barrier_in token leaves the leader when its own client arrives
and travels clockwise; a manager whose client has not arrived parks the token
(holding_barrier_in) and releases it on arrival. When the token returns to the
leader everyone has arrived, and a barrier_out token makes one clockwise
circuit releasing each client. The leader releases its own client when
barrier_out returns, so it is the last one out.
"""

from __future__ import annotations

from .errors import ProtocolViolation
from .messages import BARRIER_IN, BARRIER_OUT, Message
from .sockets import CONNECT_PENDING, EOF, INVALID_FD, ReadyEvent


class ManagerState:
    __slots__ = ("pid", "rank", "lhs_fd", "rhs_fd", "holding_barrier_in",
                 "sent_barrier_in", "sent_barrier_out")

    def __init__(self, pid: int, rank: int):
        self.pid = pid
        self.rank = rank
        self.lhs_fd = INVALID_FD
        self.rhs_fd = INVALID_FD
        self.holding_barrier_in = False
        # Circuit accounting: each token kind crosses each right-hand channel
        # exactly once per episode; a second send trips a violation.
        self.sent_barrier_in = False
        self.sent_barrier_out = False

    @property
    def is_leader(self) -> bool:
        return self.rank == 0

    def clone(self) -> "ManagerState":
        m = ManagerState.__new__(ManagerState)
        m.pid = self.pid
        m.rank = self.rank
        m.lhs_fd = self.lhs_fd
        m.rhs_fd = self.rhs_fd
        m.holding_barrier_in = self.holding_barrier_in
        m.sent_barrier_in = self.sent_barrier_in
        m.sent_barrier_out = self.sent_barrier_out
        return m

    def canon(self, reg) -> tuple:
        # Ring wiring is static; only the episode progress is state.
        return (int(self.holding_barrier_in), int(self.sent_barrier_in),
                int(self.sent_barrier_out))

    def summary(self, reg) -> str:
        return (f"m{self.pid} rank={self.rank} holding={int(self.holding_barrier_in)} "
                f"sent_in={int(self.sent_barrier_in)} sent_out={int(self.sent_barrier_out)}")


class BarrierBits:
    """Global client bit vectors for one barrier episode."""

    __slots__ = ("n", "client_barrier_in", "client_barrier_out")

    def __init__(self, n: int):
        self.n = n
        self.client_barrier_in = 0
        self.client_barrier_out = 0

    @property
    def all_bits(self) -> int:
        return (1 << self.n) - 1

    def clone(self) -> "BarrierBits":
        b = BarrierBits.__new__(BarrierBits)
        b.n = self.n
        b.client_barrier_in = self.client_barrier_in
        b.client_barrier_out = self.client_barrier_out
        return b

    def canon(self) -> tuple:
        return (self.client_barrier_in, self.client_barrier_out)


def _send_token(g, m: ManagerState, cmd: str) -> None:
    if cmd == BARRIER_IN:
        if m.sent_barrier_in:
            raise ProtocolViolation(f"m{m.pid}: second barrier_in on one channel")
        m.sent_barrier_in = True
    else:
        if m.sent_barrier_out:
            raise ProtocolViolation(f"m{m.pid}: second barrier_out on one channel")
        m.sent_barrier_out = True
    g.sockets.write(m.pid, m.rhs_fd, Message(cmd))


def client_reaches_barrier(g, m: ManagerState) -> None:
    bits = g.bits
    bit = 1 << m.pid
    if bits.client_barrier_in & bit:
        raise ProtocolViolation(f"m{m.pid}: client arrived twice in one episode")
    bits.client_barrier_in |= bit
    if m.is_leader:
        _send_token(g, m, BARRIER_IN)
    elif m.holding_barrier_in:
        m.holding_barrier_in = False
        _send_token(g, m, BARRIER_IN)


def _on_barrier_in(g, m: ManagerState) -> None:
    if m.is_leader:
        # Token returned: every client is in, start releasing.
        _send_token(g, m, BARRIER_OUT)
    elif g.bits.client_barrier_in & (1 << m.pid):
        _send_token(g, m, BARRIER_IN)
    else:
        m.holding_barrier_in = True


def _on_barrier_out(g, m: ManagerState) -> None:
    bits = g.bits
    bit = 1 << m.pid
    if bits.client_barrier_out & bit:
        raise ProtocolViolation(f"m{m.pid}: barrier_out arrived twice")
    if not m.is_leader and not (bits.client_barrier_in & bit):
        # Cannot happen: barrier_out only exists after the in-circuit closed.
        raise ProtocolViolation(f"m{m.pid}: released before my client arrived")
    bits.client_barrier_out |= bit
    if not m.is_leader:
        _send_token(g, m, BARRIER_OUT)
    # The leader absorbs the token, releasing its own client last.


def handle_event(g, m: ManagerState, ev: ReadyEvent) -> None:
    if ev.reason in (CONNECT_PENDING, EOF):
        raise ProtocolViolation(f"m{m.pid}: unexpected {ev.reason} event on manager ring")
    msg = g.sockets.read(m.pid, ev.fd)
    if msg.cmd == BARRIER_IN:
        _on_barrier_in(g, m)
    elif msg.cmd == BARRIER_OUT:
        _on_barrier_out(g, m)
    else:
        raise ProtocolViolation(f"m{m.pid}: unexpected command {msg.cmd!r}")
