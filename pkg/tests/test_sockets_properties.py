"""Randomized socket-layer sequences checked against an independent mirror.

The driver in _socket_driver keeps its own model of which endpoints exist,
who owns them and which message serials are in flight, then re-derives the
six structural facts (link symmetry, ownership exclusivity, close duality,
message conservation, wake soundness, wake completeness) after every
operation. Hypothesis drives the op mix; each example is a fresh table.
"""

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from _socket_driver import Driver, run_random_sequence


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 2**32 - 1), n_ops=st.integers(1, 48))
def test_random_legal_sequences_uphold_invariants(seed, n_ops):
    run_random_sequence(seed, n_ops=n_ops)


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 2**32 - 1), n_ops=st.integers(1, 48))
def test_sequences_with_process_failures(seed, n_ops):
    run_random_sequence(seed, n_ops=n_ops, with_failure=True)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    seed=st.integers(0, 2**32 - 1),
    conn_max=st.integers(2, 12),
    qsz=st.integers(1, 5),
    n_pids=st.integers(1, 5),
)
def test_invariants_hold_across_table_geometries(seed, conn_max, qsz, n_pids):
    import random

    rng = random.Random(seed)
    d = Driver(conn_max=conn_max, qsz=qsz, n_pids=n_pids)
    for _ in range(24):
        d.step(rng)
        d.check_all()
