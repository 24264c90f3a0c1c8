import pytest
from hypothesis import given, settings, strategies as st

from bbsim.engine import (NS_PER_S, ConfigurationError, Engine, Exponential, RngStream, SchedulingError,
                          Uniform, UniformInt, rng_draw, seconds)


def test_same_time_events_fire_fifo():
    eng = Engine()
    got = []
    eng.schedule(seconds(5), got.append, "A")
    eng.schedule(seconds(5), got.append, "B")
    eng.run_until(seconds(10))
    assert got == ["A", "B"]


def test_run_until_orders_by_time_then_id():
    eng = Engine()
    got = []
    eng.schedule(seconds(2), got.append, "2a")
    eng.schedule(seconds(1), got.append, "1")
    eng.schedule(seconds(2), got.append, "2b")
    stats = eng.run_until(seconds(3))
    assert got == ["1", "2a", "2b"]
    assert stats.fired == 3


def test_empty_queue_advances_clock():
    eng = Engine()
    stats = eng.run_until(seconds(300))
    assert stats.fired == 0
    assert eng.now == 300 * NS_PER_S


def test_handler_can_insert_earlier_event():
    eng = Engine()
    got = []

    def first():
        got.append("first")
        eng.schedule(seconds(2), got.append, "inserted")

    eng.schedule(seconds(1), first)
    eng.schedule(seconds(3), got.append, "later")
    eng.run_until(seconds(4))
    assert got == ["first", "inserted", "later"]


def test_cancel_contract():
    eng = Engine()
    got = []
    h = eng.schedule(seconds(1), got.append, "x")
    eng.schedule(seconds(2), got.append, "y")
    assert eng.cancel(h) is True
    assert eng.cancel(h) is False
    eng.run_until(seconds(3))
    assert got == ["y"]
    assert eng.now == seconds(3)
    fired = eng.schedule(seconds(4), got.append, "z")
    eng.run_until(seconds(5))
    assert eng.cancel(fired) is False


def test_scheduling_in_the_past_is_rejected():
    eng = Engine()
    eng.run_until(100)
    with pytest.raises(SchedulingError):
        eng.schedule(50, lambda: None)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 50), st.booleans()), min_size=1, max_size=60))
def test_fired_trace_is_ordered_and_never_contains_cancelled(ops):
    eng = Engine(record_trace=True)
    handles = []
    for at, cancel in ops:
        h = eng.schedule(at, lambda: None)
        handles.append((h, cancel))
    cancelled = {h.id for h, c in handles if c and eng.cancel(h)}
    eng.run_until(100)
    trace = eng.trace
    assert trace == sorted(trace)
    assert not cancelled & {i for _, i in trace}
    assert len(trace) == len(ops) - len(cancelled)


def test_exponential_mean():
    s = RngStream("traffic", 7)
    n = 1_000_000
    mean = sum(s.exponential(2.0) for _ in range(n)) / n
    assert mean == pytest.approx(0.5, abs=0.01)


def test_uniform_int_covers_support():
    s = RngStream("backoff", 3)
    seen = {rng_draw(s, UniformInt(0, 7)) for _ in range(10_000)}
    assert seen == set(range(8))


def test_replay_is_bit_identical():
    a = RngStream("dev.5", 11)
    b = RngStream("dev.5", 11)
    assert [a.draw(Exponential(1.3)) for _ in range(100)] == [b.draw(Exponential(1.3)) for _ in range(100)]


def test_streams_are_independent():
    a1, a2 = RngStream("a", 1), RngStream("a", 1)
    noise = RngStream("b", 1)
    ref = [a1.uniform(0, 1) for _ in range(50)]
    mixed = []
    for _ in range(50):
        noise.uniform(0, 1)
        mixed.append(a2.uniform(0, 1))
    assert ref == mixed
    assert RngStream("a", 2).uniform(0, 1) != ref[0]
    assert RngStream("a", 1).child("x").label == "a.x"


def test_bad_distributions():
    s = RngStream("x", 0)
    with pytest.raises(ConfigurationError):
        s.exponential(0.0)
    with pytest.raises(ConfigurationError):
        s.randint(3, 2)
    with pytest.raises(ConfigurationError):
        s.draw("gaussian")
    assert 1.0 <= s.draw(Uniform(1.0, 2.0)) <= 2.0
