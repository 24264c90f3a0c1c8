"""Discrete-event kernel: integer-nanosecond clock, cancellable events, labeled RNG streams."""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Callable

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


def seconds(x: float) -> int:
    """Convert seconds to integer nanoseconds (round half to even)."""
    return int(round(x * NS_PER_S))


def to_seconds(t_ns: int) -> float:
    return t_ns / NS_PER_S


class SchedulingError(RuntimeError):
    """An event was scheduled in the past; this is always a protocol-logic bug."""


class ConfigurationError(ValueError):
    pass


class EventHandle:
    __slots__ = ("id", "fire_at", "cancelled", "fired", "fn", "args")

    def __init__(self, id: int, fire_at: int, fn: Callable, args: tuple):
        self.id = id
        self.fire_at = fire_at
        self.cancelled = False
        self.fired = False
        self.fn = fn
        self.args = args

    @property
    def pending(self) -> bool:
        return not (self.cancelled or self.fired)

    def __repr__(self) -> str:
        state = "cancelled" if self.cancelled else "fired" if self.fired else "pending"
        return f"EventHandle(id={self.id}, fire_at={self.fire_at}, {state})"


@dataclass
class RunStats:
    fired: int
    cancelled: int
    now: int


class Engine:
    """Single-threaded event loop.

    Events fire in ``(fire_at, id)`` order; ids grow with scheduling order so
    simultaneous events run FIFO.  Cancelled events stay in the heap and are
    skipped when popped.
    """

    def __init__(self, record_trace: bool = False):
        self.now = 0
        self._heap: list = []
        self._next_id = 0
        self.fired = 0
        self.cancelled = 0
        self.trace: list[tuple[int, int]] | None = [] if record_trace else None

    def schedule(self, at: int, fn: Callable, *args) -> EventHandle:
        if at < self.now:
            raise SchedulingError(f"event at {at} ns scheduled while clock is {self.now} ns")
        h = EventHandle(self._next_id, at, fn, args)
        self._next_id += 1
        heapq.heappush(self._heap, (at, h.id, h))
        return h

    def schedule_in(self, delay: int, fn: Callable, *args) -> EventHandle:
        return self.schedule(self.now + delay, fn, *args)

    def cancel(self, h: EventHandle | None) -> bool:
        if h is None or h.cancelled or h.fired:
            return False
        h.cancelled = True
        self.cancelled += 1
        return True

    def run_until(self, t_end: int) -> RunStats:
        heap = self._heap
        pop = heapq.heappop
        trace = self.trace
        fired = 0
        while heap and heap[0][0] <= t_end:
            at, _, h = pop(heap)
            if h.cancelled:
                continue
            self.now = at
            h.fired = True
            fired += 1
            if trace is not None:
                trace.append((at, h.id))
            h.fn(*h.args)
        self.fired += fired
        if t_end > self.now:
            self.now = t_end
        return RunStats(fired=self.fired, cancelled=self.cancelled, now=self.now)

    @property
    def queued(self) -> int:
        return sum(1 for _, _, h in self._heap if not h.cancelled)


# --- random streams ---------------------------------------------------------

@dataclass(frozen=True)
class Exponential:
    rate: float


@dataclass(frozen=True)
class UniformInt:
    lo: int
    hi: int


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float


def _derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{int(seed)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class RngStream:
    """Independent generator identified by ``(seed, label)``.

    Mersenne Twister seeded from a SHA-256 of the pair, so the sequence does not
    depend on Python's hash randomisation or on other streams.
    """

    label: str
    seed: int
    _gen: random.Random = field(init=False, repr=False)

    def __post_init__(self):
        self._gen = random.Random(_derive_seed(self.seed, self.label))

    def exponential(self, rate: float) -> float:
        if not rate > 0:
            raise ConfigurationError(f"exponential rate must be > 0, got {rate}")
        # 1 - U is in (0, 1]; never log(0)
        return -math.log(1.0 - self._gen.random()) / rate

    def randint(self, lo: int, hi: int) -> int:
        if hi < lo:
            raise ConfigurationError(f"empty integer range [{lo}, {hi}]")
        return lo + int(self._gen.random() * (hi - lo + 1))

    def uniform(self, lo: float, hi: float) -> float:
        if hi < lo:
            raise ConfigurationError(f"empty range [{lo}, {hi}]")
        return lo + (hi - lo) * self._gen.random()

    def draw(self, kind) -> float:
        if isinstance(kind, Exponential):
            return self.exponential(kind.rate)
        if isinstance(kind, UniformInt):
            return self.randint(kind.lo, kind.hi)
        if isinstance(kind, Uniform):
            return self.uniform(kind.lo, kind.hi)
        raise ConfigurationError(f"unknown distribution {kind!r}")

    def child(self, suffix: str) -> "RngStream":
        return RngStream(f"{self.label}.{suffix}", self.seed)


def rng_draw(stream: RngStream, kind) -> float:
    return stream.draw(kind)
