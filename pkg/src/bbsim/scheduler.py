"""MFDRR application layer: deadline queues, lifetime-driven and count-driven Blank Burst triggers, packing."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

from .engine import ConfigurationError, Engine, EventHandle


class Klass(Enum):
    SENSOR = "sensor"
    METER = "meter"
    CLASS3 = "class3"


class Mode(Enum):
    NONE = "NONE"
    ADAPTIVE_AGG = "ADAPTIVE_AGG"
    AGG_BB = "AGG_BB"
    LIFETIME_BB = "LIFETIME_BB"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ConfigurationError(f"unknown mode {text!r}; expected one of "
                                     f"{', '.join(m.value for m in cls)}") from None


class SensorPacket:
    """One uplink payload and the timestamps collected along its path."""

    __slots__ = ("id", "source", "klass", "born_at", "deadline", "bytes", "at", "status",
                 "t_dev_tx", "t_router_rx", "t_router_tx", "t_mfdrr_rx", "t_sink")

    def __init__(self, id: int, source: int, klass: Klass, born_at: int, lifetime: int, nbytes: int):
        if lifetime <= 0:
            raise ConfigurationError("packet lifetime must be positive")
        self.id = id
        self.source = source
        self.klass = klass
        self.born_at = born_at
        self.deadline = born_at + lifetime
        self.bytes = nbytes
        self.at = source
        self.status: str | None = None
        self.t_dev_tx = -1
        self.t_router_rx = -1
        self.t_router_tx = -1
        self.t_mfdrr_rx = -1
        self.t_sink = -1

    def __repr__(self):
        return f"SensorPacket({self.id}, {self.klass.value}, deadline={self.deadline})"


class DeadlineQueue:
    """FIFO of one traffic class that keeps its smallest deadline at hand."""

    def __init__(self, klass: Klass):
        self.klass = klass
        self.packets: deque = deque()
        self.tracked_min: int | None = None

    def __len__(self):
        return len(self.packets)

    def push(self, p: SensorPacket):
        self.packets.append(p)
        if self.tracked_min is None or p.deadline < self.tracked_min:
            self.tracked_min = p.deadline

    def _rescan(self):
        self.tracked_min = min((p.deadline for p in self.packets), default=None)

    def take(self, n: int | None = None) -> list[SensorPacket]:
        if n is None or n >= len(self.packets):
            out = list(self.packets)
            self.packets.clear()
        else:
            out = [self.packets.popleft() for _ in range(n)]
        self._rescan()
        return out

    def sweep_expired(self, now: int) -> list[SensorPacket]:
        if self.tracked_min is None or self.tracked_min >= now:
            return []
        gone = [p for p in self.packets if p.deadline < now]
        self.packets = deque(p for p in self.packets if p.deadline >= now)
        self._rescan()
        return gone


def select_min_deadline(*queues: DeadlineQueue) -> int | None:
    mins = [q.tracked_min for q in queues if q.tracked_min is not None]
    return min(mins) if mins else None


def frame_count(pkt_count: int, agg_factor: int) -> int:
    """Number of WLAN frames needed for ``pkt_count`` payloads."""
    if agg_factor <= 0:
        raise ConfigurationError("aggregation factor must be positive")
    if pkt_count <= 0:
        return 0
    if pkt_count <= agg_factor:
        return 1
    if pkt_count % agg_factor == 0:
        return pkt_count // agg_factor
    return pkt_count // agg_factor + 1


def pack_frames(pkt_count: int, agg_factor: int, packets: list) -> list[list]:
    """Split ``packets`` into consecutive runs of at most ``agg_factor``, order kept."""
    if agg_factor <= 0:
        raise ConfigurationError("aggregation factor must be positive")
    if pkt_count != len(packets):
        raise ValueError(f"pkt_count {pkt_count} != {len(packets)} packets")
    return [packets[i * agg_factor:(i + 1) * agg_factor] for i in range(frame_count(pkt_count, agg_factor))]


class InsertResult(Enum):
    INSERTED = "inserted"
    DROPPED_EXPIRED = "dropped_expired"
    TRIGGER_BB = "trigger_bb"
    BUFFERED = "buffered"
    SEND_NOW = "send_now"


@dataclass
class BBHandshake:
    requested_at: int
    beacon_out_at: int = -1
    devices_silent_at: int = -1
    bb_end_at: int = -1
    n_frames: int = 0
    bb_duration: int = 0
    reserved_payloads: int = 0
    frames: list = field(default_factory=list)


class SchedulerState:
    """Queues, mutex and BB timer of one MFDRR.

    With an ``engine`` the BB timer is a real event that calls ``on_trigger``;
    without one only ``timer_at`` is tracked, which is what the unit tests use.
    """

    def __init__(self, mode: Mode, margin: int, agg_factor: int, engine: Engine | None = None,
                 on_trigger: Callable | None = None):
        if agg_factor <= 0:
            raise ConfigurationError("aggregation factor must be positive")
        if margin < 0:
            raise ConfigurationError("safety margin must be >= 0")
        self.mode = mode
        self.margin = margin
        self.agg_factor = agg_factor
        self.engine = engine
        self.on_trigger = on_trigger
        self.queues = {k: DeadlineQueue(k) for k in Klass}
        self.buffer: deque = deque()
        self.mutex = False
        self.bb_timer: EventHandle | None = None
        self.timer_at: int | None = None
        self.handshake: BBHandshake | None = None
        self.timer_log: list[tuple[str, int]] | None = None

    @property
    def agg_buffer_count(self) -> int:
        return len(self.buffer)

    def queued(self) -> int:
        return sum(len(q) for q in self.queues.values()) + len(self.buffer)

    def global_min(self) -> int | None:
        return select_min_deadline(*self.queues.values())

    # --- timer -------------------------------------------------------------
    def cancel_timer(self, now: int):
        if self.timer_at is None:
            return
        if self.engine is not None:
            self.engine.cancel(self.bb_timer)
        if self.timer_log is not None:
            self.timer_log.append(("cancel", now))
        self.bb_timer = None
        self.timer_at = None

    def set_timer(self, at: int, now: int):
        self.cancel_timer(now)
        self.timer_at = at
        if self.engine is not None:
            self.bb_timer = self.engine.schedule(at, self._timer_fired)
        if self.timer_log is not None:
            self.timer_log.append(("set", at))

    def _timer_fired(self):
        self.bb_timer = None
        self.timer_at = None
        trigger_bb_handshake(self, self.engine.now)

    def rearm(self, now: int):
        """Re-derive the BB timer from what is queued (lifetime mode, mutex clear)."""
        gm = self.global_min()
        if gm is None:
            self.cancel_timer(now)
            return
        at = gm - self.margin
        if at <= now:
            trigger_bb_handshake(self, now)
        elif at != self.timer_at:
            self.set_timer(at, now)


def trigger_bb_handshake(s: SchedulerState, now: int) -> BBHandshake | None:
    """Set the mutex and open a handshake; ignored when one is already running."""
    if s.mutex:
        return None
    s.cancel_timer(now)
    s.mutex = True
    s.handshake = BBHandshake(requested_at=now)
    if s.on_trigger is not None:
        s.on_trigger(s.handshake)
    return s.handshake


def classify_and_insert(s: SchedulerState, p: SensorPacket, now: int) -> InsertResult:
    """Lifetime scheduling of one arriving payload."""
    q = s.queues[p.klass]
    if s.mutex:
        q.push(p)
        return InsertResult.INSERTED
    remaining = p.deadline - now
    if abs(remaining - s.margin) <= 1:
        q.push(p)
        trigger_bb_handshake(s, now)
        return InsertResult.TRIGGER_BB
    if remaining < s.margin:
        return InsertResult.DROPPED_EXPIRED
    before = s.global_min()
    q.push(p)
    after = s.global_min()
    if after != before or s.timer_at is None:
        s.set_timer(after - s.margin, now)
    return InsertResult.INSERTED


def aggfactor_check(s: SchedulerState, p: SensorPacket, now: int = 0) -> InsertResult:
    s.buffer.append(p)
    if len(s.buffer) >= s.agg_factor and not s.mutex:
        trigger_bb_handshake(s, now)
        return InsertResult.TRIGGER_BB
    return InsertResult.BUFFERED


def adaptive_agg_step(s: SchedulerState, p: SensorPacket) -> tuple[InsertResult, list | None]:
    """Collect payloads and release exactly ``agg_factor`` of them at a time, no signalling."""
    s.buffer.append(p)
    if len(s.buffer) >= s.agg_factor:
        return InsertResult.SEND_NOW, [s.buffer.popleft() for _ in range(s.agg_factor)]
    return InsertResult.BUFFERED, None


def drain_order(s: SchedulerState) -> list[DeadlineQueue]:
    """Non-empty queues, most urgent minimum deadline first."""
    qs = [q for q in s.queues.values() if q.tracked_min is not None]
    qs.sort(key=lambda q: q.tracked_min)
    return qs


def drain_for_burst(s: SchedulerState, now: int, cap: int | None = None
                    ) -> tuple[list[list[SensorPacket]], list[SensorPacket]]:
    """Empty the queues into frames at burst start.

    Lifetime mode sweeps packets whose deadline has already passed and drains
    queues urgent-first; the count-driven modes drain their single FIFO buffer.
    ``cap`` bounds the payloads taken.  Returns (frames, expired).
    """
    frames: list[list[SensorPacket]] = []
    expired: list[SensorPacket] = []
    left = cap
    if s.mode is Mode.LIFETIME_BB:
        for q in s.queues.values():
            expired.extend(q.sweep_expired(now))
        for q in drain_order(s):
            if left is not None and left <= 0:
                break
            pkts = q.take(left)
            if left is not None:
                left -= len(pkts)
            frames.extend(pack_frames(len(pkts), s.agg_factor, pkts))
    else:
        n = len(s.buffer) if left is None else min(left, len(s.buffer))
        pkts = [s.buffer.popleft() for _ in range(n)]
        frames.extend(pack_frames(len(pkts), s.agg_factor, pkts))
    return frames, expired


def finish_bb(s: SchedulerState, now: int):
    """Burst over: release the mutex and start the next cycle if one is due."""
    s.mutex = False
    s.handshake = None
    if s.mode is Mode.LIFETIME_BB:
        s.rearm(now)
    elif s.mode is Mode.AGG_BB and len(s.buffer) >= s.agg_factor:
        trigger_bb_handshake(s, now)


def all_packets(s: SchedulerState) -> Iterable[SensorPacket]:
    for q in s.queues.values():
        yield from q.packets
    yield from s.buffer
