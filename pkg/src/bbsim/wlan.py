"""802.11g DCF side of the MFDRR: airtimes, Blank Burst duration, burst execution."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .engine import ConfigurationError, Engine
from .radio import Medium, Outcome, Radio


@dataclass(frozen=True)
class DcfParams:
    """ERP-OFDM defaults; all durations in ns."""

    difs_ns: int = 28_000
    sifs_ns: int = 10_000
    slot_ns: int = 9_000
    backoff_min_ns: int = 9_000
    ack_ns: int = 24_000
    data_rate_bps: float = 54e6
    phy_overhead_ns: int = 20_000
    mtu_bytes: int = 2304
    mac_header_bytes: int = 28
    subheader_bytes: int = 2

    def __post_init__(self):
        if not self.difs_ns > self.sifs_ns > 0:
            raise ConfigurationError("need DIFS > SIFS > 0")
        if self.data_rate_bps <= 0:
            raise ConfigurationError("WLAN data rate must be positive")
        if self.backoff_min_ns < 0 or self.ack_ns <= 0:
            raise ConfigurationError("backoff must be >= 0 and ACK airtime > 0")

    @property
    def per_frame_overhead_ns(self) -> int:
        return self.difs_ns + self.backoff_min_ns + self.sifs_ns + self.ack_ns


def frame_airtime(nbytes: int, p: DcfParams) -> int:
    """PHY overhead plus serialisation time of ``nbytes`` (headers included)."""
    if nbytes <= 0:
        raise ConfigurationError("frame must carry at least one byte")
    if nbytes > p.mtu_bytes + p.mac_header_bytes:
        raise ConfigurationError(f"{nbytes} B exceeds MTU {p.mtu_bytes} B + MAC header")
    return p.phy_overhead_ns + round(nbytes * 8 * 1e9 / p.data_rate_bps)


def compute_bb_duration(n: int, l_agg_ns: int, p: DcfParams) -> int:
    """Blank Burst length for ``n`` equal frames of airtime ``l_agg_ns``."""
    if n < 0:
        raise ValueError("frame count must be >= 0")
    return n * (p.difs_ns + p.backoff_min_ns + l_agg_ns + p.sifs_ns + p.ack_ns)


def bb_duration_for(airtimes: Sequence[int], p: DcfParams) -> int:
    """Same as :func:`compute_bb_duration` for frames of differing size."""
    return sum(p.difs_ns + p.backoff_min_ns + l + p.sifs_ns + p.ack_ns for l in airtimes)


@dataclass
class AggregatedFrame:
    payloads: list
    payload_bytes: int
    created_at: int
    source: int = -1
    attempts: int = 0
    acked: bool = False

    @property
    def payload_ids(self) -> list[int]:
        return [p.id for p in self.payloads]

    def air_bytes(self, p: DcfParams) -> int:
        return self.payload_bytes + p.mac_header_bytes


def make_frame(packets: list, p: DcfParams, now: int, source: int = -1) -> AggregatedFrame:
    nbytes = sum(pkt.bytes + p.subheader_bytes for pkt in packets)
    if not packets:
        raise ValueError("an aggregated frame needs at least one payload")
    if nbytes > p.mtu_bytes:
        raise ConfigurationError(f"{len(packets)} payloads ({nbytes} B) exceed the {p.mtu_bytes} B MTU")
    return AggregatedFrame(list(packets), nbytes, now, source)


def mtu_payload_limit(payload_bytes: int, p: DcfParams) -> int:
    """How many payloads of one size fit in one frame."""
    return p.mtu_bytes // (payload_bytes + p.subheader_bytes)


@dataclass
class Burst:
    frames: list[AggregatedFrame]
    start: int = -1
    end: int = -1
    expected_ns: int = 0
    clean: bool = True
    on_end: Callable | None = None
    extra: dict = field(default_factory=dict)


class WlanTransmitter:
    """Sends frames one after another: DIFS, minimum backoff, data, SIFS, ACK.

    A frame whose data or ACK is lost is retried once, then its undelivered
    payloads are handed to ``on_lost``.
    """

    def __init__(self, engine: Engine, medium: Medium, radio: Radio, sink: Radio,
                 p: DcfParams, power_mw: float, on_lost: Callable | None = None,
                 max_attempts: int = 2):
        self.engine = engine
        self.medium = medium
        self.radio = radio
        self.sink = sink
        self.p = p
        self.power_mw = power_mw
        self.on_lost = on_lost
        self.max_attempts = max_attempts
        self.queue: deque = deque()
        self.busy = False
        self.current: AggregatedFrame | None = None
        self.current_burst: Burst | None = None
        self.frames_sent = 0
        self.data_tx_log: list[tuple[int, int]] | None = None

    def send(self, frames: list[AggregatedFrame], burst: Burst | None = None):
        if burst is not None:
            if not frames:
                burst.start = burst.end = self.engine.now
                if burst.on_end:
                    burst.on_end(burst)
                return
            self.queue.append(("burst", burst))
        for f in frames:
            self.queue.append(("frame", f))
        if burst is not None:
            self.queue.append(("burst_end", burst))
        if not self.busy:
            self._next()

    def _next(self):
        eng = self.engine
        while self.queue:
            kind, item = self.queue.popleft()
            if kind == "burst":
                item.start = eng.now
                self.current_burst = item
                continue
            if kind == "burst_end":
                item.end = eng.now
                self.current_burst = None
                if item.on_end:
                    item.on_end(item)
                continue
            self.busy = True
            self.current = item
            eng.schedule(eng.now + self.p.difs_ns + self.p.backoff_min_ns, self._tx_data, item)
            return
        self.busy = False
        self.current = None

    def _tx_data(self, frame: AggregatedFrame):
        frame.attempts += 1
        self.frames_sent += 1
        dur = frame_airtime(frame.air_bytes(self.p), self.p)
        if self.data_tx_log is not None:
            self.data_tx_log.append((self.engine.now, dur))
        self.medium.start_transmission(self.radio, dur, self.power_mw, frame, [self.sink],
                                       "wlan_data", self._data_done)

    def _data_done(self, tx):
        # a delivered frame makes the sink answer; otherwise wait out the ACK slot
        if tx.receptions[0].outcome is not Outcome.DELIVERED:
            self.engine.schedule(self.engine.now + self.p.sifs_ns + self.p.ack_ns,
                                 self.ack_result, tx.frame, False)

    def ack_result(self, frame: AggregatedFrame, ok: bool):
        if ok:
            frame.acked = True
        elif frame.attempts < self.max_attempts:
            if self.current_burst is not None:
                self.current_burst.clean = False
            self.engine.schedule(self.engine.now + self.p.difs_ns + self.p.backoff_min_ns,
                                 self._tx_data, frame)
            return
        else:
            if self.current_burst is not None:
                self.current_burst.clean = False
            if self.on_lost:
                self.on_lost(frame)
        self._next()
