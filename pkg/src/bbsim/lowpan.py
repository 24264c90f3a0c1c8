"""Beacon-enabled IEEE 802.15.4 MAC: superframes, slotted CSMA/CA uplink, beacons, Blank Burst suspension."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

from .engine import ConfigurationError, Engine, EventHandle, RngStream
from .radio import Medium, Outcome, Radio, dbm_to_mw

BASE_SUPERFRAME_NS = 15_360_000
BACKOFF_NS = 320_000
CCA_NS = 128_000
RATE_BPS = 250_000


@dataclass(frozen=True)
class SuperframeConfig:
    bo: int
    so: int
    stagger_offset: int = 0

    def __post_init__(self):
        if not 0 <= self.so <= self.bo <= 14:
            raise ConfigurationError(f"need 0 <= SO <= BO <= 14, got BO={self.bo} SO={self.so}")
        if self.stagger_offset < 0:
            raise ConfigurationError("stagger offset must be >= 0")

    @property
    def beacon_interval(self) -> int:
        return BASE_SUPERFRAME_NS << self.bo

    @property
    def active_duration(self) -> int:
        return BASE_SUPERFRAME_NS << self.so


@dataclass(frozen=True)
class SuperframeTiming:
    next_beacon: int
    active_start: int
    active_end: int


def superframe_timing(cfg: SuperframeConfig, now: int) -> SuperframeTiming:
    """First beacon at or after ``now`` and the active window it opens."""
    bi = cfg.beacon_interval
    k = -(-(now - cfg.stagger_offset) // bi)
    nb = cfg.stagger_offset + max(k, 0) * bi
    return SuperframeTiming(nb, nb, nb + cfg.active_duration)


@dataclass(frozen=True)
class MacParams:
    min_be: int = 3
    max_be: int = 5
    max_csma_backoffs: int = 4
    phy_overhead_bytes: int = 6
    mac_overhead_bytes: int = 0
    beacon_bytes: int = 20
    ack_enabled: bool = False
    max_frame_retries: int = 3
    ack_bytes: int = 5
    turnaround_ns: int = 192_000
    ack_wait_ns: int = 864_000
    queue_cap: int = 64
    cca_threshold_dbm: float = -77.0

    def __post_init__(self):
        if not 0 <= self.min_be <= self.max_be:
            raise ConfigurationError("need 0 <= macMinBE <= macMaxBE")
        if self.max_csma_backoffs < 1 or self.max_frame_retries < 0 or self.queue_cap < 1:
            raise ConfigurationError("CSMA limits and queue cap must be positive")


def airtime(nbytes: int, p: MacParams | None = None) -> int:
    """On-air time of an 802.15.4 frame carrying ``nbytes`` MAC bytes, PHY header included."""
    phy = p.phy_overhead_bytes if p is not None else 6
    return (nbytes + phy) * 8 * 1_000_000_000 // RATE_BPS


def payload_airtime(nbytes: int) -> int:
    """Serialisation time of ``nbytes`` alone at 250 kb/s."""
    return nbytes * 8 * 1_000_000_000 // RATE_BPS


@dataclass
class Beacon:
    sender: int
    seq: int
    superframe: SuperframeConfig
    bb_duration: int | None = None

    def __post_init__(self):
        if self.bb_duration is not None and self.bb_duration <= 0:
            raise ValueError("a BB field must carry a positive duration")


@dataclass
class Ack:
    packet: object


class Schedule:
    """Active windows of one coordinator, plus the contention period inside each."""

    def __init__(self, sf: SuperframeConfig, beacon_air: int):
        self.sf = sf
        self.bi = sf.beacon_interval
        self.active = sf.active_duration
        self.offset = sf.stagger_offset
        # contention starts on the first backoff boundary after the beacon
        self.cap_lead = -(-beacon_air // BACKOFF_NS) * BACKOFF_NS

    def window_at(self, t: int) -> tuple[int, int]:
        """Contention window containing ``t``, or the next one."""
        k = (t - self.offset) // self.bi
        start = self.offset + k * self.bi
        if k < 0:
            start = self.offset
        cap_start = start + self.cap_lead
        cap_end = start + self.active
        if t >= cap_end:
            start += self.bi
            cap_start = start + self.cap_lead
            cap_end = start + self.active
        return cap_start, cap_end

    def align(self, t: int) -> int:
        """Next backoff-period boundary (relative to the superframe start) at or after ``t``."""
        r = (t - self.offset) % BACKOFF_NS
        return t if r == 0 else t + BACKOFF_NS - r

    def count_down(self, t: int, n: int) -> int:
        """Time at which ``n`` backoff periods have elapsed, counting only inside contention windows."""
        while True:
            cs, ce = self.window_at(t)
            if t < cs:
                t = cs
            avail = (ce - t) // BACKOFF_NS
            if n <= avail:
                return t + n * BACKOFF_NS
            n -= avail
            t = ce

    def periods_between(self, t: int, target: int) -> int:
        """Backoff periods still to count from ``t`` to reach ``target``."""
        n = 0
        t = self.align(t)
        while t < target:
            cs, ce = self.window_at(t)
            if t < cs:
                t = cs
            stop = min(ce, target)
            if stop > t:
                n += -(-(stop - t) // BACKOFF_NS)
            t = ce
        return n


IDLE, BACKOFF, CCA, TX, WAIT_ACK, SUSPENDED = range(6)


class CsmaMac:
    """Slotted CSMA/CA toward one parent coordinator.

    Callbacks: ``on_tx(pkt, mac)`` at every transmission start and
    ``on_lost(pkt, cause, mac)`` when the MAC gives up on a packet.
    """

    def __init__(self, engine: Engine, medium: Medium, radio: Radio, parent: Radio,
                 schedule: Schedule, p: MacParams, rng: RngStream, power_mw: float,
                 on_lost: Callable, on_tx: Callable | None = None):
        self.engine = engine
        self.medium = medium
        self.radio = radio
        self.parent = parent
        self.sched = schedule
        self.p = p
        self.rng = rng
        self.power_mw = power_mw
        self.on_lost = on_lost
        self.on_tx = on_tx
        self.queue: deque = deque()
        self.state = IDLE
        self.nb = 0
        self.be = p.min_be
        self.retries = 0
        self.pkt = None
        self.handle: EventHandle | None = None
        self.target = 0
        self.suspended_until = -1
        self.cca_thr = dbm_to_mw(p.cca_threshold_dbm)
        self.backoff_log: list[tuple[int, int]] | None = None
        self.last_outcome: Outcome | None = None
        self.tx_start = 0

    def __len__(self):
        return len(self.queue) + (self.pkt is not None)

    def enqueue(self, pkt) -> bool:
        if len(self) >= self.p.queue_cap:
            return False
        self.queue.append(pkt)
        if self.state == IDLE:
            self._next_packet()
        return True

    def _next_packet(self):
        if not self.queue:
            self.state = IDLE
            self.pkt = None
            return
        self.pkt = self.queue.popleft()
        self.nb = 0
        self.be = self.p.min_be
        self.retries = 0
        self._begin_backoff()

    def _frame_time(self) -> int:
        t = 2 * CCA_NS + airtime(self.pkt.bytes + self.p.mac_overhead_bytes, self.p)
        if self.p.ack_enabled:
            t += self.p.ack_wait_ns
        return t

    def _begin_backoff(self):
        n = self.rng.randint(0, (1 << self.be) - 1)
        if self.backoff_log is not None:
            self.backoff_log.append((n, self.be))
        start = max(self.sched.align(self.engine.now), self.suspended_until + 1)
        self._count(start, n)

    def _count(self, start: int, n: int):
        start = self.sched.align(start)
        self.target = self.sched.count_down(start, n)
        self.state = BACKOFF
        self.handle = self.engine.schedule(self.target, self._backoff_done)

    def _backoff_done(self):
        now = self.engine.now
        if now <= self.suspended_until:
            self._count(self.suspended_until + 1, 0)
            return
        _, cap_end = self.sched.window_at(now)
        if now + self._frame_time() > cap_end:
            # not enough contention time left: fresh backoff in the next window
            cs, _ = self.sched.window_at(cap_end)
            n = self.rng.randint(0, (1 << self.be) - 1)
            if self.backoff_log is not None:
                self.backoff_log.append((n, self.be))
            self._count(cs, n)
            return
        self.state = CCA
        self.handle = self.engine.schedule(now + CCA_NS, self._cca, now, 1)

    def _cca(self, since: int, which: int):
        if self.medium.sensed_mw(self.radio, since) >= self.cca_thr:
            self.nb += 1
            self.be = min(self.be + 1, self.p.max_be)
            if self.nb >= self.p.max_csma_backoffs:
                self._give_up("csma_failure")
                return
            self._begin_backoff()
            return
        now = self.engine.now
        if which == 1:
            self.handle = self.engine.schedule(now + CCA_NS, self._cca, now, 2)
            return
        if now <= self.suspended_until:
            self._count(self.suspended_until + 1, 0)
            return
        self._transmit()

    def _transmit(self):
        pkt = self.pkt
        self.state = TX
        self.tx_start = self.engine.now
        if self.on_tx:
            self.on_tx(pkt, self)
        dur = airtime(pkt.bytes + self.p.mac_overhead_bytes, self.p)
        self.medium.start_transmission(self.radio, dur, self.power_mw, pkt, (self.parent,),
                                       "lowpan_data", self._tx_done)

    def _tx_done(self, tx):
        self.last_outcome = tx.receptions[0].outcome
        if self.p.ack_enabled:
            self.state = WAIT_ACK
            self.handle = self.engine.schedule(self.engine.now + self.p.ack_wait_ns, self._ack_timeout)
            return
        if self.last_outcome is Outcome.DELIVERED:
            self._done()
        else:
            self._give_up(self.last_outcome.value)

    def on_ack(self, ack: Ack):
        if self.state != WAIT_ACK or ack.packet is not self.pkt:
            return
        self.engine.cancel(self.handle)
        self._done()

    def _ack_timeout(self):
        self.retries += 1
        if self.retries > self.p.max_frame_retries:
            out = self.last_outcome
            self._give_up(out.value if out is not Outcome.DELIVERED else "collision")
            return
        self.nb = 0
        self.be = self.p.min_be
        self._begin_backoff()

    def _done(self):
        self.handle = None
        self._next_packet()

    def _give_up(self, cause: str):
        pkt = self.pkt
        self.handle = None
        self.on_lost(pkt, cause, self)
        self._next_packet()

    def apply_bb_suspension(self, until: int):
        """Hold transmission starts until ``until``; a running frame is left alone."""
        now = self.engine.now
        if until <= now:
            return
        if until > self.suspended_until:
            self.suspended_until = until
        if self.state == BACKOFF and self.handle is not None and self.handle.pending:
            left = self.sched.periods_between(now, self.target)
            self.engine.cancel(self.handle)
            self._count(self.suspended_until + 1, left)

    def drain(self) -> list:
        out = list(self.queue)
        if self.pkt is not None:
            out.insert(0, self.pkt)
        return out


class Coordinator:
    """Beacon source and data sink for a set of child MACs on one radio."""

    def __init__(self, engine: Engine, medium: Medium, radio: Radio, node: int,
                 schedule: Schedule, p: MacParams, power_mw: float,
                 on_data: Callable, on_beacon_out: Callable | None = None):
        self.engine = engine
        self.medium = medium
        self.radio = radio
        self.node = node
        self.sched = schedule
        self.p = p
        self.power_mw = power_mw
        self.on_data = on_data
        self.on_beacon_out = on_beacon_out
        self.children: list[Radio] = []
        self.pending_bb: int | None = None
        self.seq = 0
        self.beacon_air = airtime(p.beacon_bytes, p)
        self.ack_air = airtime(p.ack_bytes, p)
        self.beacons_skipped = 0

    def start(self, t_end: int):
        self.t_end = t_end
        first = superframe_timing(self.sched.sf, self.engine.now).next_beacon
        if first <= t_end:
            self.engine.schedule(first, self._beacon)

    def _beacon(self):
        now = self.engine.now
        bb = self.pending_bb
        self.pending_bb = None
        if self.on_beacon_out is not None:
            bb = self.on_beacon_out(self, bb)
        b = Beacon(self.node, self.seq, self.sched.sf, bb)
        self.seq += 1
        if self.radio.transmitting is None:
            self.medium.start_transmission(self.radio, self.beacon_air, self.power_mw, b,
                                           self.children, "beacon")
        else:
            self.beacons_skipped += 1
        nxt = now + self.sched.bi
        if nxt <= self.t_end:
            self.engine.schedule(nxt, self._beacon)

    def receive_data(self, tx, rec):
        if rec.outcome is not Outcome.DELIVERED:
            return
        self.on_data(tx.frame, tx.node)
        if self.p.ack_enabled:
            self.engine.schedule(tx.end + self.p.turnaround_ns, self._send_ack, tx)

    def _send_ack(self, tx):
        if self.radio.transmitting is not None:
            return
        self.medium.start_transmission(self.radio, self.ack_air, self.power_mw,
                                       Ack(tx.frame), (tx.radio,), "lowpan_ack")
