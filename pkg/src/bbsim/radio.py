"""Shared 2.4 GHz medium.

Free-space path loss, flat-PSD spectral overlap between 802.15.4 and 802.11
channels, and SINR-threshold reception using the worst SINR seen over each
frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from .engine import Engine


class Tech(Enum):
    LOWPAN = "lowpan"
    WLAN = "wlan"


class Outcome(Enum):
    DELIVERED = "delivered"
    CORRUPTED_COLLISION = "collision"
    BELOW_SENSITIVITY = "below_sensitivity"


class ProtocolError(RuntimeError):
    """A MAC asked the medium to do something physically impossible."""


LOWPAN_BW_MHZ = 2.0
WLAN_BW_MHZ = 22.0


@dataclass(frozen=True)
class RadioChannel:
    technology: Tech
    index: int

    def __post_init__(self):
        if self.technology is Tech.LOWPAN and not 11 <= self.index <= 26:
            raise ValueError(f"802.15.4 2.4 GHz channels are 11..26, got {self.index}")
        if self.technology is Tech.WLAN and not 1 <= self.index <= 13:
            raise ValueError(f"802.11 2.4 GHz channels are 1..13, got {self.index}")

    @property
    def center_mhz(self) -> float:
        if self.technology is Tech.LOWPAN:
            return 2405.0 + 5.0 * (self.index - 11)
        return 2412.0 + 5.0 * (self.index - 1)

    @property
    def bandwidth_mhz(self) -> float:
        return LOWPAN_BW_MHZ if self.technology is Tech.LOWPAN else WLAN_BW_MHZ

    @property
    def lo(self) -> float:
        return self.center_mhz - self.bandwidth_mhz / 2

    @property
    def hi(self) -> float:
        return self.center_mhz + self.bandwidth_mhz / 2

    @property
    def key(self) -> int:
        # dense index for overlap lookup tables
        return self.index - 11 if self.technology is Tech.LOWPAN else 16 + self.index - 1


def lowpan_channel(index: int) -> RadioChannel:
    return RadioChannel(Tech.LOWPAN, index)


def wlan_channel(index: int) -> RadioChannel:
    return RadioChannel(Tech.WLAN, index)


ALL_CHANNELS = [lowpan_channel(i) for i in range(11, 27)] + [wlan_channel(i) for i in range(1, 14)]


def path_loss_db(distance_m: float, freq_mhz: float) -> float:
    """Friis free-space loss; distances under 1 m are clamped to 1 m."""
    d = max(distance_m, 1.0)
    return 20.0 * math.log10(d) + 20.0 * math.log10(freq_mhz) - 27.55


def spectral_overlap(victim: RadioChannel, interferer: RadioChannel) -> float:
    """Fraction of the victim's band covered by the interferer's band."""
    width = min(victim.hi, interferer.hi) - max(victim.lo, interferer.lo)
    if width <= 0:
        return 0.0
    return width / victim.bandwidth_mhz


_OVERLAP = [[spectral_overlap(v, i) for i in ALL_CHANNELS] for v in ALL_CHANNELS]

# 10 ** (27.55 / 10): gain = FRIIS_K / (d^2 * f^2) with d in m, f in MHz
FRIIS_K = 10.0 ** 2.755


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw) if mw > 0 else -math.inf


@dataclass
class ReceiverParams:
    noise_dbm: float
    sensitivity_dbm: float
    capture_db: float


class Radio:
    """One transceiver: a node may own several (the MFDRR has three)."""

    __slots__ = ("id", "node", "x", "y", "channel", "ck", "f2", "tech", "noise_mw",
                 "sens_mw", "capture", "transmitting", "handler", "name")

    def __init__(self, id: int, node: int, pos: tuple[float, float], channel: RadioChannel,
                 rx: ReceiverParams, handler: Callable | None = None, name: str = ""):
        self.id = id
        self.node = node
        self.x, self.y = pos
        self.channel = channel
        self.ck = channel.key
        self.f2 = channel.center_mhz ** 2
        self.tech = channel.technology
        self.noise_mw = dbm_to_mw(rx.noise_dbm)
        self.sens_mw = dbm_to_mw(rx.sensitivity_dbm)
        self.capture = 10.0 ** (rx.capture_db / 10.0)
        self.transmitting = None
        self.handler = handler
        self.name = name

    def __repr__(self):
        return f"Radio({self.name or self.id}, node={self.node}, ch={self.channel.index})"


def gain(a: Radio, b: Radio, f2: float) -> float:
    d2 = (a.x - b.x) ** 2 + (a.y - b.y) ** 2
    if d2 < 1.0:
        d2 = 1.0
    return FRIIS_K / (d2 * f2)


class Transmission:
    __slots__ = ("radio", "node", "start", "end", "channel", "ck", "f2", "power_mw", "frame",
                 "kind", "receptions", "on_done", "seq")

    def __init__(self, radio: Radio, start: int, end: int, power_mw: float, frame, kind: str,
                 on_done, seq: int):
        self.radio = radio
        self.node = radio.node
        self.start = start
        self.end = end
        self.channel = radio.channel
        self.ck = radio.ck
        self.f2 = radio.f2
        self.power_mw = power_mw
        self.frame = frame
        self.kind = kind
        self.receptions: list[Reception] = []
        self.on_done = on_done
        self.seq = seq

    def __repr__(self):
        return f"Transmission({self.kind}, node={self.node}, [{self.start}, {self.end}))"


class Reception:
    """Running state of one intended receiver watching one transmission."""

    __slots__ = ("radio", "tx", "signal_mw", "interf_mw", "min_sinr", "outcome")

    def __init__(self, radio: Radio, tx: Transmission, signal_mw: float):
        self.radio = radio
        self.tx = tx
        self.signal_mw = signal_mw
        self.interf_mw = 0.0
        self.min_sinr = math.inf
        self.outcome: Outcome | None = None

    @property
    def min_sinr_db(self) -> float:
        return 10.0 * math.log10(self.min_sinr) if self.min_sinr > 0 else -math.inf

    def _update(self):
        sinr = self.signal_mw / (self.radio.noise_mw + self.interf_mw)
        if sinr < self.min_sinr:
            self.min_sinr = sinr


def resolve_reception(rec: Reception) -> Outcome:
    if rec.signal_mw < rec.radio.sens_mw:
        return Outcome.BELOW_SENSITIVITY
    if rec.min_sinr < rec.radio.capture:
        return Outcome.CORRUPTED_COLLISION
    return Outcome.DELIVERED


class Medium:
    """Tracks every on-air transmission and the receptions watching them.

    Interference at a receiver only grows when a transmission starts, so the
    worst-case SINR is refreshed at reception start and at each interferer
    start.  Contributions are scaled by the spectral overlap of the
    interferer's band with the receiver's band.
    """

    def __init__(self, engine: Engine, cca_window_ns: int = 128_000):
        self.engine = engine
        self.active: list[Transmission] = []
        self.receptions: list[Reception] = []
        self._recent: list[Transmission] = []
        self._recent_keep = 4 * cca_window_ns
        self._seq = 0
        self.tx_started = 0
        self.on_tx_start: Callable | None = None

    def start_transmission(self, radio: Radio, duration: int, power_mw: float, frame=None,
                           targets: Iterable[Radio] = (), kind: str = "data",
                           on_done: Callable | None = None) -> Transmission:
        if duration <= 0:
            raise ProtocolError("transmission must have positive duration")
        if radio.transmitting is not None:
            raise ProtocolError(f"{radio!r} is already transmitting {radio.transmitting!r}")
        now = self.engine.now
        tx = Transmission(radio, now, now + duration, power_mw, frame, kind, on_done, self._seq)
        self._seq += 1
        radio.transmitting = tx
        ck = tx.ck
        f2 = tx.f2
        x, y = radio.x, radio.y
        # the new signal interferes with everything already being received
        for r in self.receptions:
            if r.radio is radio:
                # half duplex: a radio that starts sending loses what it was hearing
                r.min_sinr = 0.0
                continue
            ov = _OVERLAP[r.radio.ck][ck]
            if ov:
                rr = r.radio
                d2 = (x - rr.x) ** 2 + (y - rr.y) ** 2
                if d2 < 1.0:
                    d2 = 1.0
                r.interf_mw += power_mw * FRIIS_K / (d2 * f2) * ov
                r._update()
        for target in targets:
            rec = Reception(target, tx, power_mw * gain(radio, target, f2))
            tck = target.ck
            interf = 0.0
            for other in self.active:
                ov = _OVERLAP[tck][other.ck]
                if ov:
                    interf += other.power_mw * gain(other.radio, target, other.f2) * ov
            rec.interf_mw = interf
            rec._update()
            if target.transmitting is not None:
                rec.min_sinr = 0.0
            tx.receptions.append(rec)
            self.receptions.append(rec)
        self.active.append(tx)
        self.tx_started += 1
        if self.on_tx_start is not None:
            self.on_tx_start(tx)
        self.engine.schedule(tx.end, self._end, tx)
        return tx

    def _end(self, tx: Transmission):
        self.active.remove(tx)
        tx.radio.transmitting = None
        ck = tx.ck
        f2 = tx.f2
        x, y = tx.radio.x, tx.radio.y
        own = tx.receptions
        if own:
            self.receptions = [r for r in self.receptions if r.tx is not tx]
        for r in self.receptions:
            ov = _OVERLAP[r.radio.ck][ck]
            if ov:
                rr = r.radio
                d2 = (x - rr.x) ** 2 + (y - rr.y) ** 2
                if d2 < 1.0:
                    d2 = 1.0
                r.interf_mw -= tx.power_mw * FRIIS_K / (d2 * f2) * ov
                if r.interf_mw < 0.0:
                    r.interf_mw = 0.0
        recent = self._recent
        recent.append(tx)
        cutoff = self.engine.now - self._recent_keep
        if recent[0].end < cutoff:
            self._recent = [t for t in recent if t.end >= cutoff]
        for r in own:
            r.outcome = resolve_reception(r)
        for r in own:
            h = r.radio.handler
            if h is not None:
                h(tx, r)
        if tx.on_done is not None:
            tx.on_done(tx)

    def sensed_mw(self, radio: Radio, since: int) -> float:
        """Energy on ``radio``'s band from any transmission on air during [since, now]."""
        ck = radio.ck
        total = 0.0
        for t in self.active:
            if t.radio is radio:
                continue
            ov = _OVERLAP[ck][t.ck]
            if ov:
                total += t.power_mw * gain(t.radio, radio, t.f2) * ov
        for t in self._recent:
            if t.end > since and t.radio is not radio:
                ov = _OVERLAP[ck][t.ck]
                if ov:
                    total += t.power_mw * gain(t.radio, radio, t.f2) * ov
        return total
