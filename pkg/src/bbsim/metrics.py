"""Packet accounting, per-run summaries and cross-seed confidence intervals."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, fields

from scipy import stats

from .engine import NS_PER_S
from .scheduler import Klass, SensorPacket

LOSS_CAUSES = ("csma_failure", "collision", "below_sensitivity", "expired_at_mfdrr",
               "expired_in_queue", "device_overflow", "wlan_loss")
RESIDUAL_CAUSES = ("residual_buffered", "residual_queued")


class TraceIntegrityError(RuntimeError):
    """Accounting saw something impossible, e.g. a packet delivered twice."""


@dataclass
class LossLedger:
    csma_failure: int = 0
    collision: int = 0
    below_sensitivity: int = 0
    expired_at_mfdrr: int = 0
    expired_in_queue: int = 0
    device_overflow: int = 0
    wlan_loss: int = 0
    residual_buffered: int = 0
    residual_queued: int = 0

    def add(self, cause: str, n: int = 1):
        if cause not in LOSS_CAUSES and cause not in RESIDUAL_CAUSES:
            raise TraceIntegrityError(f"unknown loss cause {cause!r}")
        setattr(self, cause, getattr(self, cause) + n)

    @property
    def losses(self) -> int:
        return sum(getattr(self, c) for c in LOSS_CAUSES)

    @property
    def residuals(self) -> int:
        return self.residual_buffered + self.residual_queued

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class Recorder:
    """Owns every generated packet and its single terminal state."""

    def __init__(self):
        self.packets: list[SensorPacket] = []
        self.ledger = LossLedger()
        self.delivered = 0

    def generated(self, p: SensorPacket):
        if p.id != len(self.packets):
            raise TraceIntegrityError(f"packet ids must be dense, got {p.id}")
        self.packets.append(p)

    def _known(self, p: SensorPacket):
        if p.id >= len(self.packets) or self.packets[p.id] is not p:
            raise TraceIntegrityError(f"unknown packet id {p.id}")

    def delivered_at(self, p: SensorPacket, now: int):
        self._known(p)
        if p.status is not None:
            raise TraceIntegrityError(f"packet {p.id} already {p.status}, cannot be delivered")
        p.status = "delivered"
        p.t_sink = now
        self.delivered += 1

    def lost(self, p: SensorPacket, cause: str):
        self._known(p)
        if p.status is not None:
            raise TraceIntegrityError(f"packet {p.id} already {p.status}, cannot be lost to {cause}")
        self.ledger.add(cause)
        p.status = cause

    def close(self, buffered_at: set[int]):
        """Count what is still inside the network at the end of the run."""
        for p in self.packets:
            if p.status is None:
                cause = "residual_buffered" if p.at in buffered_at else "residual_queued"
                self.ledger.add(cause)
                p.status = cause

    def balanced(self) -> bool:
        return len(self.packets) == self.delivered + self.ledger.losses + self.ledger.residuals


@dataclass
class RunSummary:
    generated: int
    delivered: int
    pdr: float | None
    sensor_pdr: float | None
    meter_pdr: float | None
    e2e_mean_s: float | None
    e2e_p95_s: float | None
    sensor_e2e_mean_s: float | None
    meter_e2e_mean_s: float | None
    dev_queue_delay_s: float | None
    router_queue_delay_s: float | None
    throughput_pps: float
    sensor_losses: int
    meter_losses: int
    meter_expired: int
    ledger: LossLedger = field(default_factory=LossLedger)


def _mean(xs: list[float]) -> float | None:
    return sum(xs) / len(xs) if xs else None


def _p95(xs: list[float]) -> float | None:
    if not xs:
        return None
    s = sorted(xs)
    return s[min(len(s) - 1, math.ceil(0.95 * len(s)) - 1)]


def _ratio(a: int, b: int) -> float | None:
    return a / b if b else None


EXPIRY = ("expired_at_mfdrr", "expired_in_queue")


def summarize(rec: Recorder, warmup_ns: int, end_ns: int) -> RunSummary:
    """Statistics over packets born after warm-up; residuals leave the PDR denominator."""
    done = {k: 0 for k in Klass}
    got = {k: 0 for k in Klass}
    lost = {k: 0 for k in Klass}
    meter_expired = 0
    e2e: dict[Klass, list[float]] = {k: [] for k in Klass}
    devq: list[float] = []
    rtq: list[float] = []
    thr = 0
    for p in rec.packets:
        if p.status == "delivered" and p.t_sink >= warmup_ns:
            thr += 1
        if p.born_at < warmup_ns or p.status is None or p.status.startswith("residual"):
            continue
        done[p.klass] += 1
        if p.status == "delivered":
            got[p.klass] += 1
            e2e[p.klass].append((p.t_sink - p.born_at) / NS_PER_S)
            devq.append((p.t_dev_tx - p.born_at) / NS_PER_S)
            rtq.append((p.t_router_tx - p.t_router_rx) / NS_PER_S)
        else:
            lost[p.klass] += 1
            if p.klass is Klass.METER and p.status in EXPIRY:
                meter_expired += 1
    all_e2e = [x for k in Klass for x in e2e[k]]
    n_done = sum(done.values())
    n_got = sum(got.values())
    span = (end_ns - warmup_ns) / NS_PER_S
    return RunSummary(
        generated=len(rec.packets),
        delivered=rec.delivered,
        pdr=_ratio(n_got, n_done),
        sensor_pdr=_ratio(got[Klass.SENSOR], done[Klass.SENSOR]),
        meter_pdr=_ratio(got[Klass.METER], done[Klass.METER]),
        e2e_mean_s=_mean(all_e2e),
        e2e_p95_s=_p95(all_e2e),
        sensor_e2e_mean_s=_mean(e2e[Klass.SENSOR]),
        meter_e2e_mean_s=_mean(e2e[Klass.METER]),
        dev_queue_delay_s=_mean(devq),
        router_queue_delay_s=_mean(rtq),
        throughput_pps=thr / span if span > 0 else 0.0,
        sensor_losses=lost[Klass.SENSOR],
        meter_losses=lost[Klass.METER],
        meter_expired=meter_expired,
        ledger=rec.ledger,
    )


@dataclass(frozen=True)
class Interval:
    mean: float
    half_width: float | None


def confidence_interval(samples: list[float], level: float = 0.95) -> Interval:
    """Student-t interval for the mean; half width is absent below two samples."""
    xs = [x for x in samples if x is not None]
    if not xs:
        raise ValueError("no samples")
    m = statistics.fmean(xs)
    if len(xs) < 2:
        return Interval(m, None)
    s = statistics.stdev(xs)
    t = stats.t.ppf(0.5 + level / 2, len(xs) - 1)
    return Interval(m, float(t * s / math.sqrt(len(xs))))


def throughput_gain(thr_mitigated: float, thr_affected: float) -> tuple[float, float | None]:
    """Gain G = Thr1 - Thr2 and interference coefficient alpha = 1 - Thr2/Thr1."""
    g = thr_mitigated - thr_affected
    alpha = 1.0 - thr_affected / thr_mitigated if thr_mitigated > 0 else None
    return g, alpha


def bb_silence_violations(trace) -> list[tuple[int, int]]:
    """Transmission starts that fall inside a Blank Burst window the node had decoded.

    ``trace`` holds ``(time_ns, node, kind, packet_id, detail)`` rows in time
    order; windows come from ``bb_suspend`` rows (``from=..;until=..``) and
    starts from ``tx_start`` rows.  Returns the offending ``(time_ns, node)``.
    """
    windows: dict[int, list[tuple[int, int]]] = {}
    bad = []
    for t, node, kind, _pid, detail in trace:
        if kind == "bb_suspend":
            f = dict(kv.split("=") for kv in detail.split(";"))
            windows.setdefault(node, []).append((int(f["from"]), int(f["until"])))
        elif kind == "tx_start":
            live = [w for w in windows.get(node, ()) if w[1] >= t]
            windows[node] = live
            if any(a < t <= b for a, b in live):
                bad.append((t, node))
    return bad
