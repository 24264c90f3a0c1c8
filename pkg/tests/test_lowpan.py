import pytest
from hypothesis import given, settings, strategies as st

from bbsim.engine import ConfigurationError, Engine, RngStream
from bbsim.lowpan import (BACKOFF_NS, Beacon, Coordinator, CsmaMac, MacParams, Schedule, SuperframeConfig,
                          airtime, payload_airtime, superframe_timing)
from bbsim.radio import Medium, Outcome, Radio, ReceiverParams, lowpan_channel
from bbsim.scheduler import Klass, SensorPacket

RX = ReceiverParams(-100.0, -95.0, 5.0)
MS = 1_000_000


def test_superframe_lengths():
    assert SuperframeConfig(4, 3).beacon_interval == 245_760_000
    assert SuperframeConfig(4, 3).active_duration == 122_880_000
    assert SuperframeConfig(4, 2).active_duration == 61_440_000
    with pytest.raises(ConfigurationError):
        SuperframeConfig(3, 4)


def test_superframe_timing_next_beacon():
    sf = SuperframeConfig(4, 2, stagger_offset=122_880_000)
    t = superframe_timing(sf, 0)
    assert (t.next_beacon, t.active_end) == (122_880_000, 184_320_000)
    assert superframe_timing(sf, 122_880_001).next_beacon == 122_880_000 + 245_760_000
    assert superframe_timing(sf, 122_880_000).next_beacon == 122_880_000


def test_airtimes():
    assert payload_airtime(64) == 2_048_000
    assert airtime(64) == 2_240_000
    assert airtime(20) == 832_000


def test_beacon_bb_field():
    assert Beacon(1, 0, SuperframeConfig(4, 3)).bb_duration is None
    with pytest.raises(ValueError):
        Beacon(1, 0, SuperframeConfig(4, 3), bb_duration=0)


class Fixed:
    """Backoff source that always draws the same count."""

    def __init__(self, n=0):
        self.n = n

    def randint(self, lo, hi):
        return min(max(self.n, lo), hi)


def pkt(i=0, born=0):
    return SensorPacket(i, 1, Klass.SENSOR, born, 10**12, 64)


class Cell:
    """A coordinator plus devices on channel 12 with SO=3 inside BO=4."""

    def __init__(self, n_dev=1, p=MacParams(), rng=None, with_coord=True):
        self.eng = Engine()
        self.med = Medium(self.eng)
        self.p = p
        self.sched = Schedule(SuperframeConfig(4, 3), airtime(p.beacon_bytes, p))
        self.got, self.lost, self.starts = [], [], []
        self.coord_radio = Radio(0, 0, (0, 0), lowpan_channel(12), RX, handler=self._coord_rx)
        self.coord = Coordinator(self.eng, self.med, self.coord_radio, 0, self.sched, p, 1.8,
                                 on_data=lambda f, s: self.got.append(f)) if with_coord else None
        self.macs = []
        for i in range(n_dev):
            r = Radio(i + 1, i + 1, (5.0 + i, 3.0), lowpan_channel(12), RX, handler=self._dev_rx)
            mac = CsmaMac(self.eng, self.med, r, self.coord_radio, self.sched, p,
                          rng if rng is not None else RngStream(f"d{i}", 1), 1.0,
                          on_lost=lambda pk, cause, m: self.lost.append((pk, cause)),
                          on_tx=lambda pk, m: self.starts.append((self.eng.now, m.radio.node)))
            mac.backoff_log = []
            self.macs.append(mac)

    def _coord_rx(self, tx, r):
        if tx.kind == "lowpan_data" and self.coord is not None:
            self.coord.receive_data(tx, r)

    def _dev_rx(self, tx, r):
        if tx.kind == "lowpan_ack" and r.outcome is Outcome.DELIVERED:
            for m in self.macs:
                if m.radio is r.radio:
                    m.on_ack(tx.frame)


def test_idle_channel_transmits_two_cca_after_backoff():
    c = Cell(rng=Fixed(0))
    c.macs[0].enqueue(pkt())
    c.eng.run_until(10 * MS)
    # the contention period opens on the first backoff boundary after the 832 us beacon
    assert c.starts == [(960_000 + 256_000, 1)]
    assert len(c.got) == 1


def test_busy_channel_exhausts_backoffs():
    c = Cell(rng=Fixed(0), with_coord=False)
    jam = Radio(9, 9, (3.0, 0.0), lowpan_channel(12), RX)
    c.med.start_transmission(jam, 100 * MS, 1.0)
    c.macs[0].enqueue(pkt())
    c.eng.run_until(50 * MS)
    assert [cause for _, cause in c.lost] == ["csma_failure"]
    assert c.starts == []
    assert c.macs[0].nb == c.p.max_csma_backoffs


def test_acked_delivery_and_retry_exhaustion():
    c = Cell(p=MacParams(ack_enabled=True))
    c.macs[0].enqueue(pkt())
    c.eng.run_until(20 * MS)
    assert len(c.got) == 1 and not c.lost and len(c.starts) == 1

    # no coordinator: every attempt times out, 1 + 3 retries, then the packet is ledgered
    c = Cell(p=MacParams(ack_enabled=True), with_coord=False)
    c.macs[0].enqueue(pkt())
    c.eng.run_until(200 * MS)
    assert len(c.starts) == 4
    assert [cause for _, cause in c.lost] == ["collision"]


def test_queue_cap():
    c = Cell(p=MacParams(queue_cap=2))
    m = c.macs[0]
    assert m.enqueue(pkt(0)) and m.enqueue(pkt(1))
    assert not m.enqueue(pkt(2))
    assert len(m.drain()) == 2


@pytest.mark.parametrize("acked", [False, True])
def test_suspension_blocks_transmission_starts(acked):
    c = Cell(n_dev=3, p=MacParams(ack_enabled=acked))
    for i, m in enumerate(c.macs):
        for k in range(5):
            m.enqueue(pkt(10 * i + k))
    t0, bb = 4 * MS, 806_400

    def suspend():
        for m in c.macs:
            m.apply_bb_suspension(c.eng.now + bb)

    c.eng.schedule(t0, suspend)
    c.eng.run_until(500 * MS)
    assert c.starts
    assert not [t for t, _ in c.starts if t0 < t <= t0 + bb]
    assert len(c.got) + len(c.lost) == 15


def test_suspension_into_inactive_period_waits_for_next_window():
    c = Cell(rng=Fixed(0))
    m = c.macs[0]
    c.eng.schedule(100 * MS, m.apply_bb_suspension, 150 * MS)
    c.eng.schedule(100 * MS, m.enqueue, pkt())
    c.eng.run_until(400 * MS)
    assert c.starts == [(245_760_000 + 960_000 + 256_000, 1)]


def test_packet_arriving_during_suspension_goes_out_after():
    c = Cell(rng=Fixed(0))
    m = c.macs[0]
    c.eng.schedule(10 * MS, m.apply_bb_suspension, 11 * MS)
    c.eng.schedule(10 * MS + 1, m.enqueue, pkt())
    c.eng.run_until(30 * MS)
    assert len(c.starts) == 1 and c.starts[0][0] > 11 * MS


def test_idle_during_suspension_schedules_nothing():
    c = Cell()
    c.eng.schedule(5 * MS, c.macs[0].apply_bb_suspension, 6 * MS)
    c.eng.run_until(7 * MS)
    assert c.eng.queued == 0 and c.starts == []


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(1, 6), st.integers(0, 1000))
def test_backoff_bounds_and_window_confinement(n_dev, per_dev, seed):
    c = Cell(n_dev=n_dev, p=MacParams(ack_enabled=seed % 2 == 1))
    for i, m in enumerate(c.macs):
        m.rng = RngStream(f"dev{i}", seed)
        for k in range(per_dev):
            c.eng.schedule(k * 37 * MS, m.enqueue, pkt(100 * i + k))
    c.eng.run_until(2_000 * MS)
    for m in c.macs:
        for n, be in m.backoff_log:
            assert c.p.min_be <= be <= c.p.max_be
            assert 0 <= n <= (1 << be) - 1
    for t, _ in c.starts:
        cs, ce = c.sched.window_at(t)
        assert cs <= t < ce
        assert (t - cs) % BACKOFF_NS == 256_000 % BACKOFF_NS
    # each packet reached the coordinator, was ledgered, or is still queued
    seen = {p.id for p in c.got} | {p.id for p, _ in c.lost} | {p.id for m in c.macs for p in m.drain()}
    assert seen == {100 * i + k for i in range(n_dev) for k in range(per_dev)}


def test_schedule_counts_only_inside_windows():
    s = Schedule(SuperframeConfig(4, 3), airtime(20))
    cs, ce = s.window_at(0)
    assert (cs, ce) == (960_000, 122_880_000)
    assert s.count_down(ce - BACKOFF_NS, 2) == 245_760_000 + 960_000 + BACKOFF_NS
    assert s.periods_between(cs, s.count_down(cs, 7)) == 7
