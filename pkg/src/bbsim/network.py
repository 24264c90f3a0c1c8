"""One simulation run: the area networks, the sink, and the mode-specific MFDRR behaviour."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import lowpan as lp
from .config import ScenarioConfig
from .engine import NS_PER_MS, Engine, RngStream, seconds
from .metrics import Recorder, RunSummary, summarize
from .radio import (Medium, Outcome, Radio, ReceiverParams, lowpan_channel, wlan_channel)
from .scheduler import (InsertResult, Klass, Mode, SchedulerState, adaptive_agg_step, aggfactor_check,
                        classify_and_insert, drain_for_burst, finish_bb, frame_count)
from .topology import Role, Topology, build_topology
from .traffic import TrafficProfile, class_for, generate_packet, next_interarrival, start_phase
from .wlan import (Burst, WlanTransmitter, bb_duration_for, compute_bb_duration, frame_airtime,
                   make_frame)


@dataclass
class RunChecks:
    """Invariant monitors filled in while the run executes."""

    bursts: int = 0
    clean_bursts: int = 0
    eq3_mismatches: int = 0
    late_payloads: int = 0
    bb_windows: int = 0
    bb_violations: int = 0
    lowpan_tx_starts: int = 0
    reserved_overruns: int = 0
    burst_log: list = field(default_factory=list)


@dataclass
class RunResult:
    mode: Mode
    load: float
    seed: int
    summary: RunSummary
    checks: RunChecks
    events: int
    balanced: bool
    trace: list | None = None


class Tracer:
    def __init__(self, engine: Engine):
        self.engine = engine
        self.lines: list[tuple] = []

    def __call__(self, node: int, kind: str, pid: int = -1, detail: str = ""):
        self.lines.append((self.engine.now, node, kind, pid, detail))


class Device:
    def __init__(self, net: "Network", rec, radio: Radio, profile: TrafficProfile, rng: RngStream):
        self.net = net
        self.id = rec.id
        self.radio = radio
        self.profile = profile
        self.rng = rng
        self.mac: lp.CsmaMac | None = None
        self.susp = (-1, -1)

    def handle(self, tx, r):
        if r.outcome is not Outcome.DELIVERED:
            return
        if tx.kind == "lowpan_ack":
            self.mac.on_ack(tx.frame)
        elif tx.kind == "beacon" and tx.frame.bb_duration:
            self.net.bb_heard(self, tx.end, tx.frame.bb_duration)

    def start(self):
        self.net.engine.schedule(self.net.engine.now + start_phase(self.profile, self.rng), self._generate)

    def _generate(self):
        net = self.net
        now = net.engine.now
        pkt = generate_packet(len(net.rec.packets), self.id, self.profile, now)
        net.rec.generated(pkt)
        if net.trace:
            net.trace(self.id, "gen", pkt.id, pkt.klass.value)
        if not self.mac.enqueue(pkt):
            net.lose(pkt, "device_overflow", self.id)
        net.engine.schedule(now + next_interarrival(self.profile, self.rng), self._generate)


class Router:
    def __init__(self, net: "Network", rec, radio: Radio):
        self.net = net
        self.id = rec.id
        self.radio = radio
        self.mac: lp.CsmaMac | None = None
        self.coord: lp.Coordinator | None = None
        self.susp = (-1, -1)

    def handle(self, tx, r):
        kind = tx.kind
        if kind == "lowpan_data":
            self.coord.receive_data(tx, r)
        elif r.outcome is not Outcome.DELIVERED:
            return
        elif kind == "lowpan_ack":
            self.mac.on_ack(tx.frame)
        elif kind == "beacon" and tx.frame.bb_duration:
            self.coord.pending_bb = tx.frame.bb_duration
            self.net.bb_heard(self, tx.end, tx.frame.bb_duration)

    def on_data(self, pkt, sender: int):
        if pkt.at == self.id:
            return
        net = self.net
        pkt.at = self.id
        pkt.t_router_rx = net.engine.now
        if net.trace:
            net.trace(self.id, "rx", pkt.id, f"from={sender}")
        if not self.mac.enqueue(pkt):
            net.lose(pkt, "device_overflow", self.id)


class Mfdrr:
    def __init__(self, net: "Network", rec):
        self.net = net
        self.id = rec.id
        self.rec = rec
        self.coords: list[lp.Coordinator] = []
        self.wlan: WlanTransmitter | None = None
        self.state: SchedulerState | None = None
        self.arrivals = 0
        self.last_arrivals = 0
        self.hs_bb = None
        self.full_frame_air = 0

    def handle_lowpan(self, tx, r):
        if tx.kind == "lowpan_data":
            for c in self.coords:
                if c.radio is r.radio:
                    c.receive_data(tx, r)

    def on_data(self, pkt, sender: int):
        if pkt.at == self.id:
            return
        net = self.net
        now = net.engine.now
        pkt.at = self.id
        pkt.t_mfdrr_rx = now
        self.arrivals += 1
        if net.trace:
            net.trace(self.id, "rx", pkt.id, f"from={sender}")
        mode = net.mode
        s = self.state
        if mode is Mode.NONE:
            self.wlan.send([make_frame([pkt], net.dcf, now, self.id)])
        elif mode is Mode.ADAPTIVE_AGG:
            res, pkts = adaptive_agg_step(s, pkt)
            if res is InsertResult.SEND_NOW:
                self.wlan.send([make_frame(pkts, net.dcf, now, self.id)])
        elif mode is Mode.AGG_BB:
            aggfactor_check(s, pkt, now)
        else:
            if classify_and_insert(s, pkt, now) is InsertResult.DROPPED_EXPIRED:
                net.lose(pkt, "expired_at_mfdrr", self.id)

    # --- Blank Burst handshake ---------------------------------------------
    def on_trigger(self, hs):
        if self.net.trace:
            self.net.trace(self.id, "bb_request", -1, "")

    def on_beacon_out(self, coord, bb):
        """Called by each 6LoWPAN coordinator of this MFDRR right before its beacon."""
        net = self.net
        now = net.engine.now
        if coord is self.coords[0]:
            self.last_arrivals, self.arrivals = self.arrivals, 0
        s = self.state
        if s is None or s.handshake is None:
            return None
        hs = s.handshake
        if hs.beacon_out_at == now:
            return hs.bb_duration
        if hs.beacon_out_at >= 0 or coord is not self.coords[0]:
            return None
        # reserve room for what is queued plus what the coming active period usually brings
        expect = s.queued() + self.last_arrivals
        n = frame_count(expect, s.agg_factor) + net.cfg.scheduler.reserve_frames
        cap = net.cfg.scheduler.frame_cap
        if cap:
            n = min(n, cap)
        n = max(n, 1)
        hs.beacon_out_at = now
        hs.n_frames = n
        hs.reserved_payloads = n * s.agg_factor
        hs.bb_duration = compute_bb_duration(n, self.full_frame_air, net.dcf)
        hs.devices_silent_at = now + net.relay_delay
        net.engine.schedule(hs.devices_silent_at, self._burst_start, hs)
        if net.trace:
            net.trace(self.id, "bb_beacon", -1, f"bb_ns={hs.bb_duration};frames={n}")
        return hs.bb_duration

    def _burst_start(self, hs):
        net = self.net
        now = net.engine.now
        s = self.state
        groups, expired = drain_for_burst(s, now, hs.reserved_payloads)
        for p in expired:
            net.lose(p, "expired_in_queue", self.id)
        frames = [make_frame(g, net.dcf, now, self.id) for g in groups]
        hs.frames = frames
        if net.mode is Mode.LIFETIME_BB:
            net.checks.late_payloads += sum(1 for f in frames for p in f.payloads if p.deadline < now)
        burst = Burst(frames, expected_ns=bb_duration_for(
            [frame_airtime(f.air_bytes(net.dcf), net.dcf) for f in frames], net.dcf),
            on_end=self._burst_end)
        burst.extra["hs"] = hs
        if net.trace:
            net.trace(self.id, "burst_start", -1, f"frames={len(frames)};payloads={sum(len(g) for g in groups)}")
        self.wlan.send(frames, burst)

    def _burst_end(self, burst: Burst):
        net = self.net
        hs = burst.extra["hs"]
        hs.bb_end_at = burst.end
        ch = net.checks
        if burst.frames:
            ch.bursts += 1
            if burst.clean:
                ch.clean_bursts += 1
                if burst.end - burst.start != burst.expected_ns:
                    ch.eq3_mismatches += 1
            if burst.end - burst.start > hs.bb_duration:
                ch.reserved_overruns += 1
            if net.keep_bursts:
                ch.burst_log.append((self.id, hs.requested_at, hs.beacon_out_at, hs.devices_silent_at,
                                     burst.start, burst.end, burst.expected_ns, hs.bb_duration,
                                     burst.clean, [len(f.payloads) for f in burst.frames]))
        if net.trace:
            net.trace(self.id, "burst_end", -1, f"clean={int(burst.clean)};ns={burst.end - burst.start}")
        finish_bb(self.state, net.engine.now)


class Sink:
    def __init__(self, net: "Network", rec):
        self.net = net
        self.id = rec.id
        self.radios: dict[int, Radio] = {}
        self.senders: dict[int, WlanTransmitter] = {}

    def handle(self, tx, r):
        if tx.kind != "wlan_data":
            return
        net = self.net
        sender = self.senders[tx.radio.id]
        frame = tx.frame
        if r.outcome is not Outcome.DELIVERED:
            return
        now = net.engine.now
        for p in frame.payloads:
            if p.status is None:
                p.at = self.id
                net.rec.delivered_at(p, now)
                if net.trace:
                    net.trace(self.id, "deliver", p.id, "")
        net.engine.schedule(now + net.dcf.sifs_ns, self._ack, r.radio, tx.radio, sender, frame)

    def _ack(self, radio: Radio, to: Radio, sender: WlanTransmitter, frame):
        net = self.net
        if radio.transmitting is not None:
            net.engine.schedule(net.engine.now + net.dcf.ack_ns, sender.ack_result, frame, False)
            return

        def done(ack_tx):
            sender.ack_result(frame, ack_tx.receptions[0].outcome is Outcome.DELIVERED)

        net.medium.start_transmission(radio, net.dcf.ack_ns, net.cfg.power.sink_mw, frame, (to,),
                                      "wlan_ack", done)


class Network:
    def __init__(self, cfg: ScenarioConfig, mode: Mode, load: float, seed: int,
                 trace: bool = False, keep_bursts: bool = False):
        self.cfg = cfg
        self.mode = mode
        self.load = load
        self.seed = seed
        self.engine = Engine()
        self.medium = Medium(self.engine)
        self.rec = Recorder()
        self.checks = RunChecks()
        self.trace = Tracer(self.engine) if trace else None
        self.keep_bursts = keep_bursts
        self.dcf = cfg.wlan
        self.mac = cfg.mac
        self.t_end = seconds(cfg.scenario.duration_s)
        self.topo: Topology = build_topology(cfg, RngStream("topology", seed))
        self._build()

    # --- construction --------------------------------------------------------
    def _build(self):
        cfg = self.cfg
        t = cfg.topology
        pw = cfg.power
        rc = cfg.radio
        lp_rx = ReceiverParams(rc.noise_dbm, rc.lowpan_sensitivity_dbm, rc.lowpan_capture_db)
        wl_rx = ReceiverParams(rc.noise_dbm, rc.wlan_sensitivity_dbm, rc.wlan_capture_db)
        beacon_air = lp.airtime(self.mac.beacon_bytes, self.mac)
        sf = cfg.superframe
        m_active = lp.BASE_SUPERFRAME_NS << sf.mfdrr_so
        r_active = lp.BASE_SUPERFRAME_NS << sf.router_so
        # devices under the first router slot hear the relayed beacon this long after the MFDRR's
        self.relay_delay = m_active + beacon_air
        payload = cfg.traffic.packet_bytes + self.dcf.subheader_bytes
        full_air = frame_airtime(cfg.scheduler.agg_factor * payload + self.dcf.mac_header_bytes, self.dcf)
        self.radios: list[Radio] = []

        def radio(node, pos, ch, rx, name):
            r = Radio(len(self.radios), node, pos, ch, rx, name=name)
            self.radios.append(r)
            return r

        nodes = self.topo.nodes
        self.mfdrrs: dict[int, Mfdrr] = {}
        self.routers: dict[int, Router] = {}
        self.devices: dict[int, Device] = {}
        sink_rec = nodes[self.topo.sink]
        self.sink = Sink(self, sink_rec)
        for ch in sorted(set(t.wlan_channels)):
            r = radio(sink_rec.id, sink_rec.pos, wlan_channel(ch), wl_rx, f"sink.ch{ch}")
            r.handler = self.sink.handle
            self.sink.radios[ch] = r

        traffic = cfg.traffic
        for m_rec in self.topo.of_role(Role.MFDRR):
            m = Mfdrr(self, m_rec)
            m.full_frame_air = full_air
            self.mfdrrs[m.id] = m
            off = round(m_rec.area * t.area_offset_ms * NS_PER_MS)
            m_sched = lp.Schedule(lp.SuperframeConfig(sf.bo, sf.mfdrr_so, off), beacon_air)
            lradios = {}
            for ch in t.lowpan_channels:
                r = radio(m.id, m_rec.pos, lowpan_channel(ch), lp_rx, f"mfdrr{m.id}.ch{ch}")
                r.handler = m.handle_lowpan
                c = lp.Coordinator(self.engine, self.medium, r, m.id, m_sched, self.mac,
                                   pw.mfdrr_lowpan_mw, m.on_data, m.on_beacon_out)
                m.coords.append(c)
                lradios[ch] = r
            w = radio(m.id, m_rec.pos, wlan_channel(m_rec.wlan_channel), wl_rx, f"mfdrr{m.id}.wlan")
            sink_radio = self.sink.radios[m_rec.wlan_channel]
            m.wlan = WlanTransmitter(self.engine, self.medium, w, sink_radio, self.dcf, pw.mfdrr_wlan_mw,
                                     on_lost=self._wlan_lost)
            self.sink.senders[w.id] = m.wlan
            if self.mode in (Mode.ADAPTIVE_AGG, Mode.AGG_BB, Mode.LIFETIME_BB):
                m.state = SchedulerState(self.mode, seconds(cfg.scheduler.margin_s),
                                         cfg.scheduler.agg_factor, self.engine, m.on_trigger)
            for rid in m_rec.children:
                r_rec = nodes[rid]
                rt = Router(self, r_rec, None)
                self.routers[rid] = rt
                rr = radio(rid, r_rec.pos, lowpan_channel(r_rec.lowpan_channel), lp_rx, f"router{rid}")
                rr.handler = rt.handle
                rt.radio = rr
                parent = lradios[r_rec.lowpan_channel]
                for c in m.coords:
                    if c.radio is parent:
                        c.children.append(rr)
                rt.mac = lp.CsmaMac(self.engine, self.medium, rr, parent, m_sched, self.mac,
                                    RngStream(f"mac.{rid}", self.seed), pw.router_mw,
                                    self._mac_lost, self._router_tx)
                r_off = off + m_active + r_rec.slot * r_active
                r_sched = lp.Schedule(lp.SuperframeConfig(sf.bo, sf.router_so, r_off), beacon_air)
                rt.coord = lp.Coordinator(self.engine, self.medium, rr, rid, r_sched, self.mac,
                                          pw.router_mw, rt.on_data)
                for did in r_rec.children:
                    d_rec = nodes[did]
                    klass = class_for(d_rec.index, t.devices_per_router, traffic.split)
                    rate = self._rate(klass)
                    lifetime = seconds(traffic.meter_lifetime_s if klass is Klass.METER
                                       else traffic.sensor_lifetime_s)
                    prof = TrafficProfile(klass, rate, traffic.packet_bytes, lifetime)
                    dr = radio(did, d_rec.pos, lowpan_channel(d_rec.lowpan_channel), lp_rx, f"dev{did}")
                    dev = Device(self, d_rec, dr, prof, RngStream(f"traffic.dev.{did}", self.seed))
                    dr.handler = dev.handle
                    dev.mac = lp.CsmaMac(self.engine, self.medium, dr, rr, r_sched, self.mac,
                                         RngStream(f"mac.{did}", self.seed), pw.device_mw,
                                         self._mac_lost, self._dev_tx)
                    rt.coord.children.append(dr)
                    self.devices[did] = dev

    def _rate(self, klass: Klass) -> float:
        tr = self.cfg.traffic
        if klass is Klass.SENSOR and tr.sensor_rate_pps > 0:
            return tr.sensor_rate_pps
        if klass is Klass.METER and tr.meter_rate_pps > 0:
            return tr.meter_rate_pps
        return self.load

    # --- callbacks -------------------------------------------------------------
    def lose(self, pkt, cause: str, node: int):
        self.rec.lost(pkt, cause)
        if self.trace:
            self.trace(node, "drop", pkt.id, cause)

    def _mac_lost(self, pkt, cause: str, mac):
        # the parent may already hold the packet even though its ACKs were lost
        if pkt.at != mac.radio.node or pkt.status is not None:
            return
        self.lose(pkt, cause, mac.radio.node)

    def _wlan_lost(self, frame):
        for p in frame.payloads:
            if p.status is None:
                self.lose(p, "wlan_loss", frame.source)

    def _check_silence(self, node_obj):
        now = self.engine.now
        a, b = node_obj.susp
        if a < now <= b:
            self.checks.bb_violations += 1

    def _dev_tx(self, pkt, mac):
        node = self.devices[mac.radio.node]
        self.checks.lowpan_tx_starts += 1
        self._check_silence(node)
        if pkt.at == node.id:
            pkt.t_dev_tx = self.engine.now
        if self.trace:
            self.trace(node.id, "tx_start", pkt.id, "")

    def _router_tx(self, pkt, mac):
        node = self.routers[mac.radio.node]
        self.checks.lowpan_tx_starts += 1
        self._check_silence(node)
        pkt.t_router_tx = self.engine.now
        if self.trace:
            self.trace(node.id, "tx_start", pkt.id, "")

    def bb_heard(self, node_obj, rx_end: int, bb: int):
        node_obj.susp = (rx_end, rx_end + bb)
        node_obj.mac.apply_bb_suspension(rx_end + bb)
        self.checks.bb_windows += 1
        if self.trace:
            self.trace(node_obj.id, "bb_suspend", -1, f"from={rx_end};until={rx_end + bb}")

    # --- run ---------------------------------------------------------------------
    def run(self) -> RunResult:
        eng = self.engine
        for m in self.mfdrrs.values():
            for c in m.coords:
                c.start(self.t_end)
        for rt in self.routers.values():
            rt.coord.start(self.t_end)
        for d in self.devices.values():
            d.start()
        stats = eng.run_until(self.t_end)
        self.rec.close(set(self.mfdrrs))
        summary = summarize(self.rec, seconds(self.cfg.scenario.warmup_s), self.t_end)
        return RunResult(self.mode, self.load, self.seed, summary, self.checks, stats.fired,
                         self.rec.balanced(), self.trace.lines if self.trace else None)


def simulate(cfg: ScenarioConfig, mode: Mode, load: float, seed: int, trace: bool = False,
             keep_bursts: bool = False) -> RunResult:
    return Network(cfg, mode, load, seed, trace, keep_bursts).run()
