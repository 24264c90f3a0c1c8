"""Scenario configuration: dataclass sections and a flat ``section.key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .engine import ConfigurationError
from .lowpan import MacParams
from .scheduler import Mode
from .wlan import DcfParams


@dataclass
class ScenarioSection:
    duration_s: float = 300.0
    warmup_s: float = 10.0
    modes: tuple = tuple(Mode)
    loads: tuple = (0.5, 1.0, 1.3, 1.5, 1.7, 2.0)
    seeds: tuple = (1, 2, 3, 4, 5)


@dataclass
class TopologySection:
    areas: int = 4
    routers_per_area: int = 8
    devices_per_router: int = 8
    field_m: float = 400.0
    router_ring_m: float = 40.0
    device_radius_m: float = 20.0
    area_offset_ms: float = 3.84
    lowpan_channels: tuple = (12, 17)
    wlan_channels: tuple = (1, 6)


@dataclass
class SuperframeSection:
    bo: int = 4
    mfdrr_so: int = 3
    router_so: int = 2


@dataclass
class PowerSection:
    mfdrr_lowpan_mw: float = 1.8
    mfdrr_wlan_mw: float = 100.0
    router_mw: float = 1.8
    device_mw: float = 1.0
    sink_mw: float = 100.0


@dataclass
class RadioSection:
    noise_dbm: float = -100.0
    lowpan_sensitivity_dbm: float = -95.0
    wlan_sensitivity_dbm: float = -90.0
    lowpan_capture_db: float = 5.0
    wlan_capture_db: float = 10.0


@dataclass
class SchedulerSection:
    agg_factor: int = 25
    margin_s: float = 0.2
    frame_cap: int = 0
    reserve_frames: int = 1


@dataclass
class TrafficSection:
    packet_bytes: int = 64
    sensor_lifetime_s: float = 0.6
    meter_lifetime_s: float = 900.0
    split: str = "two_class"
    sensor_rate_pps: float = 0.0
    meter_rate_pps: float = 0.0


@dataclass
class ScenarioConfig:
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    topology: TopologySection = field(default_factory=TopologySection)
    superframe: SuperframeSection = field(default_factory=SuperframeSection)
    power: PowerSection = field(default_factory=PowerSection)
    radio: RadioSection = field(default_factory=RadioSection)
    mac: MacParams = field(default_factory=MacParams)
    wlan: DcfParams = field(default_factory=DcfParams)
    scheduler: SchedulerSection = field(default_factory=SchedulerSection)
    traffic: TrafficSection = field(default_factory=TrafficSection)

    @property
    def node_count(self) -> int:
        t = self.topology
        return t.areas * (1 + t.routers_per_area * (1 + t.devices_per_router)) + 1

    def replace(self, **overrides) -> "ScenarioConfig":
        """Copy with ``section.key`` style overrides, e.g. ``replace(**{"scheduler.margin_s": 0.1})``."""
        cfg = dataclasses.replace(self)
        for key, value in overrides.items():
            _assign(cfg, key, value, None)
        validate(cfg)
        return cfg


SPLITS = ("two_class", "sensor", "meter", "three_class")


def _coerce(raw, proto, key: str, line: int | None):
    where = f" (line {line})" if line is not None else ""
    try:
        if isinstance(proto, tuple):
            items = raw if isinstance(raw, (list, tuple)) else [x for x in str(raw).split(",") if x.strip()]
            if key == "scenario.modes":
                return tuple(m if isinstance(m, Mode) else Mode.parse(m) for m in items)
            elem = type(proto[0]) if proto else float
            return tuple(elem(x.strip()) if isinstance(x, str) else elem(x) for x in items)
        if isinstance(proto, bool):
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("true", "yes", "1", "on"):
                return True
            if text in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if isinstance(proto, int):
            if isinstance(raw, str):
                return int(raw.strip())
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if isinstance(proto, float):
            return float(raw)
        return str(raw).strip()
    except ConfigurationError as e:
        raise ConfigurationError(f"{key}{where}: {e}") from None
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}{where}: cannot read {raw!r} as {type(proto).__name__}") from None


def _assign(cfg: ScenarioConfig, key: str, raw, line: int | None):
    where = f" (line {line})" if line is not None else ""
    if key.count(".") != 1:
        raise ConfigurationError(f"unknown key {key!r}{where}: keys look like section.name")
    sec_name, name = key.split(".")
    if sec_name not in {f.name for f in fields(ScenarioConfig)}:
        raise ConfigurationError(f"unknown key {key!r}{where}: no section {sec_name!r}")
    sec = getattr(cfg, sec_name)
    if name not in {f.name for f in fields(sec)}:
        raise ConfigurationError(f"unknown key {key!r}{where}")
    value = _coerce(raw, getattr(sec, name), key, line)
    try:
        setattr(cfg, sec_name, dataclasses.replace(sec, **{name: value}))
    except ConfigurationError as e:
        raise ConfigurationError(f"{key}{where}: {e}") from None


def _check(ok: bool, key: str, msg: str, lines: dict):
    if not ok:
        line = lines.get(key)
        where = f" (line {line})" if line is not None else ""
        raise ConfigurationError(f"{key}{where}: {msg}")


def validate(cfg: ScenarioConfig, lines: dict | None = None):
    lines = lines or {}
    s, t, sf, sch, tr = cfg.scenario, cfg.topology, cfg.superframe, cfg.scheduler, cfg.traffic
    _check(s.duration_s > 0, "scenario.duration_s", "must be > 0", lines)
    _check(0 <= s.warmup_s < s.duration_s, "scenario.warmup_s", "must be in [0, duration)", lines)
    _check(len(s.modes) > 0, "scenario.modes", "at least one mode", lines)
    _check(len(s.loads) > 0 and all(x > 0 for x in s.loads), "scenario.loads", "loads must be > 0", lines)
    _check(len(s.seeds) > 0, "scenario.seeds", "at least one seed", lines)
    _check(t.areas >= 1, "topology.areas", "must be >= 1", lines)
    _check(t.routers_per_area >= 1, "topology.routers_per_area", "must be >= 1", lines)
    _check(t.routers_per_area % len(t.lowpan_channels) == 0, "topology.routers_per_area",
           "must split evenly over the 6LoWPAN channels", lines)
    _check(t.devices_per_router >= 1, "topology.devices_per_router", "must be >= 1", lines)
    _check(t.field_m > 0 and t.router_ring_m > 0 and t.device_radius_m > 0, "topology.field_m",
           "distances must be > 0", lines)
    _check(len(t.lowpan_channels) == 2 and all(11 <= c <= 26 for c in t.lowpan_channels),
           "topology.lowpan_channels", "need two channels in 11..26", lines)
    _check(len(t.wlan_channels) >= 1 and all(1 <= c <= 13 for c in t.wlan_channels),
           "topology.wlan_channels", "channels must be in 1..13", lines)
    _check(t.area_offset_ms >= 0, "topology.area_offset_ms", "must be >= 0", lines)
    _check(0 <= sf.bo <= 14, "superframe.bo", "must be in 0..14", lines)
    _check(0 <= sf.mfdrr_so <= sf.bo, "superframe.mfdrr_so", "need SO <= BO", lines)
    _check(0 <= sf.router_so <= sf.bo, "superframe.router_so", "need SO <= BO", lines)
    # routers live in the MFDRR's inactive part, two slots per channel
    slots = max(1, t.routers_per_area // len(t.lowpan_channels) // 2)
    _check((1 << sf.mfdrr_so) + slots * (1 << sf.router_so) <= (1 << sf.bo), "superframe.router_so",
           "router active periods do not fit in the MFDRR inactive period", lines)
    for k, v in dataclasses.asdict(cfg.power).items():
        _check(v > 0, f"power.{k}", "must be > 0", lines)
    _check(sch.agg_factor >= 1, "scheduler.agg_factor", "must be >= 1", lines)
    _check(sch.agg_factor * (tr.packet_bytes + cfg.wlan.subheader_bytes) <= cfg.wlan.mtu_bytes,
           "scheduler.agg_factor", f"{sch.agg_factor} payloads exceed the WLAN MTU", lines)
    _check(sch.margin_s >= 0, "scheduler.margin_s", "must be >= 0", lines)
    _check(sch.frame_cap >= 0, "scheduler.frame_cap", "must be >= 0 (0 = unlimited)", lines)
    _check(sch.reserve_frames >= 0, "scheduler.reserve_frames", "must be >= 0", lines)
    _check(0 < tr.packet_bytes <= 127, "traffic.packet_bytes", "must be in 1..127", lines)
    _check(tr.sensor_lifetime_s > 0, "traffic.sensor_lifetime_s", "must be > 0", lines)
    _check(tr.meter_lifetime_s > 0, "traffic.meter_lifetime_s", "must be > 0", lines)
    _check(tr.split in SPLITS, "traffic.split", f"one of {', '.join(SPLITS)}", lines)
    _check(tr.sensor_rate_pps >= 0 and tr.meter_rate_pps >= 0, "traffic.sensor_rate_pps",
           "rates must be >= 0 (0 = use the sweep load)", lines)


def parse_config(text: str) -> ScenarioConfig:
    cfg = ScenarioConfig()
    lines: dict[str, int] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        if key in lines:
            raise ConfigurationError(f"{key} (line {no}): already set on line {lines[key]}")
        _assign(cfg, key, value, no)
        lines[key] = no
    validate(cfg, lines)
    return cfg


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigurationError(f"{p}: {e.strerror}") from None
    return parse_config(text)


def dump_config(cfg: ScenarioConfig) -> str:
    out = []
    for sec in fields(ScenarioConfig):
        obj = getattr(cfg, sec.name)
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, tuple):
                v = ",".join(x.value if isinstance(x, Mode) else str(x) for x in v)
            out.append(f"{sec.name}.{f.name} = {v}")
    return "\n".join(out) + "\n"
