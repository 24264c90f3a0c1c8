"""Per-device M2M traffic: exponential inter-arrivals, per-class size and lifetime."""

from __future__ import annotations

from dataclasses import dataclass

from .engine import NS_PER_S, ConfigurationError, RngStream
from .scheduler import Klass, SensorPacket


@dataclass(frozen=True)
class TrafficProfile:
    klass: Klass
    rate_pps: float
    bytes: int = 64
    lifetime: int = 600_000_000

    def __post_init__(self):
        if not self.rate_pps > 0:
            raise ConfigurationError(f"{self.klass.value} rate must be > 0, got {self.rate_pps}")
        if self.lifetime <= 0:
            raise ConfigurationError(f"{self.klass.value} lifetime must be > 0")
        if self.bytes <= 0:
            raise ConfigurationError("packet size must be > 0")


def next_interarrival(profile: TrafficProfile, rng: RngStream) -> int:
    """Exponential gap in ns; never zero so two packets of one device never share a timestamp."""
    return max(1, round(rng.exponential(profile.rate_pps) * NS_PER_S))


def start_phase(profile: TrafficProfile, rng: RngStream) -> int:
    return round(rng.uniform(0.0, 1.0 / profile.rate_pps) * NS_PER_S)


def generate_packet(pid: int, dev: int, profile: TrafficProfile, now: int) -> SensorPacket:
    return SensorPacket(pid, dev, profile.klass, now, profile.lifetime, profile.bytes)


def class_for(index_in_router: int, devices_per_router: int, split: str) -> Klass:
    """Traffic class of the ``index_in_router``-th device under one router."""
    if split == "sensor":
        return Klass.SENSOR
    if split == "meter":
        return Klass.METER
    if split == "three_class":
        return (Klass.SENSOR, Klass.METER, Klass.CLASS3)[index_in_router % 3]
    # first half sensors, second half meters
    return Klass.SENSOR if index_in_router < devices_per_router // 2 else Klass.METER
