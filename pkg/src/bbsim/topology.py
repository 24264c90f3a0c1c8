"""Area-network layout: MFDRRs on a grid, routers on a ring, devices in a disk, one sink."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .config import ScenarioConfig
from .engine import RngStream


class Role(Enum):
    MFDRR = "mfdrr"
    ROUTER = "router"
    DEVICE = "device"
    SINK = "sink"


@dataclass
class NodeRecord:
    id: int
    role: Role
    pos: tuple[float, float]
    area: int
    parent: int | None = None
    lowpan_channel: int | None = None
    wlan_channel: int | None = None
    slot: int = 0
    index: int = 0
    children: list[int] = field(default_factory=list)


@dataclass
class Topology:
    nodes: list[NodeRecord]
    sink: int

    def of_role(self, role: Role) -> list[NodeRecord]:
        return [n for n in self.nodes if n.role is role]

    def hops_to_sink(self, node_id: int) -> int:
        hops = 0
        n = self.nodes[node_id]
        while n.parent is not None:
            n = self.nodes[n.parent]
            hops += 1
        # the MFDRR reaches the sink over its WLAN link
        return hops + (1 if n.role is Role.MFDRR else 0)


def area_centers(areas: int, field_m: float) -> list[tuple[float, float]]:
    side = math.ceil(math.sqrt(areas))
    cell = field_m / side
    return [((a % side + 0.5) * cell, (a // side + 0.5) * cell) for a in range(areas)]


def build_topology(cfg: ScenarioConfig, rng: RngStream) -> Topology:
    """Deterministic placement for a given seed stream."""
    t = cfg.topology
    side = math.ceil(math.sqrt(t.areas))
    nodes: list[NodeRecord] = []
    for a, (cx, cy) in enumerate(area_centers(t.areas, t.field_m)):
        row, col = divmod(a, side)
        m = NodeRecord(len(nodes), Role.MFDRR, (cx, cy), a,
                       wlan_channel=t.wlan_channels[(row + col) % len(t.wlan_channels)])
        nodes.append(m)
        nch = len(t.lowpan_channels)
        for k in range(t.routers_per_area):
            ang = 2 * math.pi * k / t.routers_per_area
            j = k // nch
            r = NodeRecord(len(nodes), Role.ROUTER,
                           (cx + t.router_ring_m * math.cos(ang), cy + t.router_ring_m * math.sin(ang)),
                           a, parent=m.id, lowpan_channel=t.lowpan_channels[k % nch],
                           slot=j // 2, index=k)
            nodes.append(r)
            m.children.append(r.id)
            for i in range(t.devices_per_router):
                rad = t.device_radius_m * math.sqrt(rng.uniform(0.0, 1.0))
                th = rng.uniform(0.0, 2 * math.pi)
                d = NodeRecord(len(nodes), Role.DEVICE,
                               (r.pos[0] + rad * math.cos(th), r.pos[1] + rad * math.sin(th)),
                               a, parent=r.id, lowpan_channel=r.lowpan_channel, index=i)
                nodes.append(d)
                r.children.append(d.id)
    sink = NodeRecord(len(nodes), Role.SINK, (t.field_m / 2, t.field_m / 2), -1)
    nodes.append(sink)
    return Topology(nodes, sink.id)
