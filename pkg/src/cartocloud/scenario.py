"""Scenario container, default Manhattan-grid scenario and its JSON form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .channel import (
    DEFAULT_LINKS,
    RSRP_RANGE,
    RSSI_RANGE,
    Interface,
    LinkModel,
    MetricRange,
    RadioEnvironment,
    RadioSite,
    SiteKind,
)
from .mobility import A_ACC, A_DEC, TrafficLight, default_lights
from .scheme import SchemeParams
from .topology import Building, ConfigurationError, Edge, RoadNetwork, Vec2, build_manhattan_grid

SCENARIO_VERSION = 1

LTE_FREQ_HZ = 1.8e9
WIFI_FREQ_HZ = 5.89e9
ENB_TX_DBM = 33.0
RSU_TX_DBM = 20.0

# site positions as fractions of the playground extent
ENB_LAYOUT = [(0.25, 0.75), (0.75, 0.75), (0.5, 0.25)]
RSU_LAYOUT = [
    (0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75),
    (0.5, 0.0), (0.0, 0.5), (1.0, 0.5), (0.5, 1.0),
]

# run defaults carried in every scenario file; command-line flags override them
RUN_DEFAULTS: dict[str, Any] = {
    "vehicles": 150,
    "penetration": 0.10,
    "duration": 600.0,
    "packet_size": 10_000,
    **asdict(SchemeParams()),
}


@dataclass
class Scenario:
    network: RoadNetwork
    buildings: list[Building]
    sites: list[RadioSite]
    links: dict[Interface, LinkModel] = field(default_factory=lambda: dict(DEFAULT_LINKS))
    ranges: dict[Interface, MetricRange] = field(
        default_factory=lambda: {Interface.LTE: RSRP_RANGE, Interface.WIFI: RSSI_RANGE}
    )
    exponent: float = 2.75
    beta: float = 2.0
    k_rsrp: float = 27.78
    light_green: float = 30.0
    light_red: float = 30.0
    a_acc: float = A_ACC
    a_dec: float = A_DEC
    grid: dict[str, Any] = field(default_factory=dict)
    defaults: dict[str, Any] = field(default_factory=lambda: dict(RUN_DEFAULTS))

    def environment(self) -> RadioEnvironment:
        return RadioEnvironment(
            self.sites, self.buildings, dict(self.links), dict(self.ranges),
            exponent=self.exponent, beta=self.beta, k_rsrp=self.k_rsrp,
        )

    def lights(self) -> dict[int, TrafficLight]:
        return default_lights(self.network, self.light_green, self.light_red)

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": SCENARIO_VERSION,
            "grid": self.grid,
            "nodes": [[n.x, n.y] for n in self.network.nodes],
            "edges": [[e.src, e.dst, e.length, e.v_max] for e in self.network.edges],
            "buildings": [[b.min_corner.x, b.min_corner.y, b.max_corner.x, b.max_corner.y] for b in self.buildings],
            "sites": [
                {
                    "id": s.id,
                    "kind": s.kind.value,
                    "x": s.position.x,
                    "y": s.position.y,
                    "tx_power_dbm": s.tx_power_dbm,
                    "frequency_hz": s.frequency_hz,
                }
                for s in self.sites
            ],
            "links": {
                i.value: {
                    "sensitivity_dbm": lm.sensitivity_dbm,
                    "rate_table": [list(bp) for bp in lm.rate_table],
                    "max_retries": lm.max_retries,
                }
                for i, lm in self.links.items()
            },
            "ranges": {i.value: [r.phi_min, r.phi_max] for i, r in self.ranges.items()},
            "propagation": {"exponent": self.exponent, "beta": self.beta, "k_rsrp": self.k_rsrp},
            "lights": {"green": self.light_green, "red": self.light_red},
            "kinematics": {"a_acc": self.a_acc, "a_dec": self.a_dec},
            "defaults": self.defaults,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Scenario":
        try:
            if doc.get("version") != SCENARIO_VERSION:
                raise ConfigurationError(f"unsupported scenario version {doc.get('version')!r}")
            nodes = [Vec2(float(x), float(y)) for x, y in doc["nodes"]]
            edges = [
                Edge(i, int(s), int(d), nodes[int(s)], nodes[int(d)], float(length), float(vmax))
                for i, (s, d, length, vmax) in enumerate(doc["edges"])
            ]
            buildings = [Building(Vec2(x0, y0), Vec2(x1, y1)) for x0, y0, x1, y1 in doc["buildings"]]
            sites = [
                RadioSite(int(s["id"]), SiteKind(s["kind"]), Vec2(float(s["x"]), float(s["y"])),
                          float(s["tx_power_dbm"]), float(s["frequency_hz"]))
                for s in doc["sites"]
            ]
            links = {
                Interface(k): LinkModel(float(v["sensitivity_dbm"]),
                                        tuple((float(m), float(r)) for m, r in v["rate_table"]),
                                        int(v["max_retries"]))
                for k, v in doc["links"].items()
            }
            ranges = {Interface(k): MetricRange(float(lo), float(hi)) for k, (lo, hi) in doc["ranges"].items()}
            prop = doc["propagation"]
            return cls(
                RoadNetwork(nodes, edges), buildings, sites, links, ranges,
                exponent=float(prop["exponent"]), beta=float(prop["beta"]), k_rsrp=float(prop["k_rsrp"]),
                light_green=float(doc["lights"]["green"]), light_red=float(doc["lights"]["red"]),
                a_acc=float(doc["kinematics"]["a_acc"]), a_dec=float(doc["kinematics"]["a_dec"]),
                grid=dict(doc.get("grid", {})),
                defaults={**RUN_DEFAULTS, **doc.get("defaults", {})},
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"malformed scenario: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_scenario(
    blocks: int = 4,
    block_size: float = 250.0,
    building_margin: float = 15.0,
    enodebs: int = 3,
    rsus: int = 8,
    v_max: float = 13.89,
) -> Scenario:
    """Manhattan grid with eNodeBs and RSUs placed on intersections."""
    if enodebs > len(ENB_LAYOUT) or rsus > len(RSU_LAYOUT):
        raise ConfigurationError(f"at most {len(ENB_LAYOUT)} eNodeBs and {len(RSU_LAYOUT)} RSUs in the default layout")
    if enodebs < 0 or rsus < 0:
        raise ConfigurationError("site counts must be non-negative")
    network, buildings = build_manhattan_grid(blocks, blocks, block_size, building_margin, v_max)
    extent = blocks * block_size

    def snap(f: float) -> float:
        # nearest grid line so sites sit on roads
        return round(f * blocks) * block_size

    sites: list[RadioSite] = []
    for fx, fy in ENB_LAYOUT[:enodebs]:
        sites.append(RadioSite(len(sites), SiteKind.ENODEB, Vec2(snap(fx), snap(fy)), ENB_TX_DBM, LTE_FREQ_HZ))
    for fx, fy in RSU_LAYOUT[:rsus]:
        sites.append(RadioSite(len(sites), SiteKind.RSU, Vec2(snap(fx), snap(fy)), RSU_TX_DBM, WIFI_FREQ_HZ))
    grid = {"blocks_x": blocks, "blocks_y": blocks, "block_size": block_size,
            "building_margin": building_margin, "extent": extent}
    return Scenario(network, buildings, sites, grid=grid)
