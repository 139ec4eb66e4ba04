"""Manhattan grid road network, buildings, routes and wall-cut counting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised for invalid scenario or run configuration."""


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def scale(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    def dist(self, other) -> float:
        return math.hypot(self.x - other[0], self.y - other[1])


@dataclass(frozen=True)
class Edge:
    index: int
    src: int
    dst: int
    start: Vec2
    end: Vec2
    length: float
    v_max: float
    horizontal: bool = field(init=False, repr=False, compare=False)
    heading: Vec2 = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "horizontal", self.start.y == self.end.y)
        object.__setattr__(
            self, "heading",
            Vec2((self.end.x - self.start.x) / self.length, (self.end.y - self.start.y) / self.length),
        )

    def point_at(self, offset: float) -> Vec2:
        k = offset / self.length
        return Vec2(self.start.x + (self.end.x - self.start.x) * k, self.start.y + (self.end.y - self.start.y) * k)


@dataclass(frozen=True)
class Building:
    min_corner: Vec2
    max_corner: Vec2

    def __post_init__(self):
        if not (self.min_corner.x < self.max_corner.x and self.min_corner.y < self.max_corner.y):
            raise ConfigurationError(f"degenerate building {self.min_corner}..{self.max_corner}")

    def contains(self, p) -> bool:
        """Strict interior test."""
        return self.min_corner.x < p[0] < self.max_corner.x and self.min_corner.y < p[1] < self.max_corner.y

    def walls(self) -> list[tuple[Vec2, Vec2]]:
        x0, y0 = self.min_corner
        x1, y1 = self.max_corner
        return [
            (Vec2(x0, y0), Vec2(x1, y0)),
            (Vec2(x1, y0), Vec2(x1, y1)),
            (Vec2(x1, y1), Vec2(x0, y1)),
            (Vec2(x0, y1), Vec2(x0, y0)),
        ]


@dataclass
class RoadNetwork:
    nodes: list[Vec2]
    edges: list[Edge]
    adjacency: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.adjacency:
            self.adjacency = [[] for _ in self.nodes]
            for e in self.edges:
                self.adjacency[e.src].append(e.index)
        self._by_pair = {(e.src, e.dst): e.index for e in self.edges}

    def reverse_of(self, edge_index: int) -> int:
        e = self.edges[edge_index]
        return self._by_pair[(e.dst, e.src)]

    def out_degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def is_strongly_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            n = stack.pop()
            for ei in self.adjacency[n]:
                d = self.edges[ei].dst
                if d not in seen:
                    seen.add(d)
                    stack.append(d)
        # every edge has a reverse, so forward reachability suffices
        return len(seen) == len(self.nodes)


@dataclass(frozen=True)
class Route:
    edges: Sequence[Edge]
    offset: float = 0.0

    def __post_init__(self):
        if self.edges and not (0.0 <= self.offset <= self.edges[0].length + 1e-9):
            raise ValueError(f"offset {self.offset} outside first edge")

    def remaining_length(self) -> float:
        return sum(e.length for e in self.edges) - self.offset


def build_manhattan_grid(
    blocks_x: int,
    blocks_y: int,
    block_size: float,
    building_margin: float,
    v_max: float = 13.89,
) -> tuple[RoadNetwork, list[Building]]:
    """Grid of roads on block boundaries with one inset building per block.

    Node ``j * (blocks_x + 1) + i`` sits at ``(i * block_size, j * block_size)``.
    """
    if blocks_x < 1 or blocks_y < 1:
        raise ConfigurationError("need at least one block in each direction")
    if not (building_margin > 0 and block_size > 2 * building_margin):
        raise ConfigurationError("block_size must exceed twice a positive building margin")
    if v_max <= 0:
        raise ConfigurationError("v_max must be positive")

    nx, ny = blocks_x + 1, blocks_y + 1
    nodes = [Vec2(i * block_size, j * block_size) for j in range(ny) for i in range(nx)]
    edges: list[Edge] = []

    def add(a: int, b: int) -> None:
        length = nodes[a].dist(nodes[b])
        edges.append(Edge(len(edges), a, b, nodes[a], nodes[b], length, v_max))

    for j in range(ny):
        for i in range(nx):
            n = j * nx + i
            if i + 1 < nx:
                add(n, n + 1)
                add(n + 1, n)
            if j + 1 < ny:
                add(n, n + nx)
                add(n + nx, n)

    buildings = [
        Building(
            Vec2(i * block_size + building_margin, j * block_size + building_margin),
            Vec2((i + 1) * block_size - building_margin, (j + 1) * block_size - building_margin),
        )
        for j in range(blocks_y)
        for i in range(blocks_x)
    ]
    return RoadNetwork(nodes, edges), buildings


def _orient(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _proper_cross(ax, ay, bx, by, px, py, qx, qy) -> bool:
    d1 = _orient(ax, ay, bx, by, px, py)
    d2 = _orient(ax, ay, bx, by, qx, qy)
    if d1 * d2 >= 0:
        return False
    d3 = _orient(px, py, qx, qy, ax, ay)
    d4 = _orient(px, py, qx, qy, bx, by)
    return d3 * d4 < 0


def building_cuts(a, b, building: Building) -> int:
    ax, ay = a
    bx, by = b
    x0, y0 = building.min_corner
    x1, y1 = building.max_corner
    # bounding-box rejection
    if max(ax, bx) <= x0 or min(ax, bx) >= x1 or max(ay, by) <= y0 or min(ay, by) >= y1:
        return 0
    n = 0
    for (px, py), (qx, qy) in building.walls():
        if _proper_cross(ax, ay, bx, by, px, py, qx, qy):
            n += 1
    return n


def count_wall_cuts(a, b, buildings: Sequence[Building]) -> int:
    """Number of building walls properly crossed by segment a-b.

    Touching a corner or running along a wall does not count.
    """
    return sum(building_cuts(a, b, bld) for bld in buildings)


class WallSet:
    """Vectorized wall-cut counting against a fixed building list."""

    def __init__(self, buildings: Sequence[Building]):
        walls = [w for bld in buildings for w in bld.walls()]
        if walls:
            arr = np.array([[p.x, p.y, q.x, q.y] for p, q in walls], dtype=float)
        else:
            arr = np.zeros((0, 4))
        self.px, self.py, self.qx, self.qy = (arr[:, k] for k in range(4))

    def __len__(self) -> int:
        return len(self.px)

    def cuts(self, a, points: np.ndarray) -> np.ndarray:
        """Cut counts between a single point ``a`` and each row of ``points`` (N x 2)."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(self) == 0:
            return np.zeros(len(points), dtype=np.int64)
        ax, ay = float(a[0]), float(a[1])
        bx = points[:, 0:1]
        by = points[:, 1:2]
        px, py, qx, qy = self.px, self.py, self.qx, self.qy
        d1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        d2 = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
        d3 = (qx - px) * (ay - py) - (qy - py) * (ax - px)
        d4 = (qx - px) * (by - py) - (qy - py) * (bx - px)
        hit = (d1 * d2 < 0) & (d3 * d4 < 0)
        return hit.sum(axis=1)


def route_advance(route: Route, distance: float) -> Vec2:
    """Position ``distance`` metres along the route from its start offset, clamped at the end."""
    if not route.edges:
        raise ValueError("empty route")
    if distance < 0:
        raise ValueError("distance must be non-negative")
    return advance_along(route.edges, route.offset, distance)


def advance_along(edges: Sequence[Edge], offset: float, distance: float) -> Vec2:
    s = offset + distance
    for e in edges:
        if s <= e.length:
            return e.point_at(s)
        s -= e.length
    return edges[-1].end
