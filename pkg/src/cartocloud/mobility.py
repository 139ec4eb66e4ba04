"""Grid random-walk mobility with traffic lights, and position predictors."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field

from .topology import Edge, RoadNetwork, Route, Vec2, advance_along

A_ACC = 2.0
A_DEC = 3.0


class PredictorKind(str, enum.Enum):
    EXTRAPOLATION = "extrapolation"
    TRAJECTORY_VEL = "trajectory_vel"
    TRAJECTORY_ACC = "trajectory_acc"


@dataclass(frozen=True)
class TrafficLight:
    node: int
    green: float = 30.0
    red: float = 30.0
    phase: float = 0.0

    def __post_init__(self):
        if self.green <= 0 or self.red <= 0:
            raise ValueError("light durations must be positive")

    def is_green(self, horizontal: bool, t: float) -> bool:
        # east-west traffic sees green during the first part of the cycle
        ew_green = (t + self.phase) % (self.green + self.red) < self.green
        return ew_green if horizontal else not ew_green


def default_lights(network: RoadNetwork, green: float = 30.0, red: float = 30.0) -> dict[int, TrafficLight]:
    """One light per intersection (out-degree >= 3), phase derived from the node index."""
    cycle = green + red
    return {
        n: TrafficLight(n, green, red, phase=(n * 13.0) % cycle)
        for n in range(len(network.nodes))
        if network.out_degree(n) >= 3
    }


@dataclass
class VehicleState:
    id: int
    equipped: bool
    route: list[Edge]
    offset: float
    speed: float
    accel: float
    route_rng: random.Random
    network: RoadNetwork = field(repr=False)

    @property
    def edge(self) -> Edge:
        return self.route[0]

    @property
    def position(self) -> Vec2:
        return self.route[0].point_at(self.offset)

    @property
    def heading(self) -> Vec2:
        return self.route[0].heading

    def extend_route(self, lookahead: float) -> None:
        """Draw further random-walk edges until ``lookahead`` metres of route lie ahead."""
        ahead = self.route[0].length - self.offset + sum(e.length for e in self.route[1:])
        while ahead < lookahead:
            nxt = next_edge(self.network, self.route[-1], self.route_rng)
            self.route.append(nxt)
            ahead += nxt.length

    def as_route(self, lookahead: float = 0.0) -> Route:
        if lookahead > 0:
            self.extend_route(lookahead)
        return Route(tuple(self.route), self.offset)


def next_edge(network: RoadNetwork, current: Edge, rng: random.Random) -> Edge:
    """Uniform choice among outgoing edges at the end node, U-turn only at dead ends."""
    out = network.adjacency[current.dst]
    back = network.reverse_of(current.index)
    choices = [ei for ei in out if ei != back] or [back]
    return network.edges[choices[rng.randrange(len(choices))]]


def _travel(v: float, a: float, v_max: float, dt: float) -> tuple[float, float]:
    """Exact distance and final speed under constant ``a`` with speed clamped to [0, v_max]."""
    if a > 0 and v + a * dt > v_max:
        t1 = (v_max - v) / a
        return v * t1 + 0.5 * a * t1 * t1 + v_max * (dt - t1), v_max
    if a < 0 and v + a * dt < 0:
        t1 = -v / a
        return v * t1 + 0.5 * a * t1 * t1, 0.0
    return v * dt + 0.5 * a * dt * dt, v + a * dt


def step_vehicle(
    state: VehicleState,
    network: RoadNetwork,
    lights: dict[int, TrafficLight],
    dt: float,
    t: float = 0.0,
    a_acc: float = A_ACC,
    a_dec: float = A_DEC,
) -> VehicleState:
    """Advance one vehicle by ``dt`` seconds starting at simulation time ``t`` (mutates and returns state).

    ``state.accel`` is used as-is for this step; the controller then chooses the
    acceleration for the next step, so the stored value is what a predictor sees.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    route = state.route
    edge = route[0]
    ds, v_new = _travel(state.speed, state.accel, edge.v_max, dt)
    s = state.offset + ds
    while s > edge.length:
        s -= edge.length
        if len(route) < 2:
            state.extend_route(edge.length + 1.0)
        route.pop(0)
        edge = route[0]
    state.offset = s
    v = v_new if v_new < edge.v_max else edge.v_max
    state.speed = v if v > 0.0 else 0.0
    state.accel = _control(edge, s, state.speed, lights.get(edge.dst), t + dt, a_acc, a_dec)
    return state


def _control(edge: Edge, offset: float, v: float, light, t: float, a_acc: float, a_dec: float) -> float:
    """Acceleration for the next step: cruise toward v_max, brake for a red light ahead."""
    if light is not None and not light.is_green(edge.horizontal, t):
        remaining = edge.length - offset
        if remaining <= 1e-6:
            return 0.0 if v == 0.0 else -a_dec * 4
        need = v * v / (2.0 * remaining)
        # start braking once the needed deceleration nears the comfortable one
        if need >= a_dec * 0.8:
            if need <= 2.0 * a_dec:
                return -need
            # too close to stop: clear the intersection
    return a_acc if v < edge.v_max else 0.0


def s_max_extrapolation(v: float, tau: float) -> float:
    if v < 0 or tau < 0:
        raise ValueError("speed and horizon must be non-negative")
    return v * tau


def s_max_accel(v: float, a: float, v_max: float, tau: float) -> float:
    """Travel distance accelerating at ``a`` until ``v_max``, then cruising."""
    if v > v_max + 1e-9:
        raise ValueError(f"speed {v} exceeds v_max {v_max}")
    if tau < 0:
        raise ValueError("horizon must be non-negative")
    if a <= 0:
        return v * tau
    t_a = (v_max - v) / a
    ta = min(t_a, tau)
    return v * ta + 0.5 * a * ta * ta + v_max * max(tau - t_a, 0.0)


def predicted_distance(state: VehicleState, kind: PredictorKind, tau: float) -> float:
    if kind is PredictorKind.TRAJECTORY_ACC:
        return s_max_accel(state.speed, state.accel, state.edge.v_max, tau)
    return s_max_extrapolation(state.speed, tau)


def predict_position(state: VehicleState, kind: PredictorKind, tau: float) -> Vec2:
    if tau < 0:
        raise ValueError("horizon must be non-negative")
    dist = predicted_distance(state, kind, tau)
    if kind is PredictorKind.EXTRAPOLATION:
        p = state.position
        h = state.heading
        return Vec2(p.x + h.x * dist, p.y + h.y * dist)
    state.extend_route(dist + 1.0)
    return advance_along(state.route, state.offset, dist)


def predict_positions(state: VehicleState, kind: PredictorKind, horizons: list[float]) -> list[Vec2]:
    """Batch of predict_position calls sharing one route extension."""
    dists = [predicted_distance(state, kind, h) for h in horizons]
    if kind is PredictorKind.EXTRAPOLATION:
        p = state.position
        h = state.heading
        return [Vec2(p.x + h.x * d, p.y + h.y * d) for d in dists]
    state.extend_route(max(dists, default=0.0) + 1.0)
    return [advance_along(state.route, state.offset, d) for d in dists]


def position_error(predicted, actual) -> float:
    return math.hypot(predicted[0] - actual[0], predicted[1] - actual[1])
