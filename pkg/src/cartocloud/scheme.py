"""Buffering and the probabilistic transmission decision (CAT, pCAT, periodic, multi-interface)."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .channel import Interface, MetricRange, MetricSample
from .topology import ConfigurationError


class SchemeKind(str, enum.Enum):
    PERIODIC = "periodic"
    CAT = "cat"
    PCAT = "pcat"


@dataclass(frozen=True)
class SchemeParams:
    alpha: float = 8.0
    gamma1: float = 3.0
    gamma2: float = 0.5
    t_min: float = 10.0
    t_max: float = 60.0
    delta_t: float = 15.0
    tau: float = 10.0

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max):
            raise ConfigurationError("need 0 < t_min < t_max")
        if self.alpha <= 0 or self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ConfigurationError("alpha, gamma1 and gamma2 must be positive")
        if self.delta_t <= 0 or self.tau <= 0:
            raise ConfigurationError("delta_t and tau must be positive")


@dataclass(frozen=True)
class SensorPacket:
    id: int
    generated: float
    size: int = 10_000

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("packet size must be positive")


@dataclass
class TransmitBuffer:
    packets: deque = field(default_factory=deque)
    last_tx: float = 0.0

    def push(self, packet: SensorPacket) -> None:
        if self.packets and packet.generated < self.packets[-1].generated:
            raise ValueError("packets must arrive in generation order")
        self.packets.append(packet)

    def flush(self, now: float) -> list[SensorPacket]:
        out = list(self.packets)
        self.packets.clear()
        self.last_tx = now
        return out

    def __len__(self) -> int:
        return len(self.packets)


@dataclass(frozen=True)
class InterfaceContext:
    sample: MetricSample
    range: MetricRange
    delta_phi: float = 0.0
    available: bool = True

    @property
    def theta(self) -> float:
        return normalize_metric(self.sample.phi, self.range)


@dataclass(frozen=True)
class DecisionContext:
    interfaces: Sequence[InterfaceContext]
    elapsed: float

    def __post_init__(self):
        if self.elapsed < 0:
            raise ValueError("elapsed must be non-negative")


def normalize_metric(phi: float, rng: MetricRange) -> float:
    theta = (phi - rng.phi_min) / (rng.phi_max - rng.phi_min)
    return min(max(theta, 0.0), 1.0)


def cat_probability(theta: float, elapsed: float, params: SchemeParams) -> float:
    if elapsed <= params.t_min:
        return 0.0
    if elapsed >= params.t_max:
        return 1.0
    return theta ** params.alpha


def pcat_probability(theta: float, delta_phi: float, elapsed: float, params: SchemeParams) -> float:
    if elapsed <= params.t_min:
        return 0.0
    if elapsed >= params.t_max:
        return 1.0
    if delta_phi >= 0:
        z1 = max(delta_phi * (1.0 - theta) * params.gamma1, 1.0)
        return theta ** (params.alpha * z1)
    z2 = max(abs(delta_phi * theta * params.gamma2), 1.0)
    return theta ** (params.alpha / z2)


def multi_interface_probability(probs: Iterable[tuple[Interface, float]]) -> tuple[float, Interface]:
    """Maximum probability and its interface; ties go to WIFI."""
    best_p, best_if = None, None
    for iface, p in probs:
        if (
            best_p is None
            or p > best_p
            or (p == best_p and iface is Interface.WIFI)
        ):
            best_p, best_if = p, iface
    if best_p is None:
        raise ValueError("no interfaces to choose from")
    return best_p, best_if


def periodic_due(elapsed: float, params: SchemeParams) -> bool:
    return elapsed >= params.delta_t


def interface_probability(ctx: InterfaceContext, elapsed: float, scheme: SchemeKind, params: SchemeParams) -> float:
    theta = normalize_metric(ctx.sample.phi, ctx.range)
    if scheme is SchemeKind.CAT:
        return cat_probability(theta, elapsed, params)
    if scheme is SchemeKind.PCAT:
        return pcat_probability(theta, ctx.delta_phi, elapsed, params)
    raise ValueError(f"no probability for scheme {scheme}")


def decide(
    context: DecisionContext,
    scheme: SchemeKind,
    params: SchemeParams,
    draw: float,
) -> tuple[bool, Interface, float]:
    """Return (transmit, interface, p_MI).

    Interfaces flagged unavailable (no serving site) cannot carry a transmission;
    with none available the vehicle keeps buffering. Equal probabilities, as at
    t_max, go to the interface with the better normalized metric, then to WIFI.
    The periodic baseline ignores the draw and picks the best normalized metric.
    """
    if not 0.0 <= draw < 1.0:
        raise ValueError("draw must lie in [0, 1)")
    usable = [c for c in context.interfaces if c.available]
    if not usable:
        return False, context.interfaces[0].sample.interface, 0.0
    if scheme is SchemeKind.PERIODIC:
        _, iface = multi_interface_probability((c.sample.interface, c.theta) for c in usable)
        due = periodic_due(context.elapsed, params)
        return due, iface, 1.0 if due else 0.0
    probs = [(c, interface_probability(c, context.elapsed, scheme, params)) for c in usable]
    p, iface = multi_interface_probability((c.sample.interface, pc) for c, pc in probs)
    tied = [c for c, pc in probs if pc == p]
    if len(tied) > 1:
        _, iface = multi_interface_probability((c.sample.interface, c.theta) for c in tied)
    return draw < p, iface, p
