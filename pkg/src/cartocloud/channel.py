"""Log-distance path loss with wall-cut shadowing, serving-site selection and link abstraction."""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .mobility import PredictorKind, VehicleState, predict_positions
from .topology import Building, ConfigurationError, Vec2, WallSet, count_wall_cuts

K_RSRP_DB = 27.78


class Interface(str, enum.Enum):
    LTE = "LTE"
    WIFI = "WIFI"


class SiteKind(str, enum.Enum):
    ENODEB = "eNodeB"
    RSU = "RSU"


SITE_FOR = {Interface.LTE: SiteKind.ENODEB, Interface.WIFI: SiteKind.RSU}


@dataclass(frozen=True)
class RadioSite:
    id: int
    kind: SiteKind
    position: Vec2
    tx_power_dbm: float
    frequency_hz: float

    def __post_init__(self):
        if not math.isfinite(self.tx_power_dbm):
            raise ConfigurationError("tx power must be finite")
        if self.frequency_hz <= 0:
            raise ConfigurationError("carrier frequency must be positive")


@dataclass(frozen=True)
class MetricRange:
    phi_min: float
    phi_max: float

    def __post_init__(self):
        if not self.phi_min < self.phi_max:
            raise ConfigurationError("phi_min must be below phi_max")

    def clamp(self, phi: float) -> float:
        return min(max(phi, self.phi_min), self.phi_max)


RSRP_RANGE = MetricRange(-140.0, -50.0)
RSSI_RANGE = MetricRange(-89.0, -50.0)


@dataclass(frozen=True)
class MetricSample:
    interface: Interface
    phi: float
    serving_site: Optional[int]
    timestamp: float = 0.0


@dataclass(frozen=True)
class LinkModel:
    sensitivity_dbm: float
    rate_table: tuple[tuple[float, float], ...]
    max_retries: int = 3

    def __post_init__(self):
        if not self.rate_table:
            raise ConfigurationError("rate table must not be empty")
        metrics = [m for m, _ in self.rate_table]
        rates = [r for _, r in self.rate_table]
        if any(b <= a for a, b in zip(metrics, metrics[1:])):
            raise ConfigurationError("rate breakpoints must be strictly increasing")
        if any(r < 0 for r in rates) or any(b < a for a, b in zip(rates, rates[1:])):
            raise ConfigurationError("rates must be non-negative and non-decreasing")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be non-negative")


DEFAULT_LINKS = {
    Interface.LTE: LinkModel(-120.0, ((-120.0, 1e6), (-100.0, 5e6), (-80.0, 15e6), (-50.0, 30e6))),
    Interface.WIFI: LinkModel(-89.0, ((-89.0, 3e6), (-70.0, 6e6), (-50.0, 12e6))),
}


def fspl_1m(frequency_hz: float) -> float:
    return 32.45 + 20.0 * math.log10(frequency_hz / 1e6) - 60.0


def path_loss(tx, rx, frequency_hz: float, exponent: float) -> float:
    d = max(math.hypot(tx[0] - rx[0], tx[1] - rx[1]), 0.1)
    return fspl_1m(frequency_hz) + 10.0 * exponent * math.log10(d)


def obstacle_attenuation(tx, rx, buildings: Sequence[Building], beta: float) -> float:
    return beta * count_wall_cuts(tx, rx, buildings)


def link_rate(metric: float, link: LinkModel) -> float:
    """Piecewise-linear rate in bit/s; zero below the sensitivity threshold."""
    if metric < link.sensitivity_dbm:
        return 0.0
    table = link.rate_table
    xs = [m for m, _ in table]
    if metric <= xs[0]:
        return table[0][1]
    if metric >= xs[-1]:
        return table[-1][1]
    i = bisect.bisect_right(xs, metric)
    (x0, r0), (x1, r1) = table[i - 1], table[i]
    return r0 + (r1 - r0) * (metric - x0) / (x1 - x0)


def chunk_success(metric: float, link: LinkModel) -> bool:
    return metric >= link.sensitivity_dbm


def delta_phi(current: MetricSample, mean_predicted: float) -> float:
    return mean_predicted - current.phi


@dataclass
class RadioEnvironment:
    """Sites, buildings and propagation constants for one scenario."""

    sites: list[RadioSite]
    buildings: list[Building]
    links: dict[Interface, LinkModel] = field(default_factory=lambda: dict(DEFAULT_LINKS))
    ranges: dict[Interface, MetricRange] = field(
        default_factory=lambda: {Interface.LTE: RSRP_RANGE, Interface.WIFI: RSSI_RANGE}
    )
    exponent: float = 2.75
    beta: float = 2.0
    k_rsrp: float = K_RSRP_DB
    noise: Optional[Callable[[Interface, float], float]] = None

    def __post_init__(self):
        self.walls = WallSet(self.buildings)
        self._by_kind = {k: [s for s in self.sites if s.kind is k] for k in SiteKind}

    def sites_for(self, interface: Interface) -> list[RadioSite]:
        sites = self._by_kind[SITE_FOR[interface]]
        if not sites:
            raise ConfigurationError(f"no {SITE_FOR[interface].value} site in scenario")
        return sites

    def has_sites(self, interface: Interface) -> bool:
        return bool(self._by_kind[SITE_FOR[interface]])

    def received_power(self, site: RadioSite, pos) -> float:
        return (
            site.tx_power_dbm
            - path_loss(site.position, pos, site.frequency_hz, self.exponent)
            - obstacle_attenuation(site.position, pos, self.buildings, self.beta)
        )

    def received_power_many(self, site: RadioSite, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        d = np.hypot(points[:, 0] - site.position.x, points[:, 1] - site.position.y)
        d = np.maximum(d, 0.1)
        pl = fspl_1m(site.frequency_hz) + 10.0 * self.exponent * np.log10(d)
        return site.tx_power_dbm - pl - self.beta * self.walls.cuts(site.position, points)

    def _metric_from_power(self, interface: Interface, power: float, attached: bool) -> float:
        rng = self.ranges[interface]
        if not attached:
            return rng.phi_min
        phi = power - self.k_rsrp if interface is Interface.LTE else power
        if self.noise is not None:
            phi = self.noise(interface, phi)
        return rng.clamp(phi)

    def measure(self, pos, interface: Interface, t: float = 0.0) -> MetricSample:
        sites = self.sites_for(interface)
        best, best_p = None, -math.inf
        for s in sites:
            p = self.received_power(s, pos)
            if p > best_p:
                best, best_p = s, p
        attached = interface is Interface.LTE or best_p >= self.links[interface].sensitivity_dbm
        phi = self._metric_from_power(interface, best_p, attached)
        return MetricSample(interface, phi, best.id if attached else None, t)

    def link_metric(self, pos, interface: Interface) -> float:
        """Unclamped metric of the strongest site, used for chunk delivery.

        The clamped decision metric cannot tell an unattached WIFI link apart from
        one sitting exactly at the sensitivity floor.
        """
        best_p = max(self.received_power(s, pos) for s in self.sites_for(interface))
        return best_p - self.k_rsrp if interface is Interface.LTE else best_p

    def metric_via(self, site_id: Optional[int], interface: Interface, points: np.ndarray) -> np.ndarray:
        """Metric at each point with the serving site held fixed (no handover)."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        rng = self.ranges[interface]
        if site_id is None:
            return np.full(len(points), rng.phi_min)
        site = self.site_by_id(site_id)
        power = self.received_power_many(site, points)
        if interface is Interface.LTE:
            phi = power - self.k_rsrp
        else:
            phi = np.where(power >= self.links[interface].sensitivity_dbm, power, rng.phi_min)
        return np.clip(phi, rng.phi_min, rng.phi_max)

    def measure_many(self, interface: Interface, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized ``measure``: metric and serving site id (-1 when unattached) per point."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        sites = self.sites_for(interface)
        powers = np.stack([self.received_power_many(s, points) for s in sites], axis=1)
        idx = np.argmax(powers, axis=1)
        best = powers[np.arange(len(points)), idx]
        ids = np.array([s.id for s in sites])[idx]
        rng = self.ranges[interface]
        if interface is Interface.LTE:
            phi = best - self.k_rsrp
        else:
            attached = best >= self.links[interface].sensitivity_dbm
            phi = np.where(attached, best, rng.phi_min)
            ids = np.where(attached, ids, -1)
        return np.clip(phi, rng.phi_min, rng.phi_max), ids

    def measure_batch(self, points, interface: Interface, t: float = 0.0) -> list[MetricSample]:
        """``measure`` for many positions at once."""
        phi, ids = self.measure_many(interface, points)
        return [
            MetricSample(interface, float(p), None if sid < 0 else int(sid), t)
            for p, sid in zip(phi.tolist(), ids.tolist())
        ]

    def link_metric_many(self, interface: Interface, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        powers = np.stack([self.received_power_many(s, points) for s in self.sites_for(interface)], axis=1)
        best = powers.max(axis=1)
        return best - self.k_rsrp if interface is Interface.LTE else best

    def site_by_id(self, site_id: int) -> RadioSite:
        for s in self.sites:
            if s.id == site_id:
                return s
        raise KeyError(site_id)


def measure_metric(pos, interface: Interface, env: RadioEnvironment, t: float = 0.0) -> MetricSample:
    return env.measure(pos, interface, t)


def horizon_times(tau: float, step: float) -> list[float]:
    if tau <= 0 or not (0 < step <= tau):
        raise ValueError("need tau > 0 and 0 < step <= tau")
    n = int(math.floor(tau / step + 1e-9))
    return [step * (k + 1) for k in range(n)]


def predict_metric_mean(
    vehicle: VehicleState,
    interface: Interface,
    kind: PredictorKind,
    tau: float,
    env: RadioEnvironment,
    current: MetricSample,
    step: float = 1.0,
) -> float:
    """Mean metric over predicted positions at t+step .. t+tau via the current serving site."""
    times = horizon_times(tau, step)
    if current.serving_site is None:
        return env.ranges[interface].phi_min
    pts = np.array(predict_positions(vehicle, kind, times))
    return float(np.mean(env.metric_via(current.serving_site, interface, pts)))
