"""Discrete-time simulation loop, chunked transmission execution and run statistics."""

from __future__ import annotations

import enum
import math
import random
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .channel import (
    Interface,
    LinkModel,
    MetricSample,
    RadioEnvironment,
    chunk_success,
    delta_phi,
    link_rate,
    predict_metric_mean,
)
from .mobility import PredictorKind, VehicleState, predict_positions, step_vehicle
from .scenario import Scenario
from .scheme import (
    DecisionContext,
    InterfaceContext,
    SchemeKind,
    SchemeParams,
    SensorPacket,
    TransmitBuffer,
    decide,
    normalize_metric,
)
from .topology import ConfigurationError

PREDICTORS = tuple(PredictorKind)


class InterfaceMode(str, enum.Enum):
    LTE = "lte"
    WIFI = "wifi"
    MULTI = "multi"

    @property
    def interfaces(self) -> tuple[Interface, ...]:
        if self is InterfaceMode.LTE:
            return (Interface.LTE,)
        if self is InterfaceMode.WIFI:
            return (Interface.WIFI,)
        return (Interface.LTE, Interface.WIFI)


@dataclass
class SimConfig:
    scenario: Scenario
    vehicles: int = 150
    penetration: float = 0.10
    duration: float = 600.0
    mobility_tick: float = 0.1
    decision_tick: float = 1.0
    scheme: SchemeKind = SchemeKind.PCAT
    mode: InterfaceMode = InterfaceMode.MULTI
    predictor: PredictorKind = PredictorKind.TRAJECTORY_ACC
    params: SchemeParams = field(default_factory=SchemeParams)
    seed: int = 1
    packet_size: int = 10_000
    metric_step: float = 1.0
    retry_interval: float = 0.01
    warmup: Optional[float] = None
    prediction_stats: bool = False
    prediction_taus: tuple[float, ...] = (10.0, 30.0, 60.0)
    prediction_every: float = 5.0
    record_events: bool = False
    record_trajectories: bool = False

    def validate(self) -> None:
        if self.duration <= 0:
            raise ConfigurationError("duration must be positive")
        if self.mobility_tick <= 0 or self.decision_tick <= 0:
            raise ConfigurationError("ticks must be positive")
        ratio = self.decision_tick / self.mobility_tick
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError("decision tick must be a multiple of the mobility tick")
        if not 0.0 <= self.penetration <= 1.0:
            raise ConfigurationError("penetration rate must lie in [0, 1]")
        if self.vehicles < 0:
            raise ConfigurationError("vehicle count must be non-negative")
        if self.packet_size <= 0:
            raise ConfigurationError("packet size must be positive")
        if not 0 < self.metric_step <= self.params.tau:
            raise ConfigurationError("metric step must lie in (0, tau]")
        if self.prediction_stats and any(t <= 0 or abs(t - round(t)) > 1e-9 for t in self.prediction_taus):
            raise ConfigurationError("prediction horizons must be positive whole seconds")
        for iface in self.mode.interfaces:
            if iface not in self.scenario.links:
                raise ConfigurationError(f"no link model for {iface.value}")
        if not self.scenario.network.edges:
            raise ConfigurationError("scenario has no roads")

    @property
    def warmup_time(self) -> float:
        return self.params.t_max if self.warmup is None else self.warmup

    def describe(self) -> dict:
        return {
            "vehicles": self.vehicles,
            "penetration": self.penetration,
            "duration": self.duration,
            "mobility_tick": self.mobility_tick,
            "decision_tick": self.decision_tick,
            "scheme": self.scheme.value,
            "mode": self.mode.value,
            "predictor": self.predictor.value,
            "params": asdict(self.params),
            "seed": self.seed,
            "packet_size": self.packet_size,
            "metric_step": self.metric_step,
            "retry_interval": self.retry_interval,
            "warmup": self.warmup_time,
        }


@dataclass
class TransmissionRecord:
    vehicle: int
    interface: Interface
    start: float
    payload_bytes: int
    attempted: int = 0
    succeeded: int = 0
    dropped: int = 0
    retries: int = 0
    delivered_bytes: int = 0
    completion: Optional[float] = None
    theta: float = float("nan")
    probability: float = float("nan")
    elapsed: float = float("nan")


class Transmission:
    """A buffer flush in flight: one chunk per sensor packet, retried on failure."""

    def __init__(self, record: TransmissionRecord, packets: Sequence[SensorPacket], link: LinkModel,
                 retry_interval: float = 0.01):
        self.record = record
        self.link = link
        self.retry_interval = retry_interval
        self.pending: deque[SensorPacket] = deque(packets)
        self.next_time = record.start
        self.delivered: list[tuple[SensorPacket, float]] = []
        self.lost: list[SensorPacket] = []
        self._tries = 0

    @property
    def done(self) -> bool:
        return not self.pending

    def attempt(self, metric: float) -> None:
        """Send the head chunk at ``self.next_time`` under channel ``metric``."""
        pkt = self.pending[0]
        rec = self.record
        rec.attempted += 1
        rate = link_rate(metric, self.link)
        if chunk_success(metric, self.link) and rate > 0:
            self.next_time += pkt.size * 8 / rate
            self.pending.popleft()
            self.delivered.append((pkt, self.next_time))
            rec.succeeded += 1
            rec.delivered_bytes += pkt.size
            self._tries = 0
        else:
            self.next_time += self.retry_interval
            if self._tries < self.link.max_retries:
                self._tries += 1
                rec.retries += 1
            else:
                self.pending.popleft()
                self.lost.append(pkt)
                rec.dropped += 1
                self._tries = 0
        if not self.pending:
            rec.completion = self.next_time

    def advance(self, until: float, metric: float) -> None:
        while self.pending and self.next_time < until:
            self.attempt(metric)


def execute_transmission(
    packets: Sequence[SensorPacket],
    interface: Interface,
    link: LinkModel,
    metric_at: Callable[[float], float],
    start: float = 0.0,
    vehicle: int = 0,
    retry_interval: float = 0.01,
) -> tuple[TransmissionRecord, list[tuple[SensorPacket, float]], list[SensorPacket]]:
    """Send ``packets`` chunk by chunk, re-measuring ``metric_at(t)`` at each chunk start.

    Returns the record, the (packet, delivery time) pairs and the dropped packets.
    """
    if not packets:
        raise ValueError("nothing to transmit")
    rec = TransmissionRecord(vehicle, interface, start, sum(p.size for p in packets))
    tx = Transmission(rec, packets, link, retry_interval)
    while not tx.done:
        tx.attempt(metric_at(tx.next_time))
    return rec, tx.delivered, tx.lost


def _summary(values) -> dict:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return {"n": 0, "mean": None, "median": None, "p95": None}
    return {
        "n": int(arr.size),
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
        "p95": float(np.percentile(arr, 95)),
    }


@dataclass
class RunStatistics:
    goodput: float
    goodput_per_vehicle: dict[int, float]
    data_rate: float
    mean_age: Optional[float]
    ages: list[float]
    pdr: float
    generated: int
    delivered: int
    dropped: int
    buffered_end: int
    window_generated: int
    window_delivered: int
    window_dropped: int
    interface_share: dict[str, float]
    transmissions: int
    mean_theta_at_tx: Optional[float]
    position_error: dict[str, dict[str, dict]] = field(default_factory=dict)
    metric_error: dict[str, dict[str, dict[str, dict]]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["goodput_per_vehicle"] = {str(k): v for k, v in sorted(self.goodput_per_vehicle.items())}
        return d

    @property
    def mean_position_error(self) -> Optional[float]:
        vals = [e["mean"] for by_tau in self.position_error.values() for e in by_tau.values() if e["n"]]
        return float(np.mean(vals)) if vals else None

    @property
    def mean_metric_error(self) -> Optional[float]:
        vals = [
            e["mean"]
            for by_kind in self.metric_error.values()
            for by_tau in by_kind.values()
            for e in by_tau.values()
            if e["n"]
        ]
        return float(np.mean(vals)) if vals else None


def collect_statistics(
    records: Sequence[TransmissionRecord],
    delivered: Sequence[tuple[SensorPacket, float, int, Interface]],
    dropped: Sequence[tuple[SensorPacket, int]],
    buffered: Sequence[tuple[SensorPacket, int]],
    vehicles: Sequence[int],
    duration: float,
    warmup: float = 0.0,
) -> RunStatistics:
    """Aggregate per-packet and per-transmission outcomes.

    ``delivered`` holds (packet, delivery time, vehicle, interface); only packets
    generated at or after ``warmup`` enter PDR and data age, and goodput counts
    bits delivered inside the [warmup, duration] window.
    """
    window = duration - warmup
    if window <= 0:
        raise ConfigurationError("warm-up must be shorter than the run")
    bits = {v: 0.0 for v in vehicles}
    share = {i.value: 0.0 for i in Interface}
    ages = []
    w_delivered = 0
    for pkt, t_done, veh, iface in delivered:
        if t_done >= warmup and t_done <= duration:
            bits[veh] += pkt.size * 8
            share[iface.value] += pkt.size
        if pkt.generated >= warmup:
            w_delivered += 1
            ages.append(t_done - pkt.generated)
    w_dropped = sum(1 for pkt, _ in dropped if pkt.generated >= warmup)
    w_buffered = sum(1 for pkt, _ in buffered if pkt.generated >= warmup)
    total_share = sum(share.values())
    share = {k: (v / total_share if total_share else 0.0) for k, v in share.items()}
    per_vehicle = {v: b / window for v, b in bits.items()}
    goodput = float(np.mean(list(per_vehicle.values()))) if per_vehicle else 0.0

    win_recs = [r for r in records if r.start >= warmup and r.completion is not None]
    tx_bits = sum(r.delivered_bytes * 8 for r in win_recs)
    tx_time = sum(r.completion - r.start for r in win_recs)
    thetas = [r.theta for r in win_recs if not math.isnan(r.theta)]
    denom = w_delivered + w_dropped
    return RunStatistics(
        goodput=goodput,
        goodput_per_vehicle=per_vehicle,
        data_rate=tx_bits / tx_time if tx_time > 0 else 0.0,
        mean_age=float(np.mean(ages)) if ages else None,
        ages=ages,
        pdr=w_delivered / denom if denom else 0.0,
        generated=len(delivered) + len(dropped) + len(buffered),
        delivered=len(delivered),
        dropped=len(dropped),
        buffered_end=len(buffered),
        window_generated=w_delivered + w_dropped + w_buffered,
        window_delivered=w_delivered,
        window_dropped=w_dropped,
        interface_share=share,
        transmissions=len(win_recs),
        mean_theta_at_tx=float(np.mean(thetas)) if thetas else None,
    )


@dataclass
class RunResult:
    config: SimConfig
    stats: RunStatistics
    equipped: list[int]
    records: list[TransmissionRecord]
    events: list[dict]
    trajectories: list[tuple]
    prediction_rows: list[tuple]

    def summary(self) -> dict:
        return {
            "config": self.config.describe(),
            "scenario": self.config.scenario.grid,
            "equipped": self.equipped,
            "statistics": self.stats.to_dict(),
        }


class _PredictionLog:
    """Predicted positions sampled during the run, scored against the realized trace at the end."""

    def __init__(self, taus: Sequence[float]):
        self.taus = [int(round(t)) for t in taus]
        self.horizon = max(self.taus)
        self.times = [float(k) for k in range(1, self.horizon + 1)]
        self.meta: list[tuple[int, int, Optional[int], Optional[int]]] = []
        self.points: dict[PredictorKind, list] = {k: [] for k in PREDICTORS}

    def sample(self, vidx: int, tidx: int, vehicle: VehicleState, serving: dict[Interface, Optional[int]]) -> None:
        self.meta.append((vidx, tidx, serving.get(Interface.LTE), serving.get(Interface.WIFI)))
        for kind in PREDICTORS:
            self.points[kind].append(predict_positions(vehicle, kind, self.times))

    def score(self, env: RadioEnvironment, traces: np.ndarray, interfaces: Sequence[Interface]):
        """Return (position errors, metric errors, csv rows)."""
        pos_err = {k.value: {str(t): [] for t in self.taus} for k in PREDICTORS}
        met_err = {i.value: {k.value: {str(t): [] for t in self.taus} for k in PREDICTORS} for i in interfaces}
        rows: list[tuple] = []
        if not self.meta:
            return pos_err, met_err, rows
        meta = np.array([(v, t) for v, t, _, _ in self.meta], dtype=np.int64)
        n_t = traces.shape[1]
        realized = {}
        flat = traces.reshape(-1, 2)
        for iface in interfaces:
            if env.has_sites(iface):
                phi, _ = env.measure_many(iface, flat)
            else:
                phi = np.full(len(flat), env.ranges[iface].phi_min)
            phi = phi.reshape(traces.shape[0], n_t)
            csum = np.concatenate([np.zeros((phi.shape[0], 1)), np.cumsum(phi, axis=1)], axis=1)
            realized[iface] = csum
        for kind in PREDICTORS:
            pts = np.array(self.points[kind], dtype=float)  # (n, H, 2)
            predicted_mean = {}
            for iface in interfaces:
                col = 2 if iface is Interface.LTE else 3
                phi = np.empty(pts.shape[:2])
                sites = [m[col] for m in self.meta]
                for sid in sorted(set(sites), key=lambda s: -1 if s is None else s):
                    mask = np.array([s == sid for s in sites])
                    sub = pts[mask].reshape(-1, 2)
                    phi[mask] = env.metric_via(sid, iface, sub).reshape(-1, pts.shape[1])
                predicted_mean[iface] = np.cumsum(phi, axis=1)
            for tau in self.taus:
                valid = meta[:, 1] + tau < n_t
                if not valid.any():
                    continue
                vi, ti = meta[valid, 0], meta[valid, 1]
                actual = traces[vi, ti + tau]
                err = np.hypot(*(pts[valid, tau - 1] - actual).T)
                pos_err[kind.value][str(tau)] = err.tolist()
                for j, (v, t) in enumerate(zip(vi, ti)):
                    rows.append(("position", kind.value, tau, int(v), int(t), float(err[j])))
                for iface in interfaces:
                    pm = predicted_mean[iface][valid, tau - 1] / tau
                    csum = realized[iface]
                    rm = (csum[vi, ti + tau + 1] - csum[vi, ti + 1]) / tau
                    e = np.abs(pm - rm)
                    met_err[iface.value][kind.value][str(tau)] = e.tolist()
                    for j, (v, t) in enumerate(zip(vi, ti)):
                        rows.append((f"metric_{iface.value}", kind.value, tau, int(v), int(t), float(e[j])))
        return pos_err, met_err, rows


def _spawn_vehicle(vid: int, equipped: bool, scenario: Scenario, seed: int, place: random.Random) -> VehicleState:
    net = scenario.network
    edge = net.edges[place.randrange(len(net.edges))]
    offset = place.random() * edge.length
    speed = place.random() * edge.v_max
    v = VehicleState(
        id=vid,
        equipped=equipped,
        route=[edge],
        offset=offset,
        speed=speed,
        accel=0.0,
        route_rng=random.Random(f"{seed}:route:{vid}"),
        network=net,
    )
    v.extend_route(edge.v_max * 2.0)
    return v


def _measure_or_floor(env: RadioEnvironment, positions, iface: Interface, t: float) -> list[MetricSample]:
    if env.has_sites(iface):
        return env.measure_batch(positions, iface, t)
    return [MetricSample(iface, env.ranges[iface].phi_min, None, t)] * len(positions)


def run(config: SimConfig) -> RunResult:
    """Run one seeded simulation and return its statistics and logs."""
    config.validate()
    scenario = config.scenario
    env = scenario.environment()
    # an interface without sites stays at its floor and never carries data
    if not any(env.has_sites(i) for i in config.mode.interfaces):
        env.sites_for(config.mode.interfaces[0])  # raises the configuration error
    lights = scenario.lights()
    params = config.params
    warmup = config.warmup_time
    if warmup >= config.duration:
        raise ConfigurationError("warm-up must be shorter than the run")

    place = random.Random(f"{config.seed}:placement")
    n_eq = int(round(config.penetration * config.vehicles))
    equipped_ids = sorted(place.sample(range(config.vehicles), n_eq))
    eq_set = set(equipped_ids)
    vehicles = [_spawn_vehicle(i, i in eq_set, scenario, config.seed, place) for i in range(config.vehicles)]
    equipped = [vehicles[i] for i in equipped_ids]
    draws = {v.id: random.Random(f"{config.seed}:decision:{v.id}") for v in equipped}
    buffers = {v.id: TransmitBuffer() for v in equipped}
    in_flight: dict[int, Transmission] = {}
    records: list[TransmissionRecord] = []
    delivered: list[tuple[SensorPacket, float, int, Interface]] = []
    dropped: list[tuple[SensorPacket, int]] = []
    events: list[dict] = []
    trajectories: list[tuple] = []

    dt = config.mobility_tick
    per_decision = int(round(config.decision_tick / dt))
    n_ticks = int(round(config.duration / dt))
    n_decisions = int(math.floor(config.duration / config.decision_tick + 1e-9)) + 1
    traces = np.zeros((len(equipped), n_decisions, 2))
    pred_log = _PredictionLog(config.prediction_taus) if config.prediction_stats else None
    pred_every = max(1, int(round(config.prediction_every / config.decision_tick)))
    interfaces = config.mode.interfaces
    packet_id = 0

    def finish(tx: Transmission) -> None:
        for pkt, t_done in tx.delivered:
            delivered.append((pkt, t_done, tx.record.vehicle, tx.record.interface))
        for pkt in tx.lost:
            dropped.append((pkt, tx.record.vehicle))

    for i in range(n_ticks + 1):
        t = i * dt
        if i % per_decision == 0:
            didx = i // per_decision
            positions = [veh.position for veh in equipped]
            if didx < n_decisions and equipped:
                traces[:, didx] = positions
            if i < n_ticks and equipped:
                measured = {iface: _measure_or_floor(env, positions, iface, t) for iface in interfaces}
            for vidx, veh in enumerate(equipped):
                if i == n_ticks:
                    break
                buf = buffers[veh.id]
                buf.push(SensorPacket(packet_id, t, config.packet_size))
                packet_id += 1
                samples = {iface: measured[iface][vidx] for iface in interfaces}
                if pred_log is not None and didx % pred_every == 0:
                    pred_log.sample(vidx, didx, veh, {iface: s.serving_site for iface, s in samples.items()})
                draw = draws[veh.id].random()
                if veh.id in in_flight:
                    continue
                ctxs = []
                for iface, s in samples.items():
                    dphi = 0.0
                    if config.scheme is SchemeKind.PCAT:
                        mean = predict_metric_mean(veh, iface, config.predictor, params.tau, env, s, config.metric_step)
                        dphi = delta_phi(s, mean)
                    ctxs.append(InterfaceContext(s, env.ranges[iface], dphi, s.serving_site is not None))
                elapsed = t - buf.last_tx
                send, iface, p = decide(DecisionContext(ctxs, elapsed), config.scheme, params, draw)
                if config.record_events:
                    events.append({
                        "time": round(t, 6), "vehicle": veh.id, "scheme": config.scheme.value,
                        **{f"theta_{c.sample.interface.value}": c.theta for c in ctxs},
                        **{f"dphi_{c.sample.interface.value}": c.delta_phi for c in ctxs},
                        "p": p, "draw": draw, "transmit": int(send), "interface": iface.value,
                    })
                if send:
                    packets = buf.flush(t)
                    chosen = samples[iface]
                    rec = TransmissionRecord(
                        veh.id, iface, t, sum(pk.size for pk in packets),
                        theta=normalize_metric(chosen.phi, env.ranges[iface]), probability=p, elapsed=elapsed,
                    )
                    records.append(rec)
                    in_flight[veh.id] = Transmission(rec, packets, scenario.links[iface], config.retry_interval)
        if i == n_ticks:
            break
        if in_flight:
            for vid in sorted(in_flight):
                tx = in_flight[vid]
                metric = env.link_metric(vehicles[vid].position, tx.record.interface)
                tx.advance(t + dt, metric)
                if tx.done:
                    finish(tx)
                    del in_flight[vid]
        for veh in vehicles:
            step_vehicle(veh, scenario.network, lights, dt, t, scenario.a_acc, scenario.a_dec)
        if config.record_trajectories and (i + 1) % per_decision == 0:
            for veh in vehicles:
                p = veh.position
                trajectories.append((round(t + dt, 6), veh.id, p.x, p.y, veh.speed, veh.accel))

    buffered: list[tuple[SensorPacket, int]] = []
    for vid, tx in sorted(in_flight.items()):
        finish(tx)
        buffered.extend((pkt, vid) for pkt in tx.pending)
    for veh in equipped:
        buffered.extend((pkt, veh.id) for pkt in buffers[veh.id].packets)

    stats = collect_statistics(records, delivered, dropped, buffered, equipped_ids, config.duration, warmup)
    rows: list[tuple] = []
    if pred_log is not None:
        stats.position_error, stats.metric_error, rows = _score_predictions(pred_log, env, traces)
    return RunResult(config, stats, equipped_ids, records, events, trajectories, rows)


def _score_predictions(pred_log: _PredictionLog, env, traces):
    pos_err, met_err, rows = pred_log.score(env, traces, tuple(Interface))
    pos = {k: {t: _summary(v) for t, v in by_tau.items()} for k, by_tau in pos_err.items()}
    met = {
        i: {k: {t: _summary(v) for t, v in by_tau.items()} for k, by_tau in by_kind.items()}
        for i, by_kind in met_err.items()
    }
    return pos, met, rows
