"""Parameter sweeps over scheme, interface mode, predictor, horizon and seed."""

from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .engine import InterfaceMode, SimConfig, run
from .mobility import PredictorKind
from .output import summary_json, write_run
from .scenario import Scenario
from .scheme import SchemeKind, SchemeParams
from .topology import ConfigurationError

COLUMNS = [
    "scheme", "mode", "predictor", "tau", "seed", "status",
    "goodput", "data_rate", "mean_age", "pdr", "mean_position_error", "mean_metric_error",
]


@dataclass(frozen=True)
class SweepSpec:
    predictors: tuple[PredictorKind, ...]
    taus: tuple[float, ...]
    scheme_modes: tuple[tuple[SchemeKind, InterfaceMode], ...]
    seeds: tuple[int, ...]
    duration: float = 600.0
    vehicles: int = 150
    penetration: float = 0.10
    cap: int = 1000
    prediction_stats: bool = True

    def __post_init__(self):
        for name in ("predictors", "taus", "scheme_modes", "seeds"):
            if not getattr(self, name):
                raise ConfigurationError(f"sweep axis {name!r} is empty")
        if any(t <= 0 for t in self.taus):
            raise ConfigurationError("horizons must be positive")
        if len(self.points()) > self.cap:
            raise ConfigurationError(f"sweep has {len(self.points())} points, cap is {self.cap}")

    def points(self) -> list[tuple[SchemeKind, InterfaceMode, PredictorKind, float, int]]:
        return [
            (scheme, mode, pred, tau, seed)
            for (scheme, mode), pred, tau, seed in itertools.product(
                self.scheme_modes, self.predictors, self.taus, self.seeds
            )
        ]

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepSpec":
        try:
            if "scheme_modes" in doc:
                pairs = [(SchemeKind(s), InterfaceMode(m)) for s, m in doc["scheme_modes"]]
            else:
                pairs = [(SchemeKind(s), InterfaceMode(m)) for s in doc["schemes"] for m in doc["modes"]]
            return cls(
                predictors=tuple(PredictorKind(p) for p in doc["predictors"]),
                taus=tuple(float(t) for t in doc["taus"]),
                scheme_modes=tuple(pairs),
                seeds=tuple(int(s) for s in doc["seeds"]),
                duration=float(doc.get("duration", 600.0)),
                vehicles=int(doc.get("vehicles", 150)),
                penetration=float(doc.get("penetration", 0.10)),
                cap=int(doc.get("cap", 1000)),
                prediction_stats=bool(doc.get("prediction_stats", True)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"malformed sweep spec: {exc}") from exc


def point_config(spec: SweepSpec, scenario: Scenario, point) -> SimConfig:
    scheme, mode, pred, tau, seed = point
    return SimConfig(
        scenario,
        vehicles=spec.vehicles,
        penetration=spec.penetration,
        duration=spec.duration,
        scheme=scheme,
        mode=mode,
        predictor=pred,
        params=replace(SchemeParams(), tau=tau),
        seed=seed,
        prediction_stats=spec.prediction_stats,
        prediction_taus=(tau,),
    )


def point_key(point) -> tuple:
    scheme, mode, pred, tau, seed = point
    return (scheme.value, mode.value, pred.value, tau, seed)


def run_dir_name(point) -> str:
    scheme, mode, pred, tau, seed = point
    return f"{scheme.value}_{mode.value}_{pred.value}_tau{tau:g}_seed{seed}"


def _row(point, stats) -> dict:
    scheme, mode, pred, tau, seed = point
    tau_key = str(int(round(tau)))
    pos = stats.position_error.get(pred.value, {}).get(tau_key, {}).get("mean")
    met = [
        by_kind.get(pred.value, {}).get(tau_key, {}).get("mean")
        for iface, by_kind in stats.metric_error.items()
        if iface in {i.value for i in mode.interfaces}
    ]
    met = [m for m in met if m is not None]
    return {
        "scheme": scheme.value, "mode": mode.value, "predictor": pred.value, "tau": tau, "seed": seed,
        "status": "ok",
        "goodput": stats.goodput, "data_rate": stats.data_rate, "mean_age": stats.mean_age, "pdr": stats.pdr,
        "mean_position_error": pos,
        "mean_metric_error": sum(met) / len(met) if met else None,
    }


def _execute(args) -> dict:
    spec, scenario_doc, point, out_dir = args
    scenario = Scenario.from_dict(scenario_doc)
    try:
        result = run(point_config(spec, scenario, point))
    except Exception as exc:  # recorded per row; the sweep continues
        scheme, mode, pred, tau, seed = point
        return {"scheme": scheme.value, "mode": mode.value, "predictor": pred.value, "tau": tau, "seed": seed,
                "status": f"error: {exc}"}
    if out_dir is not None:
        write_run(result, Path(out_dir) / run_dir_name(point))
    return _row(point, result.stats)


def run_sweep(spec: SweepSpec, scenario: Scenario, out_dir=None, workers: int = 1) -> list[dict]:
    """Run every sweep point; rows come back sorted by key whatever the worker count."""
    doc = scenario.to_dict()
    jobs = [(spec, doc, p, out_dir) for p in spec.points()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_execute, jobs))
    else:
        rows = [_execute(j) for j in jobs]
    keyed = sorted(zip((point_key(p) for p in spec.points()), rows), key=lambda kv: kv[0])
    rows = [r for _, r in keyed]
    if out_dir is not None:
        write_rows(rows, Path(out_dir) / "combined.csv")
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def write_rows(rows: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in COLUMNS])


def read_rows(path) -> list[dict]:
    numeric = {"tau", "goodput", "data_rate", "mean_age", "pdr", "mean_position_error", "mean_metric_error"}
    out = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            row: dict[str, Optional[object]] = {}
            for k, v in rec.items():
                if k == "seed":
                    row[k] = int(v)
                elif k in numeric:
                    row[k] = float(v) if v != "" else None
                else:
                    row[k] = v
            out.append(row)
    return out


def load_spec(path) -> SweepSpec:
    return SweepSpec.from_dict(json.loads(Path(path).read_text()))


__all__ = ["SweepSpec", "run_sweep", "read_rows", "write_rows", "load_spec", "summary_json", "COLUMNS"]
