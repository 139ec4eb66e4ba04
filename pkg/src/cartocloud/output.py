"""Run outputs: summary JSON and the CSV logs."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .channel import Interface, RadioEnvironment
from .engine import RunResult

TRANSMISSION_COLUMNS = [
    "vehicle", "interface", "start", "payload_bytes", "attempted", "succeeded", "dropped",
    "retries", "delivered_bytes", "completion", "theta", "probability", "elapsed",
]
EVENT_COLUMNS = [
    "time", "vehicle", "scheme", "theta_LTE", "theta_WIFI", "dphi_LTE", "dphi_WIFI",
    "p", "draw", "transmit", "interface",
]
TRAJECTORY_COLUMNS = ["time", "vehicle", "x", "y", "v", "a"]
PREDICTION_COLUMNS = ["quantity", "predictor", "tau", "vehicle_index", "time", "error"]


def summary_json(result: RunResult) -> str:
    return json.dumps(result.summary(), sort_keys=True, indent=1, allow_nan=False, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)!r}")


def _write_csv(path: Path, columns: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)


def write_run(result: RunResult, out_dir) -> dict[str, Path]:
    """Write summary.json, transmissions.csv and whichever optional logs were recorded."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"summary": out / "summary.json", "transmissions": out / "transmissions.csv"}
    paths["summary"].write_text(summary_json(result))
    rows = []
    for rec in result.records:
        d = asdict(rec)
        d["interface"] = rec.interface.value
        rows.append([d[c] for c in TRANSMISSION_COLUMNS])
    _write_csv(paths["transmissions"], TRANSMISSION_COLUMNS, rows)
    if result.events:
        paths["events"] = out / "events.csv"
        _write_csv(paths["events"], EVENT_COLUMNS, ([e.get(c, "") for c in EVENT_COLUMNS] for e in result.events))
    if result.trajectories:
        paths["trajectories"] = out / "trajectories.csv"
        _write_csv(paths["trajectories"], TRAJECTORY_COLUMNS, result.trajectories)
    if result.prediction_rows:
        paths["predictions"] = out / "predictions.csv"
        _write_csv(paths["predictions"], PREDICTION_COLUMNS, result.prediction_rows)
    return paths


def write_coverage(env: RadioEnvironment, interface: Interface, extent: float, resolution: float, path) -> None:
    """Raster of the measured metric over the playground, one row per grid point."""
    xs = np.arange(0.0, extent + 1e-9, resolution)
    gx, gy = np.meshgrid(xs, xs)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    phi, site = env.measure_many(interface, pts)
    _write_csv(Path(path), ["x", "y", "metric_dbm", "serving_site"],
               zip(pts[:, 0].tolist(), pts[:, 1].tolist(), phi.tolist(), site.tolist()))
