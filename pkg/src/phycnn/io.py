"""CSV/JSON readers and writers for records, histories and results.

Floats are written with ``repr`` so files parse back bit-exactly and
identical inputs always produce identical bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dynamics import FEATURE_UNITS, GroundMotion, Trajectory
from .errors import DataError


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"empty CSV {path}")
    return rows[0], rows[1:]


def read_columns(path) -> dict:
    header, rows = read_csv(path)
    cols = {}
    for j, name in enumerate(header):
        key = name.split(" [")[0]
        try:
            cols[key] = np.array([float(r[j]) for r in rows])
        except ValueError:
            cols[key] = [r[j] for r in rows]
    return cols


def write_motion(path, gm: GroundMotion):
    t = np.arange(gm.n) * gm.dt
    write_csv(path, ["t [s]", "accel [m/s^2]"], zip(t, gm.accel))


def read_motion(path, label=None) -> GroundMotion:
    cols = read_columns(path)
    t, acc = cols["t"], cols["accel"]
    if len(t) < 2:
        raise DataError(f"{path}: need at least two samples")
    dt = float(t[1] - t[0])
    return GroundMotion(acc, dt, label if label is not None else Path(path).stem)


def write_trajectory(path, tr: Trajectory):
    t = np.arange(tr.n) * tr.dt
    header = ["t [s]"] + [f"{f} [{FEATURE_UNITS[f]}]" for f in ("x", "v", "a", "g")]
    write_csv(path, header, zip(t, tr.x, tr.v, tr.a, tr.g))


def read_trajectory(path) -> Trajectory:
    cols = read_columns(path)
    dt = float(cols["t"][1] - cols["t"][0])
    return Trajectory(cols["x"], cols["v"], cols["a"], cols["g"], dt)


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file {path}")
    return json.loads(path.read_text())


def write_history(path, history):
    rows = [(h.epoch, h.train.total, h.train.data, h.train.physics, h.validation) for h in history]
    write_csv(path, ["epoch", "J", "J_D", "J_P", "validation_J"], rows)


def write_prediction(path, t, pred, features, truth=None):
    header = ["t [s]"] + [f"{f}_pred [{FEATURE_UNITS[f]}]" for f in features]
    cols = [t] + [pred[:, j] for j in range(pred.shape[1])]
    if truth is not None:
        header += [f"{f}_true [{FEATURE_UNITS[f]}]" for f in features]
        cols += [truth[:, j] for j in range(truth.shape[1])]
    write_csv(path, header, zip(*cols))


def write_observations(path, observations):
    rows = [(o.record_id, o.im, o.peak_disp, o.exceeded) for o in observations]
    write_csv(path, ["motion_id", "pga [g]", "peak_disp [m]", "exceeded"], rows)


def read_observations(path):
    from .fragility import ExceedanceObservation

    _, rows = read_csv(path)
    return [ExceedanceObservation(float(r[1]), int(r[3]), r[0], float(r[2])) for r in rows]


def write_curve(path, grid, prob):
    write_csv(path, ["pga [g]", "probability"], zip(grid, prob))
