"""Sensor-log files, trajectory files and water-quality synchronisation.

A log is line-delimited JSON. The first line is a header carrying the
calibration block and free-form metadata; every following line is one
record with ``t``, ``type`` and the type's named fields::

    {"type": "header", "calibration": {...}, "meta": {...}}
    {"t": 0.01, "type": "imu", "gx": 0.0, "gy": 0.0, "gz": 0.0, "ax": 0.0, "ay": 0.0, "az": 9.81}
    {"t": 0.05, "type": "dvl", "vx": 0.8, "vy": 0.0, "vz": 0.0, "valid": true}
    {"t": 0.05, "type": "depth", "d": 0.2}
    {"t": 0.2, "type": "gps", "lat": 37.25, "lon": -76.38, "acc": 1.0}
    {"t": 1.0, "type": "wq", "param": "pH", "value": 7.9}

Floats are written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import FilterConfig
from .errors import LogFormatError, OrderingError, SyncError
from .liegroup import quaternion_to_rotation, rotation_to_quaternion
from .records import (
    DepthSample,
    DvlSample,
    GpsSample,
    ImuSample,
    SensorLog,
    WqRecord,
    record_type,
)
from .trajectory import TrajectoryEstimate

log = logging.getLogger(__name__)

JITTER_TOL = 0.010
REJECT_LIMIT = 0.01
SYNC_TOL = 0.6

TRAJECTORY_COLUMNS = ("t", "x", "y", "z", "vx", "vy", "vz", "qw", "qx", "qy", "qz")


def _num(d: dict, key: str) -> float:
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"field {key!r} is not a number")
    return float(value)


def _maybe_num(d: dict, key: str) -> float:
    return math.nan if d.get(key) is None else _num(d, key)


def _flag(d: dict, key: str) -> bool:
    value = d.get(key, True)
    if not isinstance(value, bool):
        raise ValueError(f"field {key!r} must be true or false")
    return value


def record_from_dict(d: dict):
    """Build a typed record from one decoded log line."""
    kind = d.get("type")
    t = _num(d, "t")
    if kind == "imu":
        return ImuSample(
            t,
            (_num(d, "gx"), _num(d, "gy"), _num(d, "gz")),
            (_num(d, "ax"), _num(d, "ay"), _num(d, "az")),
        )
    if kind == "dvl":
        valid = _flag(d, "valid")
        get = _num if valid else _maybe_num
        return DvlSample(t, (get(d, "vx"), get(d, "vy"), get(d, "vz")), valid)
    if kind == "depth":
        return DepthSample(t, _num(d, "d"))
    if kind == "gps":
        acc = _num(d, "acc") if "acc" in d else 1.0
        return GpsSample(t, _num(d, "lat"), _num(d, "lon"), acc, _flag(d, "valid"))
    if kind == "wq":
        param = d.get("param")
        if not isinstance(param, str):
            raise ValueError("field 'param' must be a string")
        return WqRecord(t, param, _num(d, "value"), d.get("units", ""))
    raise ValueError(f"unknown record type {kind!r}")


def _float_or_none(x: float):
    return float(x) if math.isfinite(x) else None


def record_to_dict(rec) -> dict:
    kind = record_type(rec)
    out = {"t": float(rec.t), "type": kind}
    if kind == "imu":
        out.update(zip(("gx", "gy", "gz"), map(float, rec.gyro)))
        out.update(zip(("ax", "ay", "az"), map(float, rec.accel)))
    elif kind == "dvl":
        out.update(zip(("vx", "vy", "vz"), map(_float_or_none, rec.velocity)))
        out["valid"] = bool(rec.valid)
    elif kind == "depth":
        out["d"] = float(rec.depth)
    elif kind == "gps":
        out.update(lat=float(rec.lat), lon=float(rec.lon), acc=float(rec.accuracy))
        if not rec.valid:
            out["valid"] = False
    else:
        out.update(param=rec.param, value=float(rec.value), units=rec.units)
    return out


def _sort_with_tolerance(records: list, line_nos: list[int], path) -> list:
    """Stable re-sort of small timestamp inversions; larger ones are errors."""
    latest = -math.inf
    for rec, n in zip(records, line_nos):
        if rec.t < latest - JITTER_TOL:
            raise OrderingError(
                f"{path}:{n}: timestamp {rec.t!r} is {latest - rec.t:.3f} s before an "
                f"earlier record (tolerance {JITTER_TOL} s)"
            )
        latest = max(latest, rec.t)
    return sorted(records, key=lambda r: r.t)


def parse_log(path, *, require_calibration: bool = True) -> SensorLog:
    """Read a log file into a time-ordered ``SensorLog``.

    Malformed lines are collected in ``rejects`` as ``(line, reason)``
    pairs. More than 1% rejected lines aborts the parse.
    """
    path = Path(path)
    header = None
    records, line_nos, rejects = [], [], []
    n_lines = 0
    with path.open() as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if not isinstance(d, dict):
                    raise ValueError("line is not a JSON object")
            except ValueError as exc:
                if header is None and n_lines == 0 and require_calibration:
                    raise LogFormatError(f"{path}:{n}: unreadable header: {exc}") from exc
                n_lines += 1
                rejects.append((n, str(exc)))
                continue
            if d.get("type") == "header":
                if header is not None or records:
                    raise LogFormatError(f"{path}:{n}: header must be the first line")
                header = d
                continue
            n_lines += 1
            try:
                records.append(record_from_dict(d))
                line_nos.append(n)
            except (KeyError, TypeError, ValueError) as exc:
                reason = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
                rejects.append((n, reason))

    if n_lines and len(rejects) > REJECT_LIMIT * n_lines:
        first = "; ".join(f"line {n}: {why}" for n, why in rejects[:3])
        raise LogFormatError(
            f"{path}: {len(rejects)} of {n_lines} record lines malformed "
            f"(limit {REJECT_LIMIT:.0%}); {first}"
        )
    for n, why in rejects:
        log.warning("%s:%d rejected: %s", path, n, why)

    header = header or {}
    cal = header.get("calibration")
    if cal is None:
        if require_calibration:
            raise LogFormatError(f"{path}: header has no calibration block")
        calibration = FilterConfig()
    else:
        try:
            calibration = FilterConfig.from_dict(cal)
        except (KeyError, TypeError, ValueError) as exc:
            raise LogFormatError(f"{path}: invalid calibration block: {exc}") from exc

    records = _sort_with_tolerance(records, line_nos, path)
    return SensorLog(records, calibration, dict(header.get("meta", {})), rejects)


def serialize_log(sensor_log: SensorLog, path) -> None:
    header = {
        "type": "header",
        "calibration": sensor_log.calibration.to_dict(),
        "meta": sensor_log.meta,
    }
    with Path(path).open("w") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in sensor_log.records:
            fh.write(json.dumps(record_to_dict(rec)) + "\n")


def read_wq(path) -> list[WqRecord]:
    """Water-quality records from a log file; the header may be omitted."""
    return parse_log(path, require_calibration=False).wq


# --- trajectories ------------------------------------------------------------


def write_trajectory(traj: TrajectoryEstimate, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for k in range(len(traj)):
            q = rotation_to_quaternion(traj.R[k])
            w.writerow([repr(float(x)) for x in (traj.t[k], *traj.p[k], *traj.v[k], *q)])


def read_trajectory(path, source: str = "") -> TrajectoryEstimate:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or tuple(head) != TRAJECTORY_COLUMNS:
            raise LogFormatError(f"{path}: expected columns {','.join(TRAJECTORY_COLUMNS)}")
        try:
            rows = np.array([[float(x) for x in row] for row in reader if row], dtype=float)
        except ValueError as exc:
            raise LogFormatError(f"{path}: {exc}") from exc
    if rows.size == 0:
        return TrajectoryEstimate.empty(source)
    if rows.shape[1] != len(TRAJECTORY_COLUMNS):
        raise LogFormatError(f"{path}: rows must have {len(TRAJECTORY_COLUMNS)} fields")
    R = np.array([quaternion_to_rotation(q) for q in rows[:, 7:11]])
    return TrajectoryEstimate(rows[:, 0], R, rows[:, 4:7], rows[:, 1:4], None, source)


# --- water-quality synchronisation ------------------------------------------


@dataclass(frozen=True)
class GeoSample:
    """A water-quality reading placed at the pose nearest in time."""

    t: float
    param: str
    value: float
    units: str
    position: tuple[float, float, float]
    pose_t: float


@dataclass
class SyncResult:
    samples: list[GeoSample]
    dropped: int


def sync_wq(wq, traj: TrajectoryEstimate, tol: float = SYNC_TOL) -> SyncResult:
    """Pair each reading with the nearest pose no more than ``tol`` seconds away."""
    wq = list(wq)
    if not wq:
        raise SyncError("no water-quality records to synchronise")
    if len(traj) == 0:
        raise SyncError("trajectory is empty")
    times = np.array([r.t for r in wq])
    w0, w1 = float(times.min()), float(times.max())
    p0, p1 = float(traj.t[0]), float(traj.t[-1])
    if w1 < p0 - tol or w0 > p1 + tol:
        raise SyncError(
            f"water-quality records span [{w0}, {w1}] s but the trajectory spans [{p0}, {p1}] s"
        )
    idx, ok = traj.nearest_index(times, tol)
    samples = [
        GeoSample(r.t, r.param, r.value, r.units, tuple(map(float, traj.p[k])), float(traj.t[k]))
        for r, k, good in zip(wq, idx, ok)
        if good
    ]
    dropped = len(wq) - len(samples)
    if dropped:
        log.info("%d water-quality records had no pose within %.2f s", dropped, tol)
    return SyncResult(samples, dropped)
