"""Replay a sensor log through an estimator's step functions.

Both estimators share this loop so that dispatch, timing and event
bookkeeping are identical between them.
"""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import InitializationError, OrderingError, SingularUpdateError
from .geo import GeoRef
from .records import DepthSample, DvlSample, GpsSample, ImuSample, SensorLog, record_type
from .trajectory import TrajectoryEstimate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Steps:
    """Estimator step functions. ``pose`` returns ``(t, R, v, p, P)``."""

    init: Callable
    predict: Callable
    update_dvl: Callable
    update_depth: Callable
    update_gps: Callable
    pose: Callable


def check_order(records) -> None:
    prev = -np.inf
    for i, rec in enumerate(records):
        if rec.t < prev:
            raise OrderingError(
                f"record {i} ({record_type(rec)} at t={rec.t!r}) precedes the previous timestamp t={prev!r}"
            )
        prev = rec.t


def replay(
    sensor_log: SensorLog,
    steps: Steps,
    cfg=None,
    *,
    source: str,
    corrections: bool = True,
    initial: Any = None,
    on_step: Callable | None = None,
) -> TrajectoryEstimate:
    """Run ``steps`` over the log and emit one pose per IMU timestamp.

    Without ``initial``, the filter is anchored on the first valid GPS fix
    with the heading stored in the log metadata. Corrections whose timestamp
    falls between IMU samples wait for the prediction that reaches them.
    """
    cfg = cfg if cfg is not None else sensor_log.calibration
    records = sensor_log.records
    events: Counter = Counter()
    if not records and initial is None:
        return TrajectoryEstimate.from_lists([], [], [], [], source=source)
    check_order(records)

    if initial is None:
        start = next(
            (i for i, r in enumerate(records) if isinstance(r, GpsSample) and r.valid), None
        )
        if start is None:
            raise InitializationError("log has no valid GPS fix to initialise from")
        fix = records[start]
        if cfg.origin is None:
            cfg = cfg.with_origin(GeoRef(fix.lat, fix.lon))
        state = steps.init(fix, float(sensor_log.meta.get("initial_heading", 0.0)), cfg)
        t0 = fix.t
        first = next(i for i, r in enumerate(records) if r.t >= t0)
        events["before_init"] = first
        todo = (r for r in records[first:] if r is not fix)
    else:
        state = initial
        t0 = steps.pose(state)[0]
        todo = (r for r in records if r.t >= t0)
        events["before_init"] = sum(1 for r in records if r.t < t0)

    out_t, out_R, out_v, out_p, out_P = [], [], [], [], []

    def emit(s):
        t, R, v, p, P = steps.pose(s)
        out_t.append(t)
        out_R.append(R)
        out_v.append(v)
        out_p.append(p)
        out_P.append(P)

    held: ImuSample | None = None
    waiting: deque = deque()
    pending = True

    def correct(s, rec):
        gyro = np.zeros(3) if held is None else np.asarray(held.gyro, dtype=float)
        try:
            if isinstance(rec, DvlSample):
                if not rec.valid:
                    events["invalid_dvl"] += 1
                    return s
                s = steps.update_dvl(s, rec, gyro, cfg)
            elif isinstance(rec, DepthSample):
                s = steps.update_depth(s, rec, cfg)
            elif isinstance(rec, GpsSample):
                if not rec.valid:
                    events["invalid_gps"] += 1
                    log.info("ignoring invalid GPS fix at t=%.3f", rec.t)
                    return s
                s = steps.update_gps(s, rec, cfg)
            else:
                return s
        except SingularUpdateError as exc:
            events["singular_updates"] += 1
            log.warning("skipped %s update at t=%.3f: %s", record_type(rec), rec.t, exc)
            return s
        events[f"{record_type(rec)}_updates"] += 1
        if on_step is not None:
            on_step(s)
        return s

    for rec in todo:
        if isinstance(rec, ImuSample):
            t_now = steps.pose(state)[0]
            if rec.t > t_now:
                if pending:
                    emit(state)
                state = steps.predict(state, held if held is not None else rec, rec.t - t_now, cfg)
                pending = True
                if on_step is not None:
                    on_step(state)
                while waiting and waiting[0].t <= rec.t:
                    state = correct(state, waiting.popleft())
            held = rec
        elif not corrections or not isinstance(rec, (DvlSample, DepthSample, GpsSample)):
            continue
        elif rec.t <= steps.pose(state)[0]:
            state = correct(state, rec)
        else:
            waiting.append(rec)

    if pending:
        emit(state)
    if waiting:
        events["dropped_after_last_imu"] = len(waiting)
    return TrajectoryEstimate.from_lists(out_t, out_R, out_v, out_p, out_P, source, events)
