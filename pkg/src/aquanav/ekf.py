"""Multiplicative error-state quaternion EKF, the comparison baseline.

Nominal state: unit quaternion ``q`` (body to world, scalar first), world
velocity and position. Error state: ``(dtheta, dv, dp)`` with the attitude
error defined in the body frame, ``R = R_hat Exp(dtheta)``. Mean
propagation uses the same discrete kinematics as the invariant filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FilterConfig
from .errors import GapError, InitializationError, OrderingError
from .geo import to_local
from .inekf import _chol_solve, _symmetrize, dvl_to_imu
from .liegroup import POS, ROT, VEL, quaternion_to_rotation, skew, so3_exp
from .records import DepthSample, DvlSample, GpsSample, ImuSample, SensorLog
from .replay import Steps, replay
from .trajectory import TrajectoryEstimate


def quat_multiply(a, b) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_exp(w) -> np.ndarray:
    """Quaternion of the rotation vector ``w``."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    half = 0.5 * theta
    if theta < 1e-7:
        return np.r_[1.0 - half * half / 2.0, w * (0.5 - theta * theta / 48.0)]
    return np.r_[np.cos(half), w * (np.sin(half) / theta)]


@dataclass(frozen=True)
class EkfState:
    q: np.ndarray
    v: np.ndarray
    p: np.ndarray
    P: np.ndarray
    t: float

    @property
    def R(self) -> np.ndarray:
        return quaternion_to_rotation(self.q)


def ekf_init(first_gps: GpsSample, first_heading: float, cfg: FilterConfig) -> EkfState:
    if not first_gps.valid:
        raise InitializationError(f"GPS fix at t={first_gps.t} is flagged invalid")
    if cfg.origin is None:
        raise InitializationError("no geodetic reference origin configured")
    x, y = to_local(first_gps.lat, first_gps.lon, cfg.origin)
    return EkfState(
        quat_exp((0.0, 0.0, first_heading)),
        np.zeros(3),
        np.array([float(x), float(y), 0.0]),
        cfg.p0_scale * np.eye(9),
        float(first_gps.t),
    )


def ekf_predict(s: EkfState, imu: ImuSample, dt: float, cfg: FilterConfig) -> EkfState:
    if not dt > 0:
        raise OrderingError(f"non-positive prediction step dt={dt!r} at t={s.t!r}")
    if dt > cfg.max_dt:
        raise GapError(f"IMU gap of {dt:.3f} s at t={s.t:.3f} exceeds {cfg.max_dt} s; re-anchor")
    omega = np.asarray(imu.gyro, dtype=float)
    acc = np.asarray(imu.accel, dtype=float)
    R = s.R
    acc_world = R @ acc + cfg.gravity
    q = quat_multiply(s.q, quat_exp(omega * dt))
    q /= np.linalg.norm(q)
    v = s.v + acc_world * dt
    p = s.p + s.v * dt + 0.5 * acc_world * dt * dt

    RA = R @ skew(acc)
    F = np.eye(9)
    F[ROT, ROT] = so3_exp(-omega * dt)
    F[VEL, ROT] = -RA * dt
    F[POS, ROT] = -0.5 * RA * dt * dt
    F[POS, VEL] = np.eye(3) * dt
    Qc = np.zeros((9, 9))
    Qc[ROT, ROT] = cfg.noise.gyro
    Qc[VEL, VEL] = R @ cfg.noise.accel @ R.T
    P = F @ (s.P + Qc * dt) @ F.T
    return EkfState(q, v, p, _symmetrize(P), s.t + dt)


def _correct(s: EkfState, H: np.ndarray, resid: np.ndarray, Rm: np.ndarray) -> EkfState:
    P = s.P
    PHt = P @ H.T
    S = H @ PHt + Rm
    K = _chol_solve(S, PHt)
    dx = K @ resid
    q = quat_multiply(s.q, quat_exp(dx[ROT]))
    q /= np.linalg.norm(q)
    IKH = np.eye(9) - K @ H
    P_new = IKH @ P @ IKH.T + K @ Rm @ K.T
    return EkfState(q, s.v + dx[VEL], s.p + dx[POS], _symmetrize(P_new), s.t)


def ekf_update_dvl(s: EkfState, dvl: DvlSample, gyro, cfg: FilterConfig) -> EkfState:
    v_meas, Qv = dvl_to_imu(dvl, gyro, cfg)
    Rt = s.R.T
    h = Rt @ s.v
    H = np.zeros((3, 9))
    H[:, ROT] = skew(h)
    H[:, VEL] = Rt
    return _correct(s, H, v_meas - h, Qv)


def ekf_update_depth(s: EkfState, d: DepthSample, cfg: FilterConfig) -> EkfState:
    H = np.zeros((1, 9))
    H[0, 8] = 1.0
    return _correct(s, H, np.array([-float(d.depth) - s.p[2]]), np.array([[cfg.ekf_depth_var]]))


def ekf_update_gps(s: EkfState, g: GpsSample, cfg: FilterConfig) -> EkfState:
    if not g.valid:
        return s
    x, y = to_local(g.lat, g.lon, cfg.origin)
    H = np.zeros((2, 9))
    H[0, 6] = H[1, 7] = 1.0
    resid = np.array([float(x) - s.p[0], float(y) - s.p[1]])
    return _correct(s, H, resid, np.eye(2) * g.accuracy**2)


def ekf_update(s: EkfState, record, cfg: FilterConfig, gyro=(0.0, 0.0, 0.0)) -> EkfState:
    """Dispatch a DVL, depth or GPS record to its correction."""
    if isinstance(record, DvlSample):
        return ekf_update_dvl(s, record, gyro, cfg)
    if isinstance(record, DepthSample):
        return ekf_update_depth(s, record, cfg)
    if isinstance(record, GpsSample):
        return ekf_update_gps(s, record, cfg)
    raise TypeError(f"EKF cannot use a {type(record).__name__}")


def _pose(s: EkfState):
    return s.t, s.R, s.v, s.p, s.P


STEPS = Steps(ekf_init, ekf_predict, ekf_update_dvl, ekf_update_depth, ekf_update_gps, _pose)


def run_ekf(
    sensor_log: SensorLog,
    cfg: FilterConfig | None = None,
    *,
    initial: EkfState | None = None,
    on_step=None,
) -> TrajectoryEstimate:
    return replay(sensor_log, STEPS, cfg, source="ekf", initial=initial, on_step=on_step)
