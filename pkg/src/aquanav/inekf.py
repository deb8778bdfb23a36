"""Right-invariant EKF on SE_2(3) with IMU, DVL, depth and GPS.

The error is ``eta = X_hat X^-1`` and the covariance ``P`` lives in the
tangent space at the identity, ordered ``(rotation, velocity, position)``.
World frame is East-North-Up; the depth sensor reports positive-down depth
which is stored as ``z = -depth``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import FilterConfig
from .errors import GapError, InitializationError, OrderingError, SingularUpdateError
from .geo import to_local
from .liegroup import POS, ROT, VEL, GroupElement, adjoint, compose, se23_exp, skew, so3_exp
from .records import DepthSample, DvlSample, GpsSample, ImuSample, SensorLog
from .replay import Steps, replay
from .trajectory import TrajectoryEstimate

log = logging.getLogger(__name__)

MODES = ("inekf", "deadreckon")


@dataclass(frozen=True)
class GroupState:
    X: GroupElement
    P: np.ndarray
    t: float


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def _chol_solve(S: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``B @ inv(S)`` for symmetric positive-definite ``S``."""
    if not np.all(np.isfinite(S)):
        raise SingularUpdateError("innovation covariance is not finite")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularUpdateError("innovation covariance is not positive definite") from exc
    if np.diag(L).min() <= 1e-12 * np.diag(L).max():
        raise SingularUpdateError("innovation covariance is numerically singular")
    # (B S^-1)^T = S^-1 B^T, S = L L^T
    Y = np.linalg.solve(L, B.T)
    return np.linalg.solve(L.T, Y).T


def _joseph(P: np.ndarray, K: np.ndarray, H: np.ndarray, Rm: np.ndarray) -> np.ndarray:
    """Joseph-form posterior covariance; stays positive semi-definite under roundoff."""
    IKH = np.eye(P.shape[0]) - K @ H
    return _symmetrize(IKH @ P @ IKH.T + K @ Rm @ K.T)


def _block_jacobian(block: slice) -> np.ndarray:
    H = np.zeros((3, 9))
    H[:, block] = -np.eye(3)
    return H


def init_state(first_gps: GpsSample, first_heading: float, cfg: FilterConfig) -> GroupState:
    """Anchor the filter at a GPS fix on the surface, level, at rest."""
    if not first_gps.valid:
        raise InitializationError(f"GPS fix at t={first_gps.t} is flagged invalid")
    if cfg.origin is None:
        raise InitializationError("no geodetic reference origin configured")
    x, y = to_local(first_gps.lat, first_gps.lon, cfg.origin)
    X = GroupElement(so3_exp((0.0, 0.0, first_heading)), np.zeros(3), np.array([float(x), float(y), 0.0]))
    return GroupState(X, cfg.p0_scale * np.eye(9), float(first_gps.t))


def transition_matrix(g: np.ndarray, dt: float) -> np.ndarray:
    """Exact ``exp(A dt)`` for the nilpotent error-dynamics matrix ``A``."""
    G = skew(g)
    Phi = np.eye(9)
    Phi[VEL, ROT] = G * dt
    Phi[POS, ROT] = 0.5 * G * dt * dt
    Phi[POS, VEL] = np.eye(3) * dt
    return Phi


def predict(s: GroupState, imu: ImuSample, dt: float, cfg: FilterConfig) -> GroupState:
    """Propagate with IMU readings held constant over ``dt``.

    The process-noise term is scaled by ``dt``; ``Phi P Phi^T`` is not.
    """
    if not dt > 0:
        raise OrderingError(f"non-positive prediction step dt={dt!r} at t={s.t!r}")
    if dt > cfg.max_dt:
        raise GapError(f"IMU gap of {dt:.3f} s at t={s.t:.3f} exceeds {cfg.max_dt} s; re-anchor")
    X = s.X
    omega = np.asarray(imu.gyro, dtype=float)
    acc_world = X.R @ np.asarray(imu.accel, dtype=float) + cfg.gravity
    R = X.R @ so3_exp(omega * dt)
    v = X.v + acc_world * dt
    p = X.p + X.v * dt + 0.5 * acc_world * dt * dt

    Phi = transition_matrix(cfg.gravity, dt)
    Ad = adjoint(X)
    n = cfg.noise
    # Only the rotation and velocity columns of Q are non-zero.
    AdQ = Ad[:, 0:3] @ n.gyro @ Ad[:, 0:3].T + Ad[:, 3:6] @ n.accel @ Ad[:, 3:6].T
    P = Phi @ (s.P + AdQ * dt) @ Phi.T
    return GroupState(GroupElement(R, v, p), _symmetrize(P), s.t + dt)


def dvl_to_imu(dvl: DvlSample, gyro, cfg: FilterConfig) -> tuple[np.ndarray, np.ndarray]:
    """DVL velocity moved to the IMU frame, and its covariance."""
    ext = cfg.extrinsics
    T = skew(ext.t)
    v = ext.R @ np.asarray(dvl.velocity, dtype=float) + T @ np.asarray(gyro, dtype=float)
    Q = ext.R @ cfg.noise.dvl @ ext.R.T + T @ cfg.noise.gyro @ T.T
    return v, Q


def update_dvl(s: GroupState, dvl: DvlSample, gyro, cfg: FilterConfig) -> GroupState:
    """Correct with a body-frame velocity reading.

    The observation of ``b = (0,0,0,1,0)`` is ``X^-1 b = (-R^T v, 1, 0)``,
    so the reading enters with a minus sign and the innovation
    ``X_hat (y - y_hat)`` reduces to ``v_hat - R_hat v_meas``. With
    ``H = [0, -I, 0]`` only the velocity rows are informative, so ``S`` is
    the 3x3 block ``P_vv + R_hat Q_v R_hat^T``.
    """
    v_meas, Qv = dvl_to_imu(dvl, gyro, cfg)
    X, P = s.X, s.P
    nu = X.v - X.R @ v_meas
    Qw = X.R @ Qv @ X.R.T
    # K = P H^T S^-1 with H^T = [0, -I, 0]^T
    K = -_chol_solve(P[VEL, VEL] + Qw, P[:, VEL])
    X_new = compose(se23_exp(K @ nu), X)
    return GroupState(X_new, _joseph(P, K, _block_jacobian(VEL), Qw), s.t)


def _position_update(s: GroupState, p_meas: np.ndarray, Qp: np.ndarray, side: str) -> GroupState:
    # Observation of b = (0,0,0,0,1) is X^-1 b = (-R^T p, 0, 1); the
    # innovation X_hat y - b reduces to p_hat - p_meas in the world frame.
    X, P = s.X, s.P
    nu = X.p - p_meas
    K = -_chol_solve(P[POS, POS] + Qp, P[:, POS])
    delta = se23_exp(K @ nu)
    X_new = compose(X, delta) if side == "right" else compose(delta, X)
    return GroupState(X_new, _joseph(P, K, _block_jacobian(POS), Qp), s.t)


def update_depth(s: GroupState, d: DepthSample, cfg: FilterConfig) -> GroupState:
    """Correct depth using the current ``x_hat, y_hat`` as pseudo-measurements."""
    p_meas = np.array([s.X.p[0], s.X.p[1], -float(d.depth)])
    return _position_update(s, p_meas, cfg.noise.pseudo, cfg.depth_correction)


def update_gps(s: GroupState, g: GpsSample, cfg: FilterConfig) -> GroupState:
    """Pull the horizontal position toward a surface GPS fix.

    A fix observes ``p = X b``, which is left- rather than right-invariant,
    so its Jacobian in the right-invariant error carries the lever arm
    ``[p_hat]x`` on the rotation block. Only the two horizontal rows are used.
    """
    if not g.valid:
        log.info("invalid GPS fix at t=%.3f ignored", g.t)
        return s
    if cfg.origin is None:
        raise InitializationError("no geodetic reference origin configured")
    x, y = to_local(g.lat, g.lon, cfg.origin)
    X, P = s.X, s.P
    nu = X.p[:2] - np.array([float(x), float(y)])
    H = np.zeros((2, 9))
    H[:, ROT] = skew(X.p)[:2]
    H[:, POS] = -np.eye(3)[:2]
    Qp = np.eye(2) * g.accuracy**2
    PHt = P @ H.T
    K = _chol_solve(H @ PHt + Qp, PHt)
    # true state is exp(-xi) X_hat, and the residual p_meas - p_hat = -nu
    X_new = compose(se23_exp(K @ nu), X)
    return GroupState(X_new, _joseph(P, K, H, Qp), s.t)


def position_covariance(p_hat: np.ndarray, P: np.ndarray) -> np.ndarray:
    """World-frame covariance of the position estimate.

    ``P`` is expressed in the right-invariant error, whose position
    component mixes in the rotation error through ``[p_hat]x``.
    """
    J = np.zeros((3, 9))
    J[:, ROT] = skew(p_hat)
    J[:, POS] = -np.eye(3)
    return J @ P @ J.T


def _pose(s: GroupState):
    return s.t, s.X.R, s.X.v, s.X.p, s.P


STEPS = Steps(init_state, predict, update_dvl, update_depth, update_gps, _pose)


def run_filter(
    sensor_log: SensorLog,
    cfg: FilterConfig | None = None,
    mode: str = "inekf",
    *,
    initial: GroupState | None = None,
    on_step=None,
) -> TrajectoryEstimate:
    """Replay a log through the filter.

    ``deadreckon`` integrates the IMU only; DVL, depth and GPS records after
    initialisation are ignored.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return replay(
        sensor_log,
        STEPS,
        cfg,
        source=mode,
        corrections=mode == "inekf",
        initial=initial,
        on_step=on_step,
    )
