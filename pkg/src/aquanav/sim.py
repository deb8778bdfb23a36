"""Ground-truth trajectories, synthetic sensor logs and water-quality fields.

Vehicles fly level (attitude is yaw only) and face along the path. Speed
and depth ramp in with raised-cosine profiles so a run can start at rest on
the surface, which is where the filter is anchored.

IMU readings at ``t_k`` are the averages over ``[t_k, t_k+1]``, as a
delta-velocity IMU reports them: integrating them with the filter's
discrete model reproduces the truth at the sample instants.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .config import DvlExtrinsics, FilterConfig, NoiseModel
from .geo import GeoRef, to_geo
from .liegroup import skew
from .records import (
    WQ_UNITS,
    DepthSample,
    DvlSample,
    GpsSample,
    ImuSample,
    SensorLog,
    TYPE_ORDER,
    WqRecord,
    record_type,
)
from .trajectory import TrajectoryEstimate

GRAVITY = np.array([0.0, 0.0, -9.81])
TRAJECTORY_KINDS = ("lawnmower", "loiter", "straight")
GPS_SCHEDULES = ("continuous", "initial", "windows", "none")


@dataclass(frozen=True)
class NoiseSigmas:
    """Per-sample standard deviations of the simulated sensors."""

    gyro: float = 0.005
    accel: float = 0.05
    dvl: float = 0.02
    depth: float = 0.01
    gps: float = 1.0
    # Error of the AHRS heading handed to the filter at start-up (rad).
    heading: float = 0.0

    @classmethod
    def zero(cls) -> NoiseSigmas:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SensorRates:
    imu: float = 100.0
    dvl: float = 20.0
    depth: float = 20.0
    gps: float = 5.0

    def __post_init__(self):
        if min(self.imu, self.dvl, self.depth, self.gps) <= 0:
            raise ValueError("sensor rates must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "lawnmower"
    speed: float = 0.8
    depth: float = 0.2
    # Yo-yo excursion below ``depth`` and its period.
    depth_amplitude: float = 0.0
    depth_period: float = 60.0
    duration: float = 300.0
    ramp_time: float = 5.0
    dive_time: float = 5.0
    heading: float = 0.0
    leg_length: float = 50.0
    leg_spacing: float = 5.0
    legs: int | None = None
    loiter_radius: float = 10.0
    rates: SensorRates = field(default_factory=SensorRates)
    noise: NoiseSigmas = field(default_factory=NoiseSigmas)
    gps_schedule: str = "continuous"
    surface_period: float = 120.0
    surface_window: float = 10.0
    seed: int = 0
    origin_lat: float = 37.25
    origin_lon: float = -76.38
    dvl_rotation: tuple = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    dvl_lever_arm: tuple = (0.1, 0.0, -0.15)

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.gps_schedule not in GPS_SCHEDULES:
            raise ValueError(f"unknown GPS schedule {self.gps_schedule!r}")
        if self.duration <= 0 or self.speed < 0:
            raise ValueError("duration must be positive and speed non-negative")
        if isinstance(self.rates, dict):
            object.__setattr__(self, "rates", SensorRates(**self.rates))
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseSigmas(**self.noise))

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("dvl_rotation", "dvl_lever_arm"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @property
    def origin(self) -> GeoRef:
        return GeoRef(self.origin_lat, self.origin_lon)

    @property
    def extrinsics(self) -> DvlExtrinsics:
        return DvlExtrinsics(np.reshape(self.dvl_rotation, (3, 3)), self.dvl_lever_arm)


# --- path geometry ---------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """Straight line (``curvature == 0``) or circular arc of given length."""

    start: tuple[float, float]
    heading: float
    length: float
    curvature: float = 0.0

    def at(self, s: np.ndarray):
        s = np.asarray(s, dtype=float)
        x0, y0 = self.start
        k = self.curvature
        psi = self.heading + k * s
        if k == 0.0:
            x = x0 + s * math.cos(self.heading)
            y = y0 + s * math.sin(self.heading)
        else:
            x = x0 + (np.sin(psi) - math.sin(self.heading)) / k
            y = y0 - (np.cos(psi) - math.cos(self.heading)) / k
        return x, y, psi

    def end(self):
        x, y, psi = self.at(np.array(self.length))
        return (float(x), float(y)), float(psi)


class Path:
    def __init__(self, segments: list[Segment], closed: bool = False):
        self.segments = segments
        self.closed = closed
        self.bounds = np.cumsum([0.0] + [seg.length for seg in segments])

    @property
    def length(self) -> float:
        return float(self.bounds[-1])

    def evaluate(self, s):
        """Position, heading and signed curvature at arc lengths ``s``."""
        s = np.asarray(s, dtype=float)
        if self.closed:
            s = np.mod(s, self.length)
        s = np.clip(s, 0.0, self.length)
        idx = np.clip(np.searchsorted(self.bounds, s, side="right") - 1, 0, len(self.segments) - 1)
        x = np.empty_like(s)
        y = np.empty_like(s)
        psi = np.empty_like(s)
        kappa = np.empty_like(s)
        for i, seg in enumerate(self.segments):
            m = idx == i
            if not np.any(m):
                continue
            x[m], y[m], psi[m] = seg.at(s[m] - self.bounds[i])
            kappa[m] = seg.curvature
        return x, y, psi, kappa


def _chain(start, heading, pieces) -> list[Segment]:
    segs = []
    pos, hdg = start, heading
    for length, curvature in pieces:
        seg = Segment(pos, hdg, length, curvature)
        segs.append(seg)
        pos, hdg = seg.end()
    return segs


def lawnmower_path(legs: int, leg_length: float, spacing: float, heading: float = 0.0) -> Path:
    """Parallel legs joined by semicircular turns, alternating left and right."""
    r = spacing / 2.0
    pieces = []
    for i in range(legs):
        pieces.append((leg_length, 0.0))
        if i < legs - 1:
            k = 1.0 / r if i % 2 == 0 else -1.0 / r
            pieces.append((math.pi * r, k))
    return Path(_chain((0.0, 0.0), heading, pieces))


def loiter_path(radius: float, heading: float = 0.0) -> Path:
    return Path([Segment((0.0, 0.0), heading, 2 * math.pi * radius, 1.0 / radius)], closed=True)


def straight_path(length: float, heading: float = 0.0) -> Path:
    return Path([Segment((0.0, 0.0), heading, length)])


def _ramp(t: np.ndarray, T: float):
    """Raised-cosine 0 -> 1 over ``T`` seconds and its first two derivatives."""
    if T <= 0:
        return np.ones_like(t), np.zeros_like(t), np.zeros_like(t)
    inside = t < T
    a = np.pi * np.minimum(t, T) / T
    f = np.where(inside, 0.5 * (1 - np.cos(a)), 1.0)
    df = np.where(inside, 0.5 * np.pi / T * np.sin(a), 0.0)
    d2f = np.where(inside, 0.5 * (np.pi / T) ** 2 * np.cos(a), 0.0)
    return f, df, d2f


def _arc_length(t: np.ndarray, V: float, T: float):
    """Distance, speed and along-track acceleration for a ramped cruise."""
    f, df, _ = _ramp(t, T)
    if T <= 0:
        return V * t, V * f, V * df
    s = np.where(t < T, V * (t / 2 - T / (2 * np.pi) * np.sin(np.pi * np.minimum(t, T) / T)),
                 V * (t - T / 2))
    return s, V * f, V * df


@dataclass
class Truth:
    """Ground truth sampled on the IMU clock."""

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    yaw: np.ndarray
    yaw_rate: np.ndarray

    @property
    def R(self) -> np.ndarray:
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        R = np.zeros((len(self.t), 3, 3))
        R[:, 0, 0] = c
        R[:, 0, 1] = -s
        R[:, 1, 0] = s
        R[:, 1, 1] = c
        R[:, 2, 2] = 1.0
        return R

    def trajectory(self) -> TrajectoryEstimate:
        return TrajectoryEstimate(self.t, self.R, self.v, self.p, None, "truth")


def scenario_path(cfg: ScenarioConfig) -> Path:
    if cfg.kind == "straight":
        return straight_path(cfg.speed * cfg.duration + 1.0, cfg.heading)
    if cfg.kind == "loiter":
        return loiter_path(cfg.loiter_radius, cfg.heading)
    legs = cfg.legs
    if legs is None:
        per_leg = cfg.leg_length + math.pi * cfg.leg_spacing / 2
        legs = max(1, int(math.ceil(cfg.speed * cfg.duration / per_leg)) + 1)
    return lawnmower_path(legs, cfg.leg_length, cfg.leg_spacing, cfg.heading)


def imu_times(cfg: ScenarioConfig) -> np.ndarray:
    n = int(round(cfg.duration * cfg.rates.imu))
    return np.arange(n + 1) / cfg.rates.imu


def generate_truth(cfg: ScenarioConfig, path: Path | None = None) -> Truth:
    """Kinematically consistent truth on the IMU clock.

    Velocities and accelerations are analytic. Positions are the trapezoidal
    integral of the velocity, which is what the discrete kinematics produce
    from interval-averaged accelerations; they leave the analytic path by
    O(dt^2). The vehicle stops at the end of a non-closed path.
    """
    path = path if path is not None else scenario_path(cfg)
    t = imu_times(cfg)
    s, sdot, sddot = _arc_length(t, cfg.speed, cfg.ramp_time)
    if not path.closed:
        done = s >= path.length
        s = np.minimum(s, path.length)
        sdot = np.where(done, 0.0, sdot)
        sddot = np.where(done, 0.0, sddot)
    x, y, psi, kappa = path.evaluate(s)

    f, df, d2f = _ramp(t, cfg.dive_time)
    if cfg.depth_amplitude:
        w = 2 * np.pi / cfg.depth_period
        A = cfg.depth_amplitude
        h = cfg.depth + 0.5 * A * (1 - np.cos(w * t))
        dh = 0.5 * A * w * np.sin(w * t)
        d2h = 0.5 * A * w * w * np.cos(w * t)
    else:
        h, dh, d2h = cfg.depth * np.ones_like(t), np.zeros_like(t), np.zeros_like(t)
    depth = f * h
    ddepth = df * h + f * dh
    d2depth = d2f * h + 2 * df * dh + f * d2h

    tangent = np.stack([np.cos(psi), np.sin(psi)], axis=1)
    normal = np.stack([-np.sin(psi), np.cos(psi)], axis=1)
    v = np.column_stack([sdot[:, None] * tangent, -ddepth])
    p = np.empty_like(v)
    p[0] = (x[0], y[0], -depth[0])
    p[1:] = p[0] + np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t)[:, None], axis=0)
    a_xy = sddot[:, None] * tangent + (sdot**2 * kappa)[:, None] * normal
    a = np.column_stack([a_xy, -d2depth])
    return Truth(t, p, v, a, psi, sdot * kappa)


def _interval_imu(truth: Truth, gravity: np.ndarray):
    """Noise-free IMU readings averaged over each sample interval."""
    t = truth.t
    R = truth.R
    gyro = np.zeros((len(t), 3))
    accel = np.zeros((len(t), 3))
    if len(t) > 1:
        dt = np.diff(t)
        dyaw = np.angle(np.exp(1j * np.diff(truth.yaw)))
        gyro[:-1, 2] = dyaw / dt
        dv = np.diff(truth.v, axis=0) / dt[:, None]
        accel[:-1] = np.einsum("nji,nj->ni", R[:-1], dv - gravity)
    gyro[-1, 2] = truth.yaw_rate[-1]
    accel[-1] = R[-1].T @ (truth.a[-1] - gravity)
    return gyro, accel


def _tick_indices(n_imu: int, imu_rate: float, rate: float) -> np.ndarray:
    step = imu_rate / rate
    return np.unique(np.round(np.arange(0, n_imu, step)).astype(int))


def gps_available(t: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if cfg.gps_schedule == "continuous":
        return np.ones(t.shape, dtype=bool)
    if cfg.gps_schedule == "none":
        return np.zeros(t.shape, dtype=bool)
    if cfg.gps_schedule == "initial":
        return t <= t.min() if t.size else np.zeros(0, dtype=bool)
    return np.mod(t, cfg.surface_period) < cfg.surface_window


# Keeps innovation covariances invertible for noise-free scenarios.
_VAR_FLOOR = 1e-12


def matched_noise(noise: NoiseSigmas, imu_rate: float) -> NoiseModel:
    """Filter noise model consistent with the simulated sensors.

    IMU noise is white per sample, so its continuous-time density is the
    per-sample variance times the IMU period.
    """
    def var(sigma, scale=1.0):
        return max(sigma * sigma * scale, _VAR_FLOOR)

    period = 1.0 / imu_rate
    return NoiseModel(
        gyro=np.full(3, var(noise.gyro, period)),
        accel=np.full(3, var(noise.accel, period)),
        dvl=np.full(3, var(noise.dvl)),
        pseudo=np.array([1e6, 1e6, var(noise.depth)]),
    )


def filter_config_for(cfg: ScenarioConfig, **overrides) -> FilterConfig:
    """Calibration block for a scenario: origin, extrinsics, gravity and
    a noise model matched to the scenario's sensors."""
    kwargs = dict(
        gravity=GRAVITY,
        extrinsics=cfg.extrinsics,
        origin=cfg.origin,
        noise=matched_noise(cfg.noise, cfg.rates.imu),
        ekf_depth_var=max(cfg.noise.depth**2, _VAR_FLOOR),
    )
    kwargs.update(overrides)
    return FilterConfig(**kwargs)


def sample_sensors(truth: Truth, cfg: ScenarioConfig, filter_cfg: FilterConfig | None = None) -> SensorLog:
    """Time-ordered noisy sensor log for ``truth``."""
    filter_cfg = filter_cfg if filter_cfg is not None else filter_config_for(cfg)
    rng = np.random.default_rng(cfg.seed)
    nz = cfg.noise
    heading0 = float(truth.yaw[0] + nz.heading * rng.standard_normal())
    n = len(truth.t)
    R = truth.R
    gyro, accel = _interval_imu(truth, filter_cfg.gravity)
    gyro_m = gyro + nz.gyro * rng.standard_normal((n, 3))
    accel_m = accel + nz.accel * rng.standard_normal((n, 3))

    rate = cfg.rates
    ext = cfg.extrinsics
    T = skew(ext.t)
    dvl_idx = _tick_indices(n, rate.imu, rate.dvl)
    v_body = np.einsum("nji,nj->ni", R[dvl_idx], truth.v[dvl_idx])
    v_dvl = (v_body - gyro[dvl_idx] @ T.T) @ ext.R
    v_dvl = v_dvl + nz.dvl * rng.standard_normal(v_dvl.shape)

    depth_idx = _tick_indices(n, rate.imu, rate.depth)
    depth_m = -truth.p[depth_idx, 2] + nz.depth * rng.standard_normal(len(depth_idx))

    gps_idx = _tick_indices(n, rate.imu, rate.gps)
    gps_idx = gps_idx[gps_available(truth.t[gps_idx], cfg)]
    xy = truth.p[gps_idx, :2] + nz.gps * rng.standard_normal((len(gps_idx), 2))
    lat, lon = to_geo(xy[:, 0], xy[:, 1], cfg.origin)
    acc = nz.gps if nz.gps > 0 else 0.05

    t = truth.t
    records = [
        ImuSample(float(t[k]), tuple(map(float, gyro_m[k])), tuple(map(float, accel_m[k])))
        for k in range(n)
    ]
    records += [DvlSample(float(t[k]), tuple(map(float, v_dvl[i]))) for i, k in enumerate(dvl_idx)]
    records += [DepthSample(float(t[k]), float(depth_m[i])) for i, k in enumerate(depth_idx)]
    records += [
        GpsSample(float(t[k]), float(lat[i]), float(lon[i]), float(acc)) for i, k in enumerate(gps_idx)
    ]
    records.sort(key=lambda r: (r.t, TYPE_ORDER[record_type(r)]))
    meta = {
        "source": "aquanav.sim",
        "scenario": cfg.kind,
        "seed": cfg.seed,
        "initial_heading": heading0,
    }
    return SensorLog(records, filter_cfg, meta)


# --- water-quality fields --------------------------------------------------

FIELD_KINDS = ("constant", "linear", "plume")


@dataclass(frozen=True)
class FieldConfig:
    """Analytic scalar field.

    ``constant``: ``value``. ``linear``: ``offset + gradient . xyz``.
    ``plume``: ``baseline`` plus Gaussians given as
    ``{"amplitude", "center", "sigma"}`` mappings.
    """

    param: str
    kind: str = "constant"
    value: float = 0.0
    offset: float = 0.0
    gradient: tuple = (0.0, 0.0, 0.0)
    baseline: float = 0.0
    plumes: tuple = ()

    def __post_init__(self):
        if self.param not in WQ_UNITS:
            raise ValueError(f"unknown parameter {self.param!r}")
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")

    def __call__(self, xyz) -> np.ndarray:
        xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
        if self.kind == "constant":
            return np.full(len(xyz), float(self.value))
        if self.kind == "linear":
            return self.offset + xyz @ np.asarray(self.gradient, dtype=float)
        out = np.full(len(xyz), float(self.baseline))
        for plume in self.plumes:
            c = np.asarray(plume["center"], dtype=float)
            sig = np.broadcast_to(np.asarray(plume["sigma"], dtype=float), (3,))
            d2 = (((xyz - c) / sig) ** 2).sum(axis=1)
            out += plume["amplitude"] * np.exp(-0.5 * d2)
        return out


def sample_field(
    fld: FieldConfig,
    truth: Truth,
    rate: float = 1.0,
    noise: float = 0.0,
    seed: int = 0,
) -> list[WqRecord]:
    """One reading per ``1/rate`` seconds at the vehicle's true position."""
    imu_rate = 1.0 / float(np.median(np.diff(truth.t))) if len(truth.t) > 1 else rate
    idx = _tick_indices(len(truth.t), imu_rate, rate)
    values = fld(truth.p[idx])
    if noise:
        values = values + noise * np.random.default_rng(seed).standard_normal(len(idx))
    return [WqRecord(float(truth.t[k]), fld.param, float(val)) for k, val in zip(idx, values)]
