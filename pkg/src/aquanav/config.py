"""Filter configuration and calibration.

Covariance defaults follow the comparison protocol used for both filters
(``P0 = Q = R = 0.1 I``). The depth pseudo-measurement is the exception:
its horizontal entries are effectively uninformative and its vertical
entry reflects a high-resolution pressure sensor.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .geo import GeoRef
from .liegroup import is_rotation

DEFAULT_COV = 0.1


def _diag(values) -> np.ndarray:
    return np.diag(np.asarray(values, dtype=float))


def _check_psd(name: str, M: np.ndarray):
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise ValueError(f"{name} must be a finite 3x3 matrix")
    if not np.allclose(M, M.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M).min() < -1e-12:
        raise ValueError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class NoiseModel:
    """Sensor noise covariances (3x3 each).

    ``gyro`` and ``accel`` are continuous-time densities, scaled by the step
    length during propagation. ``dvl`` is the per-reading velocity
    covariance in the DVL frame and ``pseudo`` the covariance of the
    ``(x, y, depth)`` pseudo-position used by the depth update.
    """

    gyro: np.ndarray = field(default_factory=lambda: DEFAULT_COV * np.eye(3))
    accel: np.ndarray = field(default_factory=lambda: DEFAULT_COV * np.eye(3))
    dvl: np.ndarray = field(default_factory=lambda: DEFAULT_COV * np.eye(3))
    pseudo: np.ndarray = field(default_factory=lambda: _diag([1e6, 1e6, 1e-4]))

    def __post_init__(self):
        for f in dataclasses.fields(self):
            M = np.asarray(getattr(self, f.name), dtype=float)
            if M.ndim == 1:
                M = np.diag(M)
            _check_psd(f.name, M)
            object.__setattr__(self, f.name, M)


@dataclass(frozen=True)
class DvlExtrinsics:
    """DVL-to-IMU rigid transform: rotation ``R`` and lever arm ``t`` (m)."""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float).reshape(3, 3)
        t = np.asarray(self.t, dtype=float).reshape(3)
        if not is_rotation(R):
            raise ValueError("DVL extrinsic rotation is not a valid rotation matrix")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)


@dataclass(frozen=True)
class FilterConfig:
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    p0_scale: float = DEFAULT_COV
    noise: NoiseModel = field(default_factory=NoiseModel)
    extrinsics: DvlExtrinsics = field(default_factory=DvlExtrinsics)
    origin: GeoRef | None = None
    # Longest single prediction step before the caller must re-anchor.
    max_dt: float = 0.5
    # Side on which the depth correction is applied; "right" is X exp(K nu).
    depth_correction: str = "right"
    # Scalar measurement variance of the EKF baseline's depth channel.
    ekf_depth_var: float = DEFAULT_COV
    allow_any_gravity: bool = False

    def __post_init__(self):
        g = np.asarray(self.gravity, dtype=float).reshape(3)
        object.__setattr__(self, "gravity", g)
        if not self.allow_any_gravity and not 9.7 <= np.linalg.norm(g) <= 9.9:
            raise ValueError(f"|g| = {np.linalg.norm(g):.4f} outside [9.7, 9.9] m/s^2")
        if self.p0_scale <= 0:
            raise ValueError("p0_scale must be positive")
        if self.max_dt <= 0:
            raise ValueError("max_dt must be positive")
        if self.depth_correction not in ("right", "left"):
            raise ValueError("depth_correction must be 'right' or 'left'")

    def with_origin(self, origin: GeoRef) -> FilterConfig:
        return dataclasses.replace(self, origin=origin)

    def to_dict(self) -> dict:
        """Calibration block as stored in log headers and config files."""
        n = self.noise
        out = {
            "extrinsics": {
                "R": [float(x) for x in self.extrinsics.R.ravel()],
                "t": [float(x) for x in self.extrinsics.t],
            },
            "noise": {
                "gyro": [float(x) for x in np.diag(n.gyro)],
                "accel": [float(x) for x in np.diag(n.accel)],
                "dvl": [float(x) for x in np.diag(n.dvl)],
                "pseudo": [float(x) for x in np.diag(n.pseudo)],
            },
            "gravity": [float(x) for x in self.gravity],
            "origin": None
            if self.origin is None
            else {"lat": self.origin.lat, "lon": self.origin.lon, "radius": self.origin.radius},
            "p0_scale": self.p0_scale,
            "max_dt": self.max_dt,
            "depth_correction": self.depth_correction,
            "ekf_depth_var": self.ekf_depth_var,
            "allow_any_gravity": self.allow_any_gravity,
        }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> FilterConfig:
        kwargs = {}
        if "extrinsics" in d:
            e = d["extrinsics"]
            kwargs["extrinsics"] = DvlExtrinsics(
                np.reshape(e.get("R", np.eye(3).ravel()), (3, 3)), e.get("t", (0, 0, 0))
            )
        if "noise" in d:
            kwargs["noise"] = NoiseModel(**{k: _diag(v) for k, v in d["noise"].items()})
        if d.get("origin"):
            o = d["origin"]
            kwargs["origin"] = GeoRef(o["lat"], o["lon"], o.get("radius", GeoRef.radius))
        for key in ("gravity", "p0_scale", "max_dt", "depth_correction",
                    "ekf_depth_var", "allow_any_gravity"):
            if key in d:
                kwargs[key] = d[key]
        return cls(**kwargs)


def load_config(path) -> dict:
    """Read a YAML config file with optional ``filter`` and ``scenario`` sections."""
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return data
