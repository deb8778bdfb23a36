"""Timestamped sensor records and the log container that holds them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

Vec3 = tuple[float, float, float]

# Units reported by the multiparameter sonde, keyed by parameter name.
WQ_UNITS = {
    "temperature": "degC",
    "chlorophyll": "ug/L",
    "pH": "pH",
    "salinity": "PSU",
    "TSS": "mg/L",
    "TDS": "g/L",
}


def _finite(*values) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class ImuSample:
    t: float
    gyro: Vec3
    accel: Vec3

    def __post_init__(self):
        if not _finite(self.t, *self.gyro, *self.accel):
            raise ValueError(f"non-finite IMU sample at t={self.t}")


@dataclass(frozen=True)
class DvlSample:
    t: float
    velocity: Vec3
    valid: bool = True

    def __post_init__(self):
        if not math.isfinite(self.t) or (self.valid and not _finite(*self.velocity)):
            raise ValueError(f"non-finite DVL sample at t={self.t}")


@dataclass(frozen=True)
class DepthSample:
    """Pressure-derived depth, positive down."""

    t: float
    depth: float

    def __post_init__(self):
        if not _finite(self.t, self.depth):
            raise ValueError(f"non-finite depth sample at t={self.t}")


@dataclass(frozen=True)
class GpsSample:
    t: float
    lat: float
    lon: float
    accuracy: float = 1.0
    valid: bool = True

    def __post_init__(self):
        if not _finite(self.t, self.lat, self.lon, self.accuracy):
            raise ValueError(f"non-finite GPS sample at t={self.t}")
        if abs(self.lat) > 90 or abs(self.lon) > 180:
            raise ValueError(f"GPS fix out of range: lat={self.lat}, lon={self.lon}")
        if self.accuracy <= 0:
            raise ValueError("GPS accuracy must be positive")


@dataclass(frozen=True)
class WqRecord:
    t: float
    param: str
    value: float
    units: str = ""

    def __post_init__(self):
        if self.param not in WQ_UNITS:
            raise ValueError(f"unknown water-quality parameter {self.param!r}")
        if not _finite(self.t, self.value):
            raise ValueError(f"non-finite {self.param} value at t={self.t}")
        if not self.units:
            object.__setattr__(self, "units", WQ_UNITS[self.param])


SensorRecord = Union[ImuSample, DvlSample, DepthSample, GpsSample, WqRecord]

RECORD_TYPES = {
    ImuSample: "imu",
    DvlSample: "dvl",
    DepthSample: "depth",
    GpsSample: "gps",
    WqRecord: "wq",
}

# Tie-break for records sharing a timestamp: predict before correcting.
TYPE_ORDER = {"imu": 0, "dvl": 1, "depth": 2, "gps": 3, "wq": 4}


def record_type(rec: SensorRecord) -> str:
    return RECORD_TYPES[type(rec)]


@dataclass
class SensorLog:
    records: list
    calibration: "FilterConfig"  # noqa: F821
    meta: dict = field(default_factory=dict)
    rejects: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def of_type(self, kind) -> list:
        return [r for r in self.records if isinstance(r, kind)]

    @property
    def wq(self) -> list:
        return self.of_type(WqRecord)

    def time_span(self) -> tuple[float, float]:
        if not self.records:
            raise ValueError("empty log")
        return self.records[0].t, self.records[-1].t


def as_vec(v) -> np.ndarray:
    return np.asarray(v, dtype=float)
