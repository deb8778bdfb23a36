"""Spherical Mercator projection around a local reference origin.

Local planar coordinates are East/North metres relative to the reference,
scaled by ``cos(lat0)`` so distances are metric near the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ProjectionDomainError

EARTH_RADIUS = 6378137.0
MAX_LATITUDE = 85.0


@dataclass(frozen=True)
class GeoRef:
    lat: float
    lon: float
    radius: float = EARTH_RADIUS

    def __post_init__(self):
        if not abs(self.lat) < MAX_LATITUDE:
            raise ProjectionDomainError(f"reference latitude {self.lat} outside |lat| < {MAX_LATITUDE}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def scale(self) -> float:
        return math.cos(math.radians(self.lat))

    @property
    def origin_xy(self) -> tuple[float, float]:
        return mercator_forward(self.lat, self.lon, self.radius)


def mercator_forward(lat, lon, radius: float = EARTH_RADIUS):
    lat = np.asarray(lat, dtype=float)
    if np.any(np.abs(lat) >= MAX_LATITUDE):
        raise ProjectionDomainError(f"latitude outside |lat| < {MAX_LATITUDE}")
    x = radius * np.radians(lon)
    y = radius * np.log(np.tan(np.pi / 4 + np.radians(lat) / 2))
    return x, y


def mercator_inverse(x, y, radius: float = EARTH_RADIUS):
    lon = np.degrees(np.asarray(x, dtype=float) / radius)
    lat = np.degrees(2 * np.arctan(np.exp(np.asarray(y, dtype=float) / radius)) - np.pi / 2)
    return lat, lon


def to_local(lat, lon, ref: GeoRef):
    """Geodetic degrees to local (x east, y north) metres. Vectorised."""
    x, y = mercator_forward(lat, lon, ref.radius)
    x0, y0 = ref.origin_xy
    k = ref.scale
    return (x - x0) * k, (y - y0) * k


def to_geo(x, y, ref: GeoRef):
    """Inverse of :func:`to_local`."""
    x0, y0 = ref.origin_xy
    k = ref.scale
    return mercator_inverse(np.asarray(x, dtype=float) / k + x0, np.asarray(y, dtype=float) / k + y0, ref.radius)


def great_circle_distance(lat1, lon1, lat2, lon2, radius: float = EARTH_RADIUS):
    """Haversine distance in metres."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * radius * np.arcsin(np.sqrt(h))
