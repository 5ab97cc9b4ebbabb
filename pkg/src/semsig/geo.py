"""Local tangent-plane projection, planar distance and azimuth.

Coordinates are projected with an equirectangular approximation around a
fixed origin. At city scale (well under one degree of latitude from the
origin) the error is below a decimeter, which keeps azimuths and distances
consistent with plain planar geometry.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .model import GeoPoint

EARTH_RADIUS_M = 6371008.8
MAX_OFFSET_DEG = 1.0

_M_PER_DEG = math.pi / 180.0 * EARTH_RADIUS_M


class PlanarPoint(NamedTuple):
    x_east: float
    y_north: float


def _check_offset(origin: GeoPoint, lat: float) -> None:
    if abs(lat - origin.lat) >= MAX_OFFSET_DEG:
        raise ValueError(
            f"latitude {lat} is {abs(lat - origin.lat):.3f} deg from the projection origin; "
            "the local projection is only valid at city scale"
        )


def project(origin: GeoPoint, p: GeoPoint) -> PlanarPoint:
    _check_offset(origin, p.lat)
    x = (p.lon - origin.lon) * _M_PER_DEG * math.cos(math.radians(origin.lat))
    y = (p.lat - origin.lat) * _M_PER_DEG
    return PlanarPoint(x, y)


def unproject(origin: GeoPoint, p: PlanarPoint) -> GeoPoint:
    lon = origin.lon + p.x_east / (_M_PER_DEG * math.cos(math.radians(origin.lat)))
    lat = origin.lat + p.y_north / _M_PER_DEG
    return GeoPoint(lon, lat)


def project_many(origin: GeoPoint, lon, lat) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`project` over arrays of degrees."""
    lon = np.asarray(lon, dtype=np.float64)
    lat = np.asarray(lat, dtype=np.float64)
    if lat.size and np.max(np.abs(lat - origin.lat)) >= MAX_OFFSET_DEG:
        bad = float(lat[np.argmax(np.abs(lat - origin.lat))])
        _check_offset(origin, bad)
    x = (lon - origin.lon) * (_M_PER_DEG * math.cos(math.radians(origin.lat)))
    y = (lat - origin.lat) * _M_PER_DEG
    return x, y


def planar_distance(a: PlanarPoint, b: PlanarPoint) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def azimuth_deg(viewpoint: PlanarPoint, obj: PlanarPoint) -> float:
    """Clockwise angle from north, in [0, 360)."""
    dx = obj[0] - viewpoint[0]
    dy = obj[1] - viewpoint[1]
    if dx == 0.0 and dy == 0.0:
        raise ValueError("azimuth is undefined for coincident points")
    # same arithmetic as the vectorized path, so bins agree bit for bit
    return float(azimuth_many(np.array([dx], dtype=np.float64), np.array([dy], dtype=np.float64))[0])


def azimuth_many(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    az = np.degrees(np.arctan2(dx, dy)) % 360.0
    # -tiny % 360 rounds to exactly 360.0
    az[az >= 360.0] = 0.0
    return az
