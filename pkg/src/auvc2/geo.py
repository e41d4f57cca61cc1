"""WGS-84 points and a flat-earth local tangent plane.

Scenario geometry lives within a few km of a datum, so an equirectangular
projection is accurate to well under 0.1% inside the 20 km plan bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

M_PER_DEG_LAT = 111_320.0
ENU_VALIDITY_M = 50_000.0


class GeoValidationError(ValueError):
    """Raised for out-of-range coordinates or projection misuse."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise GeoValidationError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise GeoValidationError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class EnuPoint:
    """Meters east (x) and north (y) of the scenario origin."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeoValidationError("ENU coordinates must be finite")

    def distance_to(self, other: EnuPoint) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def latlon_to_enu(origin: GeoPoint, p: GeoPoint) -> EnuPoint:
    """Project p onto the east-north plane anchored at origin."""
    if abs(p.lat - origin.lat) >= 0.5:
        raise GeoValidationError(
            f"point {p.lat},{p.lon} too far from origin latitude for projection"
        )
    y = (p.lat - origin.lat) * M_PER_DEG_LAT
    x = (p.lon - origin.lon) * M_PER_DEG_LAT * math.cos(math.radians(origin.lat))
    return EnuPoint(x, y)


def enu_to_latlon(origin: GeoPoint, e: EnuPoint) -> GeoPoint:
    """Exact inverse of latlon_to_enu under the same origin."""
    if abs(e.x) >= ENU_VALIDITY_M or abs(e.y) >= ENU_VALIDITY_M:
        raise GeoValidationError(f"ENU point ({e.x}, {e.y}) outside validity bound")
    lat = origin.lat + e.y / M_PER_DEG_LAT
    lon = origin.lon + e.x / (M_PER_DEG_LAT * math.cos(math.radians(origin.lat)))
    return GeoPoint(lat, lon)
