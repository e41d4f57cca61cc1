"""Mission plan model, boustrophedon survey generation, plan validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .geo import EnuPoint, GeoPoint, GeoValidationError, latlon_to_enu

PLAN_GEOMETRY_BOUND_M = 20_000.0


class PlanValidationError(ValueError):
    pass


@dataclass(frozen=True)
class SurveyArea:
    """Rectangle anchored at corner, rotated CCW about it."""

    corner: GeoPoint
    width_m: float
    height_m: float
    rotation_deg: float = 0.0

    def __post_init__(self) -> None:
        if self.width_m <= 0 or self.height_m <= 0:
            raise PlanValidationError("survey area extents must be positive")
        if not 0.0 <= self.rotation_deg < 360.0:
            raise PlanValidationError("rotation_deg must lie in [0, 360)")


@dataclass(frozen=True)
class SurveyTask:
    area: SurveyArea
    spacing_m: float

    def __post_init__(self) -> None:
        if self.spacing_m <= 0:
            raise PlanValidationError("spacing_m must be positive")


@dataclass(frozen=True)
class ReacquireTask:
    target: GeoPoint


ObjectiveKind = Union[SurveyTask, ReacquireTask]


class ObjectiveState(Enum):
    PENDING = "pending"
    ACTIVE = "active"
    COMPLETE = "complete"
    ABORTED = "aborted"


@dataclass
class Objective:
    id: int
    name: str
    kind: ObjectiveKind
    state: ObjectiveState = ObjectiveState.PENDING

    def __post_init__(self) -> None:
        if not 1 <= self.id <= 250:
            raise PlanValidationError(f"objective id {self.id} outside 1..250")


@dataclass
class MissionPlan:
    origin: GeoPoint
    launch: GeoPoint
    recovery: GeoPoint
    shore_station: GeoPoint
    objectives: list[Objective] = field(default_factory=list)


@dataclass(frozen=True)
class Track:
    waypoints: tuple[EnuPoint, ...]

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise PlanValidationError("a track needs at least two waypoints")
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if a == b:
                raise PlanValidationError("consecutive track waypoints must differ")

    def length_m(self) -> float:
        return sum(a.distance_to(b) for a, b in zip(self.waypoints, self.waypoints[1:]))


def lawnmower_leg_count(height_m: float, spacing_m: float) -> int:
    return math.ceil(height_m / spacing_m)


def generate_lawnmower(area: SurveyArea, spacing_m: float, origin: GeoPoint) -> Track:
    """Parallel-leg coverage path over the area, as ENU waypoints.

    Legs run along the width axis at half-spacing insets, alternating
    direction; the final leg is pulled back so it stays inside the area.
    """
    if spacing_m <= 0:
        raise PlanValidationError("spacing_m must be positive")
    if spacing_m > area.height_m:
        raise PlanValidationError(
            f"spacing {spacing_m} m exceeds area height {area.height_m} m"
        )
    corner = latlon_to_enu(origin, area.corner)
    rot = math.radians(area.rotation_deg)
    cos_r, sin_r = math.cos(rot), math.sin(rot)

    def place(lx: float, ly: float) -> EnuPoint:
        # rotate CCW about the corner, then translate
        return EnuPoint(
            corner.x + lx * cos_r - ly * sin_r,
            corner.y + lx * sin_r + ly * cos_r,
        )

    points: list[EnuPoint] = []
    for i in range(lawnmower_leg_count(area.height_m, spacing_m)):
        y = min((i + 0.5) * spacing_m, area.height_m - spacing_m / 2.0)
        if i % 2 == 0:
            points += [place(0.0, y), place(area.width_m, y)]
        else:
            points += [place(area.width_m, y), place(0.0, y)]
    return Track(tuple(points))


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str


def validate_plan(plan: MissionPlan) -> list[Violation]:
    """Return every violated plan invariant; an empty list means valid."""
    violations: list[Violation] = []
    if not plan.objectives:
        violations.append(Violation("NO_OBJECTIVES", "plan has no objectives"))
    seen: set[int] = set()
    for obj in plan.objectives:
        if obj.id in seen:
            violations.append(
                Violation("DUPLICATE_OBJECTIVE_ID", f"objective id {obj.id} repeats")
            )
        seen.add(obj.id)
        if isinstance(obj.kind, SurveyTask) and obj.kind.spacing_m > obj.kind.area.height_m:
            violations.append(
                Violation(
                    "SPACING_EXCEEDS_HEIGHT",
                    f"objective {obj.id}: spacing {obj.kind.spacing_m} m > height "
                    f"{obj.kind.area.height_m} m",
                )
            )
    for label, enu in _plan_geometry(plan):
        if enu is None:
            violations.append(
                Violation("GEOMETRY_TOO_FAR", f"{label} beyond projection validity")
            )
        elif math.hypot(enu.x, enu.y) > PLAN_GEOMETRY_BOUND_M:
            violations.append(
                Violation("GEOMETRY_TOO_FAR", f"{label} more than 20 km from origin")
            )
    return violations


def area_corners_enu(area: SurveyArea, origin: GeoPoint) -> list[EnuPoint]:
    corner = latlon_to_enu(origin, area.corner)
    rot = math.radians(area.rotation_deg)
    cos_r, sin_r = math.cos(rot), math.sin(rot)
    out = []
    for lx, ly in ((0, 0), (area.width_m, 0), (area.width_m, area.height_m), (0, area.height_m)):
        out.append(
            EnuPoint(corner.x + lx * cos_r - ly * sin_r, corner.y + lx * sin_r + ly * cos_r)
        )
    return out


def _plan_geometry(plan: MissionPlan) -> list[tuple[str, Optional[EnuPoint]]]:
    named: list[tuple[str, Optional[EnuPoint]]] = []

    def project(label: str, p: GeoPoint) -> None:
        try:
            named.append((label, latlon_to_enu(plan.origin, p)))
        except GeoValidationError:
            named.append((label, None))

    project("launch", plan.launch)
    project("recovery", plan.recovery)
    project("shore_station", plan.shore_station)
    for obj in plan.objectives:
        if isinstance(obj.kind, SurveyTask):
            try:
                for i, e in enumerate(area_corners_enu(obj.kind.area, plan.origin)):
                    named.append((f"objective {obj.id} corner {i}", e))
            except GeoValidationError:
                named.append((f"objective {obj.id} area", None))
        else:
            project(f"objective {obj.id} target", obj.kind.target)
    return named
