"""Vortex-ring formation math and launched-vortex kinematics.

The cannon pushes a theoretical cylindrical slug of air (volume ``V``)
through a circular aperture of diameter ``D``. The slug length and the
slug-length-to-diameter ratio decide whether a single stable ring forms;
the classic formation-number band is 3.6-4.5, with 4.5 the stability
ceiling. Kinematics use the slug model: slug speed = slug length over the
displacement time, ring speed = half the slug speed, then constant-speed
straight-line travel (decay is an extension point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import DomainError, TargetingError
from .geometry import Point3, distance

STABILITY_LIMIT = 4.5
FORMATION_BAND = (3.6, 4.5)

DEFAULT_ANGULAR_TOLERANCE_RAD = math.radians(5.0)


@dataclass(frozen=True)
class CannonSpec:
    """Air-cannon geometry and actuation parameters.

    Parameters
    ----------
    slug_volume : float
        Displaced air volume per shot, m^3.
    aperture_diameter : float
        Aperture diameter, meters.
    cone_time : float
        Time for the displaced slug to pass the aperture, seconds.
    actuation_rate_hz : float
        Maximum repeat rate of the driver, Hz.
    mechanical_latency : float
        Trigger-to-launch delay, seconds.
    """

    slug_volume: float
    aperture_diameter: float
    cone_time: float
    actuation_rate_hz: float = 30.0
    mechanical_latency: float = 0.0

    def __post_init__(self):
        if not self.slug_volume > 0:
            raise DomainError(f"slug volume must be > 0, got {self.slug_volume}")
        if not self.aperture_diameter > 0:
            raise DomainError(f"aperture diameter must be > 0, got {self.aperture_diameter}")
        if not self.cone_time > 0:
            raise DomainError(f"cone time must be > 0, got {self.cone_time}")
        if not self.actuation_rate_hz > 0:
            raise DomainError(f"actuation rate must be > 0, got {self.actuation_rate_hz}")
        if self.mechanical_latency < 0:
            raise DomainError(f"mechanical latency must be >= 0, got {self.mechanical_latency}")

    def slug_length(self) -> float:
        return slug_length(self.slug_volume, self.aperture_diameter)

    def stroke_ratio(self) -> float:
        return stroke_ratio(self.slug_length(), self.aperture_diameter)

    def vortex_speeds(self) -> "VortexSpeeds":
        return vortex_speed(self.slug_length(), self.cone_time)


def slug_length(slug_volume: float, aperture_diameter: float) -> float:
    """Length of the displaced air cylinder: 4*V / (pi*D^2)."""
    if not slug_volume > 0:
        raise DomainError(f"slug volume must be > 0, got {slug_volume}")
    if not aperture_diameter > 0:
        raise DomainError(f"aperture diameter must be > 0, got {aperture_diameter}")
    return 4.0 * slug_volume / (math.pi * aperture_diameter**2)


def stroke_ratio(slug_len: float, aperture_diameter: float) -> float:
    """Slug length over aperture diameter."""
    if not aperture_diameter > 0:
        raise DomainError(f"aperture diameter must be > 0, got {aperture_diameter}")
    return slug_len / aperture_diameter


class StabilityResult(NamedTuple):
    stable: bool
    margin: float
    ratio: float


def is_stable(slug_volume: float, aperture_diameter: float) -> StabilityResult:
    """Single stable ring iff 4*V / (pi*D^3) <= 4.5.

    ``margin`` is 4.5 minus the ratio: positive inside the stable region,
    zero exactly on the boundary.
    """
    ratio = stroke_ratio(slug_length(slug_volume, aperture_diameter), aperture_diameter)
    margin = STABILITY_LIMIT - ratio
    return StabilityResult(margin >= 0.0, margin, ratio)


def classify_formation(slug_volume: float, aperture_diameter: float) -> str:
    """Place the stroke ratio against the 3.6-4.5 formation-number band."""
    ratio = is_stable(slug_volume, aperture_diameter).ratio
    lo, hi = FORMATION_BAND
    if ratio < lo:
        return "stable, sub-formation"
    if ratio <= hi:
        return "at formation"
    return "unstable"


def min_stable_aperture(slug_volume: float) -> float:
    """Smallest aperture diameter that keeps the ring stable.

    Closed form: D = (4*V / (4.5*pi))^(1/3); the stability margin at the
    returned diameter is zero to floating-point precision.
    """
    if not slug_volume > 0:
        raise DomainError(f"slug volume must be > 0, got {slug_volume}")
    return (4.0 * slug_volume / (STABILITY_LIMIT * math.pi)) ** (1.0 / 3.0)


class VortexSpeeds(NamedTuple):
    slug_speed: float
    vortex_speed: float


def vortex_speed(slug_len: float, cone_time: float) -> VortexSpeeds:
    """Slug speed L/t_cone and ring translation speed, half the slug speed."""
    if not cone_time > 0:
        raise DomainError(f"cone time must be > 0, got {cone_time}")
    if slug_len < 0:
        raise DomainError(f"slug length must be >= 0, got {slug_len}")
    v_s = slug_len / cone_time
    return VortexSpeeds(v_s, v_s / 2.0)


@dataclass(frozen=True)
class VortexShot:
    """Kinematic state of one launched vortex ring.

    The constructor enforces the defining ratio ``vortex_speed ==
    slug_speed / 2`` exactly (halving is exact in binary floating point)
    and requires a unit direction.
    """

    launch_time: float
    origin: Point3
    direction: tuple[float, float, float]
    slug_speed: float
    vortex_speed: float

    def __post_init__(self):
        if self.slug_speed < 0:
            raise DomainError(f"slug speed must be >= 0, got {self.slug_speed}")
        if self.vortex_speed != self.slug_speed / 2.0:
            raise DomainError(
                f"vortex speed {self.vortex_speed} must equal slug_speed/2 = {self.slug_speed / 2.0}"
            )
        norm = math.sqrt(sum(d * d for d in self.direction))
        if abs(norm - 1.0) > 1e-9:
            raise DomainError(f"direction must be unit length, |d| = {norm}")

    @classmethod
    def launched(
        cls,
        spec: CannonSpec,
        origin: Point3,
        direction: tuple[float, float, float],
        launch_time: float = 0.0,
    ) -> "VortexShot":
        """Shot whose speeds follow from the cannon's slug model."""
        speeds = spec.vortex_speeds()
        return cls(launch_time, origin, direction, speeds.slug_speed, speeds.vortex_speed)

    @classmethod
    def aimed(
        cls,
        spec: CannonSpec,
        origin: Point3,
        target: Point3,
        launch_time: float = 0.0,
    ) -> "VortexShot":
        """Shot pointed from ``origin`` at ``target``."""
        d = target.as_array() - origin.as_array()
        norm = float(math.sqrt((d**2).sum()))
        if norm == 0.0:
            raise TargetingError("cannot aim at the cannon's own origin")
        d = d / norm
        d = d / float(math.sqrt((d**2).sum()))
        return cls.launched(spec, origin, (float(d[0]), float(d[1]), float(d[2])), launch_time)


def travel_time(
    shot: VortexShot,
    target: Point3,
    angular_tolerance_rad: float = DEFAULT_ANGULAR_TOLERANCE_RAD,
) -> float:
    """Constant-speed flight time from the shot origin to ``target``.

    The target must lie on the shot ray within the angular tolerance
    (default 5 degrees); a zero-distance target is treated as on-axis and
    returns 0.
    """
    if not shot.vortex_speed > 0:
        raise DomainError(f"vortex speed must be > 0 to travel, got {shot.vortex_speed}")
    d = distance(shot.origin, target)
    if d == 0.0:
        return 0.0
    to_target = (
        (target.x - shot.origin.x) / d,
        (target.y - shot.origin.y) / d,
        (target.z - shot.origin.z) / d,
    )
    cos_angle = sum(a * b for a, b in zip(to_target, shot.direction))
    cos_angle = max(-1.0, min(1.0, cos_angle))
    angle = math.acos(cos_angle)
    if angle > angular_tolerance_rad:
        raise TargetingError(
            f"target {math.degrees(angle):.2f} deg off the shot axis (tolerance {math.degrees(angular_tolerance_rad):.2f} deg)"
        )
    return d / shot.vortex_speed
