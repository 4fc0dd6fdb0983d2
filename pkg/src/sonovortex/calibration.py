"""Setting-to-force calibration fits and their inverses.

Two curve families cover the device: the cannon responds linearly to its
supply voltage, the ultrasound array follows ``F = f_max * sin^2(pi * p /
1248)`` in drive intensity. Fits are plain least squares; robust fitting
is out of scope.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .acoustic import INTENSITY_FULL_SCALE
from .errors import DomainError, FitError, OutOfRangeError
from .vortex import CannonSpec

KIND_CANNON = "cannon-linear"
KIND_ULTRASOUND = "ultrasound-sin2"


@dataclass(frozen=True)
class CalibrationPoint:
    """One measured (setting, force) pair; setting in volts or device units."""

    setting: float
    force: float

    def __post_init__(self):
        if self.force < 0:
            raise DomainError(f"measured force must be >= 0, got {self.force}")


@dataclass(frozen=True)
class CalibrationCurve:
    """A fitted setting-to-force map.

    ``slope``/``intercept`` are set for cannon-linear curves, ``f_max``
    for ultrasound-sin2 ones. ``residual`` is the RMS misfit of the
    training points and ``setting_range`` the span of settings they
    covered.
    """

    kind: str
    setting_range: tuple[float, float]
    slope: float | None = None
    intercept: float | None = None
    f_max: float | None = None
    residual: float = 0.0

    def __post_init__(self):
        lo, hi = self.setting_range
        if lo > hi:
            raise DomainError(f"setting range {self.setting_range} is inverted")
        if self.kind == KIND_CANNON:
            if self.slope is None or self.intercept is None:
                raise DomainError("cannon-linear curve needs slope and intercept")
            if min(self.predict(lo), self.predict(hi)) < -1e-12:
                raise DomainError("calibration curve predicts negative force within its calibrated range")
        elif self.kind == KIND_ULTRASOUND:
            if self.f_max is None:
                raise DomainError("ultrasound-sin2 curve needs f_max")
            if self.f_max < 0:
                raise DomainError("calibration curve predicts negative force within its calibrated range")
        else:
            raise DomainError(f"unknown calibration curve kind {self.kind!r}")

    def predict(self, setting: float) -> float:
        if self.kind == KIND_CANNON:
            return self.slope * setting + self.intercept  # type: ignore[operator]
        return self.f_max * math.sin(math.pi * setting / INTENSITY_FULL_SCALE) ** 2  # type: ignore[operator]

    def max_force(self) -> float:
        """Largest force the curve can be inverted for."""
        if self.kind == KIND_CANNON:
            return max(self.predict(self.setting_range[0]), self.predict(self.setting_range[1]))
        return float(self.f_max)  # type: ignore[arg-type]

    def min_force(self) -> float:
        if self.kind == KIND_CANNON:
            return min(self.predict(self.setting_range[0]), self.predict(self.setting_range[1]))
        return 0.0


def fit_cannon_curve(points: list[CalibrationPoint]) -> CalibrationCurve:
    """Least-squares line ``force = slope * setting + intercept``."""
    settings = np.array([p.setting for p in points], dtype=float)
    forces = np.array([p.force for p in points], dtype=float)
    if len(set(settings.tolist())) < 2:
        raise FitError(f"need >= 2 distinct settings to fit a line, got {len(set(settings.tolist()))}")
    slope, intercept = np.polyfit(settings, forces, 1)
    pred = slope * settings + intercept
    residual = float(np.sqrt(np.mean((pred - forces) ** 2)))
    return CalibrationCurve(
        kind=KIND_CANNON,
        setting_range=(float(settings.min()), float(settings.max())),
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
    )


def fit_ultrasound_fmax(points: list[CalibrationPoint]) -> CalibrationCurve:
    """Least-squares scale of ``F = f_max * sin^2(pi*p/1248)``.

    Closed form for a one-parameter linear model: f_max = sum(F*s) /
    sum(s^2) with s the sin^2 basis. Points where the basis vanishes
    (p = 0 or p = 1248) carry no information; if all points do, the scale
    is unidentifiable.
    """
    if not points:
        raise FitError("need >= 1 calibration point")
    settings = np.array([p.setting for p in points], dtype=float)
    forces = np.array([p.force for p in points], dtype=float)
    if np.any(settings < 0) or np.any(settings > INTENSITY_FULL_SCALE):
        raise DomainError(f"intensity settings must lie in [0, {INTENSITY_FULL_SCALE:g}]")
    basis = np.sin(np.pi * settings / INTENSITY_FULL_SCALE) ** 2
    # endpoint settings (0 and 1248) leave only rounding noise in the basis
    basis[basis <= 1e-12] = 0.0
    denom = float((basis**2).sum())
    if denom == 0.0:
        raise FitError("all points sit at sin^2 = 0; f_max is unidentifiable")
    f_max = float((forces * basis).sum() / denom)
    if f_max < 0:
        raise FitError(f"fitted f_max is negative ({f_max}); data inconsistent with the sin^2 law")
    residual = float(np.sqrt(np.mean((f_max * basis - forces) ** 2)))
    return CalibrationCurve(
        kind=KIND_ULTRASOUND,
        setting_range=(float(settings.min()), float(settings.max())),
        f_max=f_max,
        residual=residual,
    )


def setting_for_force(curve: CalibrationCurve, force: float) -> float:
    """Inverse of the fitted curve.

    For sin^2 curves the monotone branch in [0, 624] is returned. Forces
    above the curve maximum (or outside the calibrated span for linear
    curves) raise :class:`OutOfRangeError`.
    """
    if force < 0:
        raise DomainError(f"force must be >= 0, got {force}")
    if force > curve.max_force() + 1e-12:
        raise OutOfRangeError(f"force {force} above curve maximum {curve.max_force()}")
    if curve.kind == KIND_CANNON:
        if force < curve.min_force() - 1e-12:
            raise OutOfRangeError(f"force {force} below curve minimum {curve.min_force()}")
        if curve.slope == 0:
            raise OutOfRangeError("flat cannon curve cannot be inverted")
        return (force - curve.intercept) / curve.slope  # type: ignore[operator]
    ratio = min(1.0, force / curve.f_max)  # type: ignore[operator]
    return INTENSITY_FULL_SCALE / math.pi * math.asin(math.sqrt(ratio))


def cone_time_for_speed(slug_len: float, observed_vortex_speed: float) -> float:
    """Displacement time implied by an observed ring speed: L / (2*v).

    A zero slug length is degenerate and maps to a zero cone time.
    """
    if not observed_vortex_speed > 0:
        raise DomainError(f"observed vortex speed must be > 0, got {observed_vortex_speed}")
    if slug_len < 0:
        raise DomainError(f"slug length must be >= 0, got {slug_len}")
    return slug_len / (2.0 * observed_vortex_speed)


def implied_t_cone(spec: CannonSpec, observed_vortex_speed: float) -> float:
    """Recover the cone time of ``spec`` from a measured average ring speed."""
    return cone_time_for_speed(spec.slug_length(), observed_vortex_speed)


def load_points_csv(fileobj) -> list[CalibrationPoint]:
    """Read calibration points from CSV with a ``setting,force_mN`` header.

    Forces are converted from millinewtons at this boundary; everything
    downstream is SI newtons.
    """
    reader = csv.reader(fileobj)
    try:
        header = next(reader)
    except StopIteration:
        raise FitError("calibration CSV is empty") from None
    if [h.strip() for h in header] != ["setting", "force_mN"]:
        raise DomainError(f"calibration CSV must have header 'setting,force_mN', got {','.join(header)!r}")
    points = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise DomainError(f"calibration CSV line {lineno}: expected 2 columns, got {len(row)}")
        try:
            setting = float(row[0])
            force_mn = float(row[1])
        except ValueError as exc:
            raise DomainError(f"calibration CSV line {lineno}: {exc}") from None
        points.append(CalibrationPoint(setting=setting, force=force_mn * 1e-3))
    return points
