"""3D points and rectilinear sample grids.

All coordinates are SI meters. Only the vector arithmetic the field and
kinematics code actually needs lives here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError


@dataclass(frozen=True)
class Point3:
    """A point (or free vector) in 3D space, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"Point3.{name} must be finite, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Point3":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))


def distance(a: Point3, b: Point3) -> float:
    """Euclidean distance between two points, meters."""
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


@dataclass(frozen=True)
class SampleGrid:
    """Rectilinear sampling volume.

    The grid spans ``[origin, origin + extent]`` along each axis with
    ``resolution`` inclusive samples. A singleton axis (resolution 1) is
    sampled at the midpoint of its extent, so :meth:`centered` puts a
    one-sample axis exactly on the requested center plane.

    Parameters
    ----------
    origin : Point3
        Low corner of the sampled volume.
    extents : tuple of float
        Axis extents (ex, ey, ez), meters, all > 0.
    resolution : tuple of int
        Sample counts (nx, ny, nz), all >= 1.
    """

    origin: Point3
    extents: tuple[float, float, float]
    resolution: tuple[int, int, int]

    def __post_init__(self):
        if len(self.extents) != 3 or len(self.resolution) != 3:
            raise DomainError("SampleGrid needs 3 extents and 3 resolutions")
        for e in self.extents:
            if not (math.isfinite(e) and e > 0):
                raise DomainError(f"grid extents must be positive, got {self.extents}")
        for n in self.resolution:
            if int(n) != n or n < 1:
                raise DomainError(f"grid resolution must be integer >= 1, got {self.resolution}")
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "resolution", tuple(int(n) for n in self.resolution))

    @classmethod
    def centered(cls, center: Point3, extents, resolution) -> "SampleGrid":
        """Grid whose sampled volume is centered on ``center``."""
        ex, ey, ez = (float(e) for e in extents)
        origin = Point3(center.x - ex / 2, center.y - ey / 2, center.z - ez / 2)
        return cls(origin, (ex, ey, ez), tuple(resolution))

    @property
    def sample_count(self) -> int:
        nx, ny, nz = self.resolution
        return nx * ny * nz

    def axis_coords(self, axis: int) -> np.ndarray:
        """Sample coordinates along one axis (0=x, 1=y, 2=z)."""
        o = (self.origin.x, self.origin.y, self.origin.z)[axis]
        e = self.extents[axis]
        n = self.resolution[axis]
        if n == 1:
            return np.array([o + e / 2])
        return np.linspace(o, o + e, n)

    def points(self) -> np.ndarray:
        """All sample positions, shape (nx*ny*nz, 3), x-major C order."""
        xs, ys, zs = (self.axis_coords(k) for k in range(3))
        gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def contains(self, p: Point3, tol: float = 1e-12) -> bool:
        for axis, v in enumerate((p.x, p.y, p.z)):
            coords = self.axis_coords(axis)
            if v < coords[0] - tol or v > coords[-1] + tol:
                return False
        return True

    def index_position(self, flat_index: int) -> Point3:
        """Position of a sample given its flat x-major index."""
        nx, ny, nz = self.resolution
        if not 0 <= flat_index < self.sample_count:
            raise GeometryError(f"flat index {flat_index} outside grid with {self.sample_count} samples")
        ix, rem = divmod(flat_index, ny * nz)
        iy, iz = divmod(rem, nz)
        return Point3(
            float(self.axis_coords(0)[ix]),
            float(self.axis_coords(1)[iy]),
            float(self.axis_coords(2)[iz]),
        )
