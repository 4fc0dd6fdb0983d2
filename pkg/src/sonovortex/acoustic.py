"""Phased-array focusing and monochromatic pressure-field simulation.

Implements per-transducer focal delays, point-source superposition of the
driven array, focal-spot width measurement, the sin^2 intensity-to-force
conversion, and rectangular amplitude-modulation envelopes.

Units are SI throughout; drive intensity is the dimensionless device unit
in [0, 1248].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GeometryError
from .geometry import Point3, SampleGrid

INTENSITY_FULL_SCALE = 1248.0

#: Distance below which a field sample or focus counts as coincident with a
#: transducer element.
COINCIDENCE_EPS = 1e-12


@dataclass(frozen=True)
class TransducerArray:
    """Planar rectangular grid of ultrasound emitters.

    Element (i, j) sits at ``origin + i*pitch*u + j*pitch*v``; ``u`` and
    ``v`` must be orthonormal. Element (0, 0) is the delay reference.

    Parameters
    ----------
    rows, cols : int
        Grid shape, both >= 1.
    pitch : float
        Center-to-center element spacing, meters.
    origin : Point3
        Position of element (0, 0).
    u, v : tuple of float
        Unit vectors along the row and column indices.
    carrier_frequency_hz : float
        Drive frequency, Hz. 40 kHz is the conventional default for
        airborne tactile arrays; the device value is configurable.
    speed_of_sound : float
        Propagation speed in air, m/s (340 m/s at 20 degC by default).
    """

    rows: int = 16
    cols: int = 16
    pitch: float = 0.010
    origin: Point3 = field(default_factory=lambda: Point3(-0.075, -0.075, 0.0))
    u: tuple[float, float, float] = (1.0, 0.0, 0.0)
    v: tuple[float, float, float] = (0.0, 1.0, 0.0)
    carrier_frequency_hz: float = 40_000.0
    speed_of_sound: float = 340.0
    reference: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DomainError(f"array shape must be >= 1x1, got {self.rows}x{self.cols}")
        if not self.pitch > 0:
            raise DomainError(f"pitch must be > 0, got {self.pitch}")
        if not self.carrier_frequency_hz > 0:
            raise DomainError(f"carrier frequency must be > 0, got {self.carrier_frequency_hz}")
        if not self.speed_of_sound > 0:
            raise DomainError(f"speed of sound must be > 0, got {self.speed_of_sound}")
        ri, rj = self.reference
        if not (0 <= ri < self.rows and 0 <= rj < self.cols):
            raise DomainError(f"reference index {self.reference} outside {self.rows}x{self.cols} array")
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if abs(np.linalg.norm(u) - 1) > 1e-9 or abs(np.linalg.norm(v) - 1) > 1e-9:
            raise DomainError("array axis vectors must be unit length")
        if abs(float(u @ v)) > 1e-9:
            raise DomainError("array axis vectors must be orthogonal")

    @classmethod
    def centered(cls, rows: int = 16, cols: int = 16, pitch: float = 0.010, **kwargs) -> "TransducerArray":
        """Array in the z=0 plane, grid centered on the coordinate origin."""
        origin = Point3(-(rows - 1) / 2 * pitch, -(cols - 1) / 2 * pitch, 0.0)
        return cls(rows=rows, cols=cols, pitch=pitch, origin=origin, **kwargs)

    @property
    def wavelength(self) -> float:
        return self.speed_of_sound / self.carrier_frequency_hz

    def element_positions(self) -> np.ndarray:
        """Element centers, shape (rows, cols, 3)."""
        i = np.arange(self.rows)[:, None, None]
        j = np.arange(self.cols)[None, :, None]
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        return self.origin.as_array() + i * self.pitch * u + j * self.pitch * v

    def center(self) -> Point3:
        """Geometric center of the element grid."""
        pos = self.element_positions().reshape(-1, 3)
        return Point3.from_array(pos.mean(axis=0))


@dataclass(frozen=True)
class DelayTable:
    """Per-transducer emission delays, seconds; raw tables may be negative."""

    delays: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        if d.ndim != 2:
            raise DomainError("delay table must be 2D (rows x cols)")
        if not np.all(np.isfinite(d)):
            raise DomainError("delay table contains non-finite entries")
        object.__setattr__(self, "delays", d)

    def __eq__(self, other):
        if not isinstance(other, DelayTable):
            return NotImplemented
        return self.delays.shape == other.delays.shape and bool(np.array_equal(self.delays, other.delays))

    @property
    def shape(self) -> tuple[int, int]:
        return self.delays.shape  # type: ignore[return-value]

    def normalized(self) -> "DelayTable":
        """Shifted copy whose minimum entry is exactly zero.

        Raw delays relative to the (0,0) reference are negative for
        elements farther from the focus than the reference; a physical
        emitter cannot fire before the frame starts, so the whole table is
        shifted. The common shift adds the same phase to every element and
        leaves the focal interference pattern unchanged.
        """
        return DelayTable(self.delays - self.delays.min())


def compute_delays(array: TransducerArray, focus: Point3) -> DelayTable:
    """Focal delay table: (distance_reference - distance_ij) / c.

    Emitting element (i, j) at ``t + delay[i, j]`` makes every wavefront
    arrive at the focus at the same instant ``t + distance_reference/c``.

    Raises
    ------
    GeometryError
        If the focus coincides with a transducer element.
    """
    pos = array.element_positions()
    diff = pos - focus.as_array()
    dist = np.sqrt((diff**2).sum(axis=2))
    if np.any(dist <= COINCIDENCE_EPS):
        i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
        raise GeometryError(f"focus coincides with transducer ({i}, {j})")
    ri, rj = array.reference
    return DelayTable((dist[ri, rj] - dist) / array.speed_of_sound)


def _field_at_points(
    array: TransducerArray,
    delays: DelayTable,
    points: np.ndarray,
    amplitudes: np.ndarray | None = None,
    chunk_size: int = 1 << 16,
) -> tuple[np.ndarray, np.ndarray]:
    """Complex superposition field at arbitrary points.

    Each sample holds ``sum_ij a_ij * (1/r_ij) * exp(i*2*pi*f_c*(r_ij/c + delay_ij))``.
    Samples coincident with an element are returned as NaN and flagged in
    the boolean mask. The per-sample sum runs over elements in row-major
    order regardless of how the point set is chunked, so results are
    bitwise independent of ``chunk_size``.

    Returns
    -------
    values : complex ndarray, shape (len(points),)
    singular : bool ndarray, shape (len(points),)
    """
    if delays.shape != (array.rows, array.cols):
        raise DomainError(f"delay table shape {delays.shape} does not match array {array.rows}x{array.cols}")
    elem = array.element_positions().reshape(-1, 3)
    dly = delays.delays.reshape(-1)
    if amplitudes is None:
        amp = np.ones(elem.shape[0])
    else:
        amp = np.asarray(amplitudes, dtype=float).reshape(-1)
        if amp.shape[0] != elem.shape[0]:
            raise DomainError("amplitudes shape does not match array")
    points = np.asarray(points, dtype=float)
    values = np.empty(points.shape[0], dtype=complex)
    singular = np.zeros(points.shape[0], dtype=bool)
    two_pi_f = 2 * math.pi * array.carrier_frequency_hz
    c = array.speed_of_sound
    for lo in range(0, points.shape[0], chunk_size):
        chunk = points[lo : lo + chunk_size]
        diff = chunk[:, None, :] - elem[None, :, :]
        r = np.sqrt((diff**2).sum(axis=2))
        bad = r <= COINCIDENCE_EPS
        bad_rows = bad.any(axis=1)
        r_safe = np.where(bad, 1.0, r)
        phase = two_pi_f * (r_safe / c + dly[None, :])
        contrib = (amp[None, :] / r_safe) * np.exp(1j * phase)
        out = contrib.sum(axis=1)
        out[bad_rows] = complex(np.nan, np.nan)
        values[lo : lo + chunk_size] = out
        singular[lo : lo + chunk_size] = bad_rows
    return values, singular


@dataclass(frozen=True)
class PressureField:
    """Sampled complex pressure amplitude on a grid (arbitrary linear units).

    ``values`` has shape ``grid.resolution``; samples flagged in
    ``singular`` coincided with a transducer and hold NaN. They are
    excluded from maxima searches and width measurements.
    """

    grid: SampleGrid
    values: np.ndarray
    singular: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        s = np.asarray(self.singular, dtype=bool)
        if v.shape != self.grid.resolution or s.shape != self.grid.resolution:
            raise DomainError(f"field shape {v.shape} does not match grid resolution {self.grid.resolution}")
        if not np.all(np.isfinite(v[~s])):
            raise DomainError("non-singular field samples must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "singular", s)

    def magnitude(self) -> np.ndarray:
        """|field| with singular samples as NaN."""
        return np.where(self.singular, np.nan, np.abs(self.values))

    def argmax_position(self) -> Point3:
        """Position of the largest |field| sample, ignoring singular samples."""
        mag = self.magnitude()
        if np.all(np.isnan(mag)):
            raise DomainError("field has no non-singular samples")
        flat = int(np.nanargmax(mag))
        return self.grid.index_position(flat)

    def to_csv(self, fileobj) -> None:
        """Write ``x,y,z,re,im,abs`` rows in x-major sample order."""
        fileobj.write("x,y,z,re,im,abs\n")
        pts = self.grid.points()
        flat = self.values.ravel()
        sing = self.singular.ravel()
        for (x, y, z), val, bad in zip(pts, flat, sing):
            if bad:
                fileobj.write(f"{float(x)!r},{float(y)!r},{float(z)!r},nan,nan,nan\n")
            else:
                fileobj.write(
                    f"{float(x)!r},{float(y)!r},{float(z)!r},"
                    f"{float(val.real)!r},{float(val.imag)!r},{float(abs(val))!r}\n"
                )

    def slice2d(self) -> tuple[np.ndarray, tuple[int, int]]:
        """|field| of the unique 2D slice as an array, plus its axis pair.

        Requires exactly one singleton grid axis. Singular samples map to 0.
        """
        res = self.grid.resolution
        flat_axes = [k for k in range(3) if res[k] == 1]
        if len(flat_axes) != 1:
            raise DomainError(f"PGM export needs exactly one singleton axis, grid is {res}")
        mag = np.nan_to_num(self.magnitude(), nan=0.0)
        img = np.squeeze(mag, axis=flat_axes[0])
        kept = tuple(k for k in range(3) if k != flat_axes[0])
        return img, kept  # type: ignore[return-value]

    def to_pgm(self, fileobj) -> None:
        """8-bit binary PGM of the 2D slice, first kept axis as image rows."""
        img, _ = self.slice2d()
        peak = img.max()
        scaled = np.zeros_like(img, dtype=np.uint8) if peak <= 0 else np.rint(img / peak * 255).astype(np.uint8)
        fileobj.write(b"P5\n")
        fileobj.write(f"{scaled.shape[1]} {scaled.shape[0]}\n255\n".encode("ascii"))
        fileobj.write(scaled.tobytes(order="C"))


def simulate_field(
    array: TransducerArray,
    delays: DelayTable,
    grid: SampleGrid,
    amplitudes: np.ndarray | None = None,
    chunk_size: int = 1 << 16,
) -> PressureField:
    """Monochromatic point-source superposition of the delayed array.

    Parameters
    ----------
    array : TransducerArray
    delays : DelayTable
        Raw or normalized; a common shift only rotates the global phase.
    grid : SampleGrid
        Sampling volume.
    amplitudes : ndarray, optional
        Per-element amplitude weights, shape (rows, cols) or flat; default 1.
    chunk_size : int
        Samples per evaluation block. Results are bitwise identical for
        any chunking because each sample's element sum keeps a fixed order.
    """
    values, singular = _field_at_points(array, delays, grid.points(), amplitudes, chunk_size)
    return PressureField(grid, values.reshape(grid.resolution), singular.reshape(grid.resolution))


def focal_spot_width(field: PressureField, focus: Point3, axis: int = 0) -> float:
    """Full width at half maximum of |field| along ``axis`` through the arg-max.

    Half-max crossings are located by linear interpolation between grid
    samples. If the profile never drops below half maximum on a side (flat
    or truncated field), the measured width extends to the grid edge, so a
    completely flat profile reports the full grid extent along the axis.

    Raises
    ------
    DomainError
        If ``focus`` lies outside the sampled grid.
    """
    if not field.grid.contains(focus):
        raise DomainError(f"focus {focus} outside sampled grid")
    mag = np.nan_to_num(field.magnitude(), nan=0.0)
    flat = int(np.argmax(mag))
    idx = list(np.unravel_index(flat, mag.shape))
    take = [slice(None) if k == axis else idx[k] for k in range(3)]
    profile = mag[tuple(take)]
    coords = field.grid.axis_coords(axis)
    if profile.size == 1:
        return float(field.grid.extents[axis])
    peak_i = int(np.argmax(profile))
    half = profile[peak_i] / 2.0
    if profile[peak_i] <= 0:
        raise DomainError("cannot measure width of an all-zero profile")
    left = coords[0]
    for i in range(peak_i, 0, -1):
        if profile[i - 1] < half <= profile[i]:
            frac = (half - profile[i - 1]) / (profile[i] - profile[i - 1])
            left = coords[i - 1] + frac * (coords[i] - coords[i - 1])
            break
    right = coords[-1]
    for i in range(peak_i, len(profile) - 1):
        if profile[i + 1] < half <= profile[i]:
            frac = (profile[i] - half) / (profile[i] - profile[i + 1])
            right = coords[i] + frac * (coords[i + 1] - coords[i])
            break
    return float(right - left)


def intensity_to_force(p: float, f_max: float) -> float:
    """Convert device drive intensity to output force.

    ``F = f_max * sin^2(pi * p / 1248)``, the device's published
    conversion. The law folds over above p = 624 and returns to zero at
    p = 1248; the engine enforces the formula as stated rather than
    clamping, and callers that want monotone behavior should stay in
    [0, 624].
    """
    if not 0 <= p <= INTENSITY_FULL_SCALE:
        raise DomainError(f"intensity {p} outside [0, {INTENSITY_FULL_SCALE:g}]")
    if not f_max > 0:
        raise DomainError(f"f_max must be > 0, got {f_max}")
    return f_max * math.sin(math.pi * p / INTENSITY_FULL_SCALE) ** 2


@dataclass(frozen=True)
class FocalPoint:
    """A target point with drive intensity and dwell duration."""

    position: Point3
    intensity: float
    duration: float

    def __post_init__(self):
        if not 0 <= self.intensity <= INTENSITY_FULL_SCALE:
            raise DomainError(f"intensity {self.intensity} outside [0, {INTENSITY_FULL_SCALE:g}]")
        if not self.duration > 0:
            raise DomainError(f"duration must be > 0, got {self.duration}")


@dataclass(frozen=True)
class ModulationConfig:
    """Rectangular on/off amplitude modulation."""

    frequency_hz: float
    duty: float = 0.5
    waveform: str = "rectangular"

    def __post_init__(self):
        if self.waveform != "rectangular":
            raise DomainError(f"unsupported modulation waveform {self.waveform!r}")
        if not self.frequency_hz > 0:
            raise DomainError(f"modulation frequency must be > 0, got {self.frequency_hz}")
        if not 0 < self.duty < 1:
            raise DomainError(f"duty must be in (0, 1), got {self.duty}")


def apply_modulation(config: ModulationConfig, duration: float) -> list[tuple[float, float]]:
    """On-intervals of the rectangular envelope over ``[0, duration]``.

    Returns ``ceil(duration * frequency)`` intervals ``(start, stop)``;
    the final interval is truncated at ``duration`` if it overruns, which
    keeps total on-time within one period of ``duty * duration``.
    """
    if not duration > 0:
        raise DomainError(f"duration must be > 0, got {duration}")
    period = 1.0 / config.frequency_hz
    count = math.ceil(duration * config.frequency_hz - 1e-12)
    intervals = []
    for k in range(count):
        start = k * period
        stop = min(start + config.duty * period, duration)
        intervals.append((start, stop))
    return intervals
