"""Latency-compensated stimulus scheduling.

The ultrasound wavefront crosses the working distance in under half a
millisecond while the vortex ring needs tens of milliseconds, so the two
emissions must be staggered for the stimuli to land together. The
scheduler renders a haptic image into time-multiplexed phase frames,
computes the co-arrival offset (or applies the device's fixed 30 ms
offset), and merges everything into one deterministic timeline.

Propagation models used for predicted arrivals:

* phase frame: straight line from the array center at the speed of sound;
* cannon trigger: mechanical latency, then constant ring speed from the
  cannon origin.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Union

from .acoustic import (
    DelayTable,
    FocalPoint,
    ModulationConfig,
    TransducerArray,
    apply_modulation,
    compute_delays,
)
from .errors import ConfigurationError, DomainError, GeometryError, InternalConsistencyError
from .geometry import Point3, distance
from .vortex import VortexShot, travel_time

#: Focal points farther than this from the shared target conflict with the
#: vortex aim by default.
DEFAULT_TARGET_TOLERANCE = 0.005


@dataclass(frozen=True)
class HapticImage:
    """Ordered sequence of focal points forming one tactile pattern."""

    points: tuple[FocalPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise DomainError("haptic image must contain at least one focal point")
        object.__setattr__(self, "points", tuple(self.points))


@dataclass(frozen=True)
class CompensationPolicy:
    """How the ultrasound emission is delayed behind the cannon trigger.

    ``fixed`` mode reproduces the device's stock 30 ms offset; ``computed``
    mode derives the offset from the propagation models so both stimuli
    arrive together. ``mechanical_latency`` is added to the vortex side in
    computed mode (trigger-to-launch time).
    """

    mode: str = "fixed"
    fixed_offset: float = 0.030
    mechanical_latency: float = 0.0

    def __post_init__(self):
        if self.mode not in ("computed", "fixed"):
            raise DomainError(f"compensation mode must be 'computed' or 'fixed', got {self.mode!r}")
        if self.mode == "fixed" and self.fixed_offset < 0:
            raise DomainError(f"fixed offset must be >= 0, got {self.fixed_offset}")
        if self.mechanical_latency < 0:
            raise DomainError(f"mechanical latency must be >= 0, got {self.mechanical_latency}")


@dataclass(frozen=True)
class PhaseFrameEvent:
    """One envelope on-interval of one focal point."""

    emit_time: float
    target: Point3
    delays: DelayTable
    intensity: float
    on_duration: float
    carrier_frequency_hz: float
    predicted_arrival: float
    focal_index: int = 0

    kind = "phase-frame"

    def __post_init__(self):
        if not self.on_duration > 0:
            raise DomainError(f"on duration must be > 0, got {self.on_duration}")
        if not self.carrier_frequency_hz > 0:
            raise DomainError(f"carrier frequency must be > 0, got {self.carrier_frequency_hz}")


@dataclass(frozen=True)
class CannonTriggerEvent:
    """Fire command for the air cannon."""

    emit_time: float
    cannon_id: int
    target: Point3
    predicted_arrival: float

    kind = "cannon-trigger"


ScheduleEvent = Union[PhaseFrameEvent, CannonTriggerEvent]

_KIND_RANK = {"cannon-trigger": 0, "phase-frame": 1}


def _event_sort_key(event: ScheduleEvent):
    focal = event.focal_index if isinstance(event, PhaseFrameEvent) else -1
    return (event.emit_time, _KIND_RANK[event.kind], focal)


@dataclass(frozen=True)
class StimulusSchedule:
    """Immutable, totally ordered emission timeline.

    Events are sorted by emit time; ties put cannon triggers before phase
    frames, then order by focal-point index. Emit times are exact floats in
    memory and quantized to 1 us only on the wire.
    """

    events: tuple[ScheduleEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        keys = [_event_sort_key(e) for e in events]
        for a, b in zip(keys, keys[1:]):
            if b < a:
                raise DomainError("schedule events must be sorted by (emit time, kind, focal index)")
        for e in events:
            if e.emit_time < 0:
                raise DomainError(f"emit times must be >= 0, got {e.emit_time}")

    @classmethod
    def from_events(cls, events) -> "StimulusSchedule":
        return cls(tuple(sorted(events, key=_event_sort_key)))

    def __len__(self) -> int:
        return len(self.events)

    def phase_frames(self) -> list[PhaseFrameEvent]:
        return [e for e in self.events if isinstance(e, PhaseFrameEvent)]

    def cannon_triggers(self) -> list[CannonTriggerEvent]:
        return [e for e in self.events if isinstance(e, CannonTriggerEvent)]

    def to_csv(self, fileobj) -> None:
        fileobj.write("emit_time_s,kind,target_x_m,target_y_m,target_z_m,predicted_arrival_s\n")
        for e in self.events:
            t = e.target
            fileobj.write(f"{e.emit_time!r},{e.kind},{t.x!r},{t.y!r},{t.z!r},{e.predicted_arrival!r}\n")


def ultrasound_flight_time(array: TransducerArray, target: Point3) -> float:
    """Scheduling model for ultrasound propagation: array center to target at c."""
    return distance(array.center(), target) / array.speed_of_sound


def render_image(
    image: HapticImage,
    array: TransducerArray,
    modulation: ModulationConfig | None = None,
    start_time: float = 0.0,
) -> StimulusSchedule:
    """Render focal points into time-multiplexed phase frames.

    With modulation, each focal point contributes one phase frame per
    envelope on-interval of its own duration; consecutive modulation
    periods are handed round-robin to the focal points in list order, so
    multiple points alternate strictly while all remain active. Total
    on-time per focal point stays ``duty * duration`` (within one period).
    Without modulation (continuous wave) the points play back-to-back, one
    frame each.
    """
    tables = [compute_delays(array, fp.position).normalized() for fp in image.points]
    events: list[ScheduleEvent] = []
    if modulation is None:
        t = start_time
        for k, fp in enumerate(image.points):
            events.append(
                PhaseFrameEvent(
                    emit_time=t,
                    target=fp.position,
                    delays=tables[k],
                    intensity=fp.intensity,
                    on_duration=fp.duration,
                    carrier_frequency_hz=array.carrier_frequency_hz,
                    predicted_arrival=t + ultrasound_flight_time(array, fp.position),
                    focal_index=k,
                )
            )
            t += fp.duration
        return StimulusSchedule.from_events(events)

    period = 1.0 / modulation.frequency_hz
    queues = [deque(apply_modulation(modulation, fp.duration)) for fp in image.points]
    slot = 0
    while any(queues):
        for k, fp in enumerate(image.points):
            if not queues[k]:
                continue
            lo, hi = queues[k].popleft()
            emit = start_time + slot * period
            events.append(
                PhaseFrameEvent(
                    emit_time=emit,
                    target=fp.position,
                    delays=tables[k],
                    intensity=fp.intensity,
                    on_duration=hi - lo,
                    carrier_frequency_hz=array.carrier_frequency_hz,
                    predicted_arrival=emit + ultrasound_flight_time(array, fp.position),
                    focal_index=k,
                )
            )
            slot += 1
    return StimulusSchedule.from_events(events)


def co_arrival_offset(
    target: Point3,
    shot: VortexShot,
    array: TransducerArray,
    policy: CompensationPolicy,
) -> float:
    """Delay of the ultrasound emission behind the cannon trigger.

    Computed mode: ``(vortex flight + mechanical latency) - ultrasound
    flight``, each stimulus measured from its own source. Fixed mode
    returns the policy's offset untouched.
    """
    if policy.mode == "fixed":
        return policy.fixed_offset
    t_vortex = travel_time(shot, target) + policy.mechanical_latency
    t_sound = ultrasound_flight_time(array, target)
    offset = t_vortex - t_sound
    if offset < 0:
        raise InternalConsistencyError(
            f"computed offset {offset} is negative; ultrasound cannot be the slower stimulus"
        )
    return offset


def implied_mechanical_latency(
    target: Point3,
    shot: VortexShot,
    array: TransducerArray,
    fixed_offset: float = 0.030,
) -> float:
    """Mechanical latency the fixed offset implies for this geometry.

    The stock 30 ms offset exceeds the pure flight-time difference at the
    nominal working distance; the surplus is the latency the device would
    need for the fixed offset to be the physically correct one.
    """
    flight_gap = travel_time(shot, target) - ultrasound_flight_time(array, target)
    return fixed_offset - flight_gap


def schedule_cross_field(
    image: HapticImage,
    shot: VortexShot,
    array: TransducerArray,
    policy: CompensationPolicy,
    modulation: ModulationConfig | None = None,
    cannon_id: int = 0,
    target_tolerance: float = DEFAULT_TARGET_TOLERANCE,
) -> StimulusSchedule:
    """Merge a cannon trigger and a rendered image into one timeline.

    The shared target is the image's first focal point; all focal points
    must sit within ``target_tolerance`` of it and the shot must aim at it.
    In computed mode the first phase frame's predicted arrival matches the
    vortex arrival to floating-point precision.
    """
    target = image.points[0].position
    for k, fp in enumerate(image.points[1:], start=1):
        gap = distance(fp.position, target)
        if gap > target_tolerance:
            raise ConfigurationError(
                f"focal point {k} is {gap * 1000:.2f} mm from the shared target (tolerance {target_tolerance * 1000:.2f} mm)"
            )
    if distance(shot.origin, target) == 0.0:
        raise GeometryError("target coincides with the cannon origin")
    offset = co_arrival_offset(target, shot, array, policy)
    trigger = CannonTriggerEvent(
        emit_time=shot.launch_time,
        cannon_id=cannon_id,
        target=target,
        predicted_arrival=shot.launch_time + policy.mechanical_latency + travel_time(shot, target),
    )
    ultrasound = render_image(image, array, modulation, start_time=shot.launch_time + offset)
    return StimulusSchedule.from_events((trigger,) + ultrasound.events)


def emit_schedule(schedule: StimulusSchedule) -> bytes:
    """Serialize to the device wire format (see :mod:`sonovortex.protocol`)."""
    from . import protocol

    return protocol.encode(schedule)


def shift_schedule(schedule: StimulusSchedule, dt: float) -> StimulusSchedule:
    """Copy with all emit and arrival times moved by ``dt``."""
    return StimulusSchedule.from_events(
        replace(e, emit_time=e.emit_time + dt, predicted_arrival=e.predicted_arrival + dt)
        for e in schedule.events
    )
