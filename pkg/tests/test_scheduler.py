import io

import pytest

from sonovortex.acoustic import FocalPoint, ModulationConfig
from sonovortex.errors import (
    ConfigurationError,
    DomainError,
    GeometryError,
    InternalConsistencyError,
)
from sonovortex.geometry import Point3
from sonovortex.scheduler import (
    CannonTriggerEvent,
    CompensationPolicy,
    HapticImage,
    StimulusSchedule,
    co_arrival_offset,
    emit_schedule,
    implied_mechanical_latency,
    render_image,
    schedule_cross_field,
    shift_schedule,
    ultrasound_flight_time,
)
from sonovortex.vortex import VortexShot

TARGET = Point3(0.0, 0.0, 0.15)


def _shot(v_vortex=7.2, origin=Point3(0, 0, 0), launch=0.0):
    return VortexShot(launch, origin, (0, 0, 1), 2 * v_vortex, v_vortex)


def _image(duration=0.2, n_points=1, spacing=0.0):
    pts = tuple(
        FocalPoint(Point3(k * spacing, 0.0, 0.15), 624, duration) for k in range(n_points)
    )
    return HapticImage(pts)


# ---------------------------------------------------------------- render_image

def test_render_single_point_50hz(default_array):
    schedule = render_image(_image(0.2), default_array, ModulationConfig(50.0, 0.5))
    frames = schedule.phase_frames()
    assert len(frames) == 10
    assert sum(f.on_duration for f in frames) == pytest.approx(0.1, rel=1e-12)
    assert frames[0].emit_time == 0.0
    assert frames[1].emit_time == pytest.approx(0.02)
    # normalized delay tables only
    assert all(f.delays.delays.min() == 0.0 for f in frames)


def test_render_continuous_wave_one_event_per_point(default_array):
    schedule = render_image(_image(0.2, n_points=2, spacing=0.001), default_array, None)
    frames = schedule.phase_frames()
    assert len(frames) == 2
    assert frames[0].on_duration == pytest.approx(0.2)
    assert frames[0].focal_index == 0
    assert frames[1].emit_time == pytest.approx(0.2)
    assert frames[1].focal_index == 1


def test_render_two_points_alternate_strictly(default_array):
    schedule = render_image(
        _image(0.1, n_points=2, spacing=0.001), default_array, ModulationConfig(50.0, 0.5)
    )
    indices = [f.focal_index for f in schedule.phase_frames()]
    assert indices == [0, 1] * 5
    # each point keeps its full duty on-time
    for k in (0, 1):
        on = sum(f.on_duration for f in schedule.phase_frames() if f.focal_index == k)
        assert on == pytest.approx(0.05, rel=1e-12)


def test_render_propagates_degenerate_geometry(default_array):
    element = Point3.from_array(default_array.element_positions()[0, 0])
    with pytest.raises(GeometryError):
        render_image(HapticImage((FocalPoint(element, 624, 0.1),)), default_array)


def test_haptic_image_must_be_non_empty():
    with pytest.raises(DomainError):
        HapticImage(())


# ---------------------------------------------------------------- offsets

def test_computed_offset_nominal(default_array):
    policy = CompensationPolicy(mode="computed")
    offset = co_arrival_offset(TARGET, _shot(), default_array, policy)
    assert offset == pytest.approx(0.15 / 7.2 - 0.15 / 340.0, rel=1e-9)
    assert offset == pytest.approx(20.4e-3, abs=1e-4)


def test_fixed_offset_ignores_geometry(default_array):
    policy = CompensationPolicy(mode="fixed", fixed_offset=0.030)
    for d in (0.10, 0.15, 0.30):
        shot = _shot()
        assert co_arrival_offset(Point3(0, 0, d), shot, default_array, policy) == 0.030


def test_offset_limit_is_mechanical_latency(default_array):
    # cannon and array are colocated at the origin; target distance -> 0
    policy = CompensationPolicy(mode="computed", mechanical_latency=0.004)
    offset = co_arrival_offset(Point3(0, 0, 1e-9), _shot(), default_array, policy)
    assert offset == pytest.approx(policy.mechanical_latency, abs=1e-9)


def test_negative_computed_offset_is_internal_error(default_array):
    # a hypothetical ring faster than sound trips the consistency check
    policy = CompensationPolicy(mode="computed")
    shot = _shot(v_vortex=1000.0)
    with pytest.raises(InternalConsistencyError):
        co_arrival_offset(TARGET, shot, default_array, policy)


def test_implied_mechanical_latency_nominal(default_array):
    implied = implied_mechanical_latency(TARGET, _shot(), default_array, fixed_offset=0.030)
    assert implied == pytest.approx(9.6e-3, abs=1e-4)


# ---------------------------------------------------------------- cross-field

def test_cross_field_computed_co_arrival(default_array):
    policy = CompensationPolicy(mode="computed")
    for d in (0.10, 0.15, 0.30):
        image = HapticImage((FocalPoint(Point3(0, 0, d), 624, 0.2),))
        schedule = schedule_cross_field(image, _shot(), default_array, policy, ModulationConfig(50.0, 0.5))
        trigger = schedule.cannon_triggers()[0]
        first = schedule.phase_frames()[0]
        assert abs(trigger.predicted_arrival - first.predicted_arrival) <= 1e-6
        assert schedule.events[0] is trigger


def test_cross_field_fixed_mode_emits_at_30ms(default_array):
    policy = CompensationPolicy(mode="fixed", fixed_offset=0.030)
    schedule = schedule_cross_field(_image(0.2), _shot(), default_array, policy, ModulationConfig(50.0, 0.5))
    assert schedule.phase_frames()[0].emit_time == 0.030
    assert schedule.cannon_triggers()[0].emit_time == 0.0


def test_cross_field_conflicting_targets(default_array):
    image = HapticImage(
        (
            FocalPoint(TARGET, 624, 0.1),
            FocalPoint(Point3(0.02, 0, 0.15), 624, 0.1),
        )
    )
    with pytest.raises(ConfigurationError):
        schedule_cross_field(image, _shot(), default_array, CompensationPolicy())


def test_cross_field_zero_distance_target_rejected(default_array):
    image = HapticImage((FocalPoint(Point3(0, 0, 0), 624, 0.1),))
    shot = _shot()
    with pytest.raises(GeometryError):
        schedule_cross_field(image, shot, default_array, CompensationPolicy())


def test_cross_field_deterministic_bytes(default_array):
    policy = CompensationPolicy(mode="computed")
    make = lambda: schedule_cross_field(
        _image(0.2), _shot(), default_array, policy, ModulationConfig(50.0, 0.5)
    )
    assert emit_schedule(make()) == emit_schedule(make())


# ---------------------------------------------------------------- schedule container

def test_schedule_orders_ties_cannon_first(default_array):
    frames = render_image(_image(0.1), default_array).events
    trigger = CannonTriggerEvent(emit_time=0.0, cannon_id=1, target=TARGET, predicted_arrival=0.02)
    schedule = StimulusSchedule.from_events(frames + (trigger,))
    assert isinstance(schedule.events[0], CannonTriggerEvent)
    with pytest.raises(DomainError):
        StimulusSchedule(tuple(reversed(schedule.events)))


def test_schedule_rejects_negative_times(default_array):
    with pytest.raises(DomainError):
        shift_schedule(render_image(_image(0.1), default_array), -1.0)


def test_schedule_csv_columns(default_array):
    schedule = render_image(_image(0.2), default_array, ModulationConfig(50.0, 0.5))
    buf = io.StringIO()
    schedule.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "emit_time_s,kind,target_x_m,target_y_m,target_z_m,predicted_arrival_s"
    assert len(lines) == 11
    assert lines[1].split(",")[1] == "phase-frame"


def test_ultrasound_flight_time_uses_array_center(default_array):
    t = ultrasound_flight_time(default_array, TARGET)
    assert t == pytest.approx(0.15 / 340.0, rel=1e-9)
