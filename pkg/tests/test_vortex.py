import math

import pytest
from hypothesis import given, strategies as st

from sonovortex.errors import DomainError, TargetingError
from sonovortex.geometry import Point3
from sonovortex.vortex import (
    CannonSpec,
    VortexShot,
    classify_formation,
    is_stable,
    min_stable_aperture,
    slug_length,
    stroke_ratio,
    travel_time,
    vortex_speed,
)

# device constants of the study rig
V_S = 33_670e-9  # m^3
D_NOMINAL = 0.021  # m

volumes = st.floats(1e-8, 1e-3)
diameters = st.floats(0.005, 0.1)


def test_slug_length_device_constants():
    # 4 * 33670 / (pi * 21^2) mm by hand
    expected = 4 * 33_670 / (math.pi * 441) * 1e-3
    assert slug_length(V_S, D_NOMINAL) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.0972, abs=5e-5)


def test_slug_length_inverts_cylinder_volume():
    length = 0.0734
    volume = math.pi / 4 * D_NOMINAL**2 * length
    assert slug_length(volume, D_NOMINAL) == pytest.approx(length, rel=1e-12)


@given(volumes, diameters)
def test_slug_length_linear_in_volume(volume, diameter):
    assert slug_length(2 * volume, diameter) == pytest.approx(2 * slug_length(volume, diameter), rel=1e-12)


def test_slug_length_domain():
    with pytest.raises(DomainError):
        slug_length(0.0, D_NOMINAL)
    with pytest.raises(DomainError):
        slug_length(V_S, 0.0)


def test_stroke_ratio_identity():
    assert stroke_ratio(0.021, 0.021) == 1.0
    assert stroke_ratio(4.5 * D_NOMINAL, D_NOMINAL) == pytest.approx(4.5, rel=1e-12)


def test_stroke_ratio_device_constants():
    ratio = stroke_ratio(slug_length(V_S, D_NOMINAL), D_NOMINAL)
    assert ratio == pytest.approx(4.63, abs=5e-3)


@given(volumes, diameters)
def test_stroke_ratio_equals_cubic_form(volume, diameter):
    # stroke_ratio(slug_length(V, D), D) == 4V / (pi D^3), same floats both ways
    via_ops = stroke_ratio(slug_length(volume, diameter), diameter)
    direct = 4 * volume / (math.pi * diameter**3)
    assert via_ops == pytest.approx(direct, rel=1e-12)


def test_stability_device_examples():
    stable = is_stable(V_S, 0.022)
    assert stable.stable
    assert stable.ratio == pytest.approx(4.026, abs=2e-3)
    unstable = is_stable(V_S, 0.020)
    assert not unstable.stable
    assert unstable.ratio == pytest.approx(5.359, abs=2e-3)
    assert unstable.margin == pytest.approx(4.5 - unstable.ratio, rel=1e-12)


@given(volumes, diameters, st.floats(1.001, 3.0))
def test_stability_monotone_in_aperture(volume, diameter, factor):
    if is_stable(volume, diameter).stable:
        assert is_stable(volume, diameter * factor).stable


def test_min_stable_aperture_device_value():
    d_min = min_stable_aperture(V_S)
    assert 0.0211 <= d_min <= 0.0213
    # the published bound rounds this to 2 significant figures
    assert round(d_min, 3) == 0.021
    assert is_stable(V_S, d_min).margin == pytest.approx(0.0, abs=1e-9)


def test_min_stable_aperture_matches_bisection_oracle():
    lo, hi = 1e-4, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if is_stable(V_S, mid).stable:
            hi = mid
        else:
            lo = mid
    assert min_stable_aperture(V_S) == pytest.approx(hi, abs=1e-9)


@given(volumes)
def test_min_stable_aperture_cube_root_scaling(volume):
    assert min_stable_aperture(8 * volume) == pytest.approx(2 * min_stable_aperture(volume), rel=1e-12)


@given(volumes, st.floats(1e-9, 1e-3))
def test_aperture_just_above_minimum_is_stable(volume, eps):
    assert is_stable(volume, min_stable_aperture(volume) + eps).stable


def test_classification_bands():
    assert classify_formation(V_S, 0.030) == "stable, sub-formation"
    assert classify_formation(V_S, 0.022) == "at formation"
    assert classify_formation(V_S, 0.020) == "unstable"


def test_vortex_speed_recovers_cone_time():
    slug_len = slug_length(V_S, D_NOMINAL)
    cone_time = slug_len / (2 * 7.2)
    assert cone_time == pytest.approx(6.75e-3, abs=5e-6)
    speeds = vortex_speed(slug_len, cone_time)
    assert speeds.vortex_speed == pytest.approx(7.2, rel=1e-12)


def test_vortex_speed_zero_slug():
    speeds = vortex_speed(0.0, 0.005)
    assert speeds == (0.0, 0.0)


@given(st.floats(1e-4, 1.0), st.floats(1e-4, 0.1))
def test_vortex_speed_defining_ratio(slug_len, cone_time):
    speeds = vortex_speed(slug_len, cone_time)
    assert speeds.vortex_speed == speeds.slug_speed / 2


def test_cannon_spec_validation_and_helpers():
    spec = CannonSpec(V_S, D_NOMINAL, cone_time=6.75e-3)
    assert spec.slug_length() == slug_length(V_S, D_NOMINAL)
    assert spec.vortex_speeds().vortex_speed == pytest.approx(7.2, abs=1e-3)
    with pytest.raises(DomainError):
        CannonSpec(-1.0, D_NOMINAL, 0.005)
    with pytest.raises(DomainError):
        CannonSpec(V_S, D_NOMINAL, 0.0)


def test_shot_rejects_broken_speed_ratio():
    with pytest.raises(DomainError):
        VortexShot(0.0, Point3(0, 0, 0), (0, 0, 1), slug_speed=14.4, vortex_speed=7.3)
    with pytest.raises(DomainError):
        VortexShot(0.0, Point3(0, 0, 0), (0, 0, 2), slug_speed=14.4, vortex_speed=7.2)
    shot = VortexShot(0.0, Point3(0, 0, 0), (0, 0, 1), slug_speed=14.4, vortex_speed=7.2)
    assert shot.vortex_speed == 7.2


def test_travel_time_nominal():
    shot = VortexShot(0.0, Point3(0, 0, 0), (0, 0, 1), 14.4, 7.2)
    t = travel_time(shot, Point3(0, 0, 0.15))
    assert t == pytest.approx(0.15 / 7.2, rel=1e-12)
    assert t == pytest.approx(20.8e-3, abs=5e-5)


def test_travel_time_zero_distance():
    shot = VortexShot(0.0, Point3(0, 0, 0.15), (0, 0, 1), 14.4, 7.2)
    assert travel_time(shot, Point3(0, 0, 0.15)) == 0.0


def test_travel_time_halved_speed_doubles():
    fast = VortexShot(0.0, Point3(0, 0, 0), (0, 0, 1), 14.4, 7.2)
    slow = VortexShot(0.0, Point3(0, 0, 0), (0, 0, 1), 7.2, 3.6)
    target = Point3(0, 0, 0.2)
    assert travel_time(slow, target) == pytest.approx(2 * travel_time(fast, target), rel=1e-12)


def test_travel_time_off_axis_rejected():
    shot = VortexShot(0.0, Point3(0, 0, 0), (0, 0, 1), 14.4, 7.2)
    with pytest.raises(TargetingError):
        travel_time(shot, Point3(0.05, 0, 0.15))
    # 5 degrees default tolerance admits slightly off-axis targets
    assert travel_time(shot, Point3(0.01, 0, 0.15)) > 0


def test_aimed_shot_points_at_target():
    spec = CannonSpec(V_S, D_NOMINAL, cone_time=6.75e-3)
    shot = VortexShot.aimed(spec, Point3(0, 0, 0), Point3(0.0, 0.05, 0.15))
    assert travel_time(shot, Point3(0.0, 0.05, 0.15)) > 0
    with pytest.raises(TargetingError):
        VortexShot.aimed(spec, Point3(0, 0, 0), Point3(0, 0, 0))
