"""Acceptance criteria, one test per criterion.

Each test prints a single ``[acceptance] criterion N: PASS/FAIL`` line
(visible with ``pytest -s``) and then asserts. Tolerances are pinned
here, not deferred.
"""

import math
import time

import numpy as np
import yaml

from sweep_oracle import sweep_first_divided

from sonovortex import protocol
from sonovortex.acoustic import (
    DelayTable,
    FocalPoint,
    TransducerArray,
    compute_delays,
    intensity_to_force,
    simulate_field,
)
from sonovortex.calibration import (
    CalibrationPoint,
    fit_cannon_curve,
    fit_ultrasound_fmax,
    implied_t_cone,
)
from sonovortex.config import config_from_mapping
from sonovortex.errors import DecodeError
from sonovortex.geometry import Point3, SampleGrid, distance
from sonovortex.psychophysics import (
    double_point_conditions,
    gaussian_profile,
    perceptual_conditions,
    run_method_of_limits,
    run_perceptual_threshold,
    run_simultaneous,
    write_double_point_csv,
    write_perceptual_csv,
    write_simultaneous_csv,
)
from sonovortex.scheduler import (
    CannonTriggerEvent,
    CompensationPolicy,
    HapticImage,
    PhaseFrameEvent,
    StimulusSchedule,
    schedule_cross_field,
)
from sonovortex.vortex import CannonSpec, VortexShot, is_stable, min_stable_aperture, vortex_speed

V_S = 33_670e-9
D_NOMINAL = 0.021


def _report(criterion: int, ok: bool, detail: str) -> None:
    print(f"[acceptance] criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def test_criterion_1_phase_alignment_random_configs():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        rows = int(rng.integers(1, 17))
        cols = int(rng.integers(1, 17))
        pitch = float(rng.uniform(0.002, 0.015))
        c = float(rng.uniform(330.0, 350.0))
        array = TransducerArray.centered(rows=rows, cols=cols, pitch=pitch, speed_of_sound=c)
        focus = Point3(
            float(rng.uniform(-0.05, 0.05)),
            float(rng.uniform(-0.05, 0.05)),
            float(rng.uniform(0.05, 0.30)),
        )
        table = compute_delays(array, focus)
        dist = np.sqrt(((array.element_positions() - focus.as_array()) ** 2).sum(axis=2))
        arrivals = table.delays + dist / c
        worst = max(worst, float(arrivals.max() - arrivals.min()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 1.0
    _report(1, ok, f"max arrival spread {worst:.3e} s over 1000 configs in {elapsed:.2f} s")
    assert worst <= 1e-9
    assert elapsed < 1.0


def test_criterion_2_focality_with_exhaustive_oracle():
    start = time.perf_counter()
    array = TransducerArray.centered(rows=16, cols=16, pitch=0.010, carrier_frequency_hz=40e3)
    focus = Point3(0.0, 0.0, 0.15)
    table = compute_delays(array, focus)
    grid = SampleGrid.centered(focus, (0.060, 0.060, 0.001), (61, 61, 1))
    field = simulate_field(array, table, grid)
    peak = field.argmax_position()

    elem = array.element_positions().reshape(-1, 3)
    dly = table.delays.ravel()
    two_pi_f = 2 * math.pi * array.carrier_frequency_hz
    best_mag, best_idx = -1.0, -1
    for idx, (x, y, z) in enumerate(grid.points()):
        re = im = 0.0
        for (ex, ey, ez), d in zip(elem, dly):
            r = math.sqrt((x - ex) ** 2 + (y - ey) ** 2 + (z - ez) ** 2)
            ph = two_pi_f * (r / array.speed_of_sound + d)
            re += math.cos(ph) / r
            im += math.sin(ph) / r
        mag = re * re + im * im
        if mag > best_mag:
            best_mag, best_idx = mag, idx
    oracle_peak = grid.index_position(best_idx)

    lam = array.wavelength
    miss = distance(peak, focus)
    elapsed = time.perf_counter() - start
    ok = miss <= lam / 2 and peak == oracle_peak and elapsed < 30.0
    _report(
        2,
        ok,
        f"argmax {miss * 1e3:.2f} mm from focus (lambda/2 = {lam / 2 * 1e3:.2f} mm), "
        f"oracle agrees, {elapsed:.1f} s",
    )
    assert miss <= lam / 2
    assert peak == oracle_peak
    assert elapsed < 30.0


def test_criterion_3_stability_boundary():
    d_min = min_stable_aperture(V_S)
    in_band = 0.0211 <= d_min <= 0.0213

    lo, hi = 1e-3, 0.5
    for _ in range(64):
        mid = (lo + hi) / 2
        if is_stable(V_S, mid).stable:
            hi = mid
        else:
            lo = mid
    oracle_agrees = abs(d_min - hi) <= 1e-9

    # 2-significant-figure rounding reproduces the published bound
    rounded_cm = float(f"{d_min * 100:.2g}")
    ok = in_band and oracle_agrees and rounded_cm == 2.1
    _report(3, ok, f"min aperture {d_min * 1e3:.4f} mm, bisection gap {abs(d_min - hi):.2e} m, rounds to {rounded_cm} cm")
    assert in_band
    assert oracle_agrees
    assert rounded_cm == 2.1


def test_criterion_4_kinematics():
    rng = np.random.default_rng(7)
    exact = all(
        vortex_speed(L, t).vortex_speed == vortex_speed(L, t).slug_speed / 2
        for L, t in zip(rng.uniform(0, 1, 1000), rng.uniform(1e-4, 0.1, 1000))
    )

    spec = CannonSpec(V_S, D_NOMINAL, cone_time=1.0)
    t_cone = implied_t_cone(spec, 7.2)
    near_published = abs(t_cone - 6.75e-3) < 1e-5
    speeds = vortex_speed(spec.slug_length(), t_cone)
    recovered = implied_t_cone(spec, speeds.vortex_speed)
    round_trip = abs(recovered - t_cone) <= 1e-9

    ok = exact and near_published and round_trip
    _report(4, ok, f"half-speed exact on 1000 samples, t_cone {t_cone * 1e3:.4f} ms, round-trip gap {abs(recovered - t_cone):.2e} s")
    assert exact
    assert near_published
    assert round_trip


def test_criterion_5_co_arrival(default_array):
    worst = 0.0
    for d in (0.10, 0.15, 0.30):
        image = HapticImage((FocalPoint(Point3(0, 0, d), 624, 0.2),))
        shot = VortexShot(0.0, Point3(0, 0, 0), (0, 0, 1), 14.4, 7.2)
        schedule = schedule_cross_field(
            image, shot, default_array, CompensationPolicy(mode="computed")
        )
        gap = abs(
            schedule.cannon_triggers()[0].predicted_arrival
            - schedule.phase_frames()[0].predicted_arrival
        )
        worst = max(worst, gap)

    image = HapticImage((FocalPoint(Point3(0, 0, 0.15), 624, 0.2),))
    shot = VortexShot(0.0, Point3(0, 0, 0), (0, 0, 1), 14.4, 7.2)
    fixed = schedule_cross_field(
        image, shot, default_array, CompensationPolicy(mode="fixed", fixed_offset=0.030)
    )
    fixed_exact = fixed.phase_frames()[0].emit_time == 0.030

    ok = worst <= 1e-6 and fixed_exact
    _report(5, ok, f"worst computed-mode arrival gap {worst:.2e} s; fixed mode emits at exactly 30 ms: {fixed_exact}")
    assert worst <= 1e-6
    assert fixed_exact


def test_criterion_6_force_law_and_fits():
    f_max = 10.9e-3
    anchors = (
        abs(intensity_to_force(0, f_max) - 0.0) <= 1e-12 * f_max
        and abs(intensity_to_force(624, f_max) - f_max) <= 1e-12 * f_max
        and abs(intensity_to_force(312, f_max) - 0.5 * f_max) <= 1e-12 * f_max
    )

    slope, intercept = 1.0432e-3, 0.4e-3
    line = fit_cannon_curve(
        [CalibrationPoint(v, slope * v + intercept) for v in (5.0, 7.5, 10.0, 12.5, 15.0, 17.5)]
    )
    sin2 = fit_ultrasound_fmax(
        [
            CalibrationPoint(p, 12e-3 * math.sin(math.pi * p / 1248) ** 2)
            for p in range(100, 700, 100)
        ]
    )
    fits = (
        abs(line.slope - slope) <= 1e-9 * slope
        and abs(line.intercept - intercept) <= 1e-9 * intercept
        and abs(sin2.f_max - 12e-3) <= 1e-9 * 12e-3
    )

    ok = anchors and fits
    _report(6, ok, "sin^2 anchors at 1e-12 rel; synthetic fit recovery at 1e-9 rel")
    assert anchors
    assert fits


def test_criterion_7_method_of_limits_oracle_and_determinism(us_profile):
    from sonovortex.psychophysics import PerceiverModel

    condition = double_point_conditions()[2]
    us_condition = double_point_conditions()[0]
    rng = np.random.default_rng(515)
    logs: list[bytes] = []
    worst_gap = 0.0
    start = time.perf_counter()
    for run_idx in range(100):
        fraction = float(rng.uniform(0.55, 0.92))
        perceiver = PerceiverModel(valley_fraction=fraction, seed=run_idx)
        if run_idx % 5 == 0:
            profile, cond = us_profile, us_condition
        else:
            sigma = float(rng.uniform(2.5e-3, 8e-3))
            profile, cond = gaussian_profile(sigma), condition
        result = run_method_of_limits(cond, perceiver, profile, platform_step=1e-4, max_separation=0.04)
        boundary = sweep_first_divided(
            profile, fraction, perceiver.peak_floor, cond.target_force, cond.background_force, 1e-4, 0.04
        )
        assert boundary is not None
        worst_gap = max(worst_gap, abs(result.threshold - boundary))
        logs.append(result.log_text().encode())

    rng = np.random.default_rng(515)
    for run_idx in range(100):
        fraction = float(rng.uniform(0.55, 0.92))
        perceiver = PerceiverModel(valley_fraction=fraction, seed=run_idx)
        if run_idx % 5 == 0:
            profile, cond = us_profile, us_condition
        else:
            sigma = float(rng.uniform(2.5e-3, 8e-3))
            profile, cond = gaussian_profile(sigma), condition
        result = run_method_of_limits(cond, perceiver, profile, platform_step=1e-4, max_separation=0.04)
        assert result.log_text().encode() == logs[run_idx]

    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-4 + 1e-12
    _report(7, ok, f"worst oracle gap {worst_gap * 1e3:.3f} mm over 100 seeded runs, reruns byte-exact, {elapsed:.1f} s")
    assert ok


def test_criterion_8_result_structure_and_tuning_fixture(fixtures_dir, us_profile, tmp_path):
    tuned = config_from_mapping(yaml.safe_load((fixtures_dir / "perceiver_tuned.yaml").read_text()))
    perceiver = tuned.perceiver
    sigma = tuned.vortex_profile_sigma
    vx_profile = gaussian_profile(sigma)

    results = []
    for condition in double_point_conditions():
        profile = us_profile if condition.target_stimulus == "ultrasound" else vx_profile
        results.append(run_method_of_limits(condition, perceiver, profile))
    with (tmp_path / "double_point.csv").open("w") as fh:
        write_double_point_csv(results, fh)
    rows = (tmp_path / "double_point.csv").read_text().splitlines()
    double_conditions = {r.split(",")[0] for r in rows[1:]}
    structure_dp = len(double_conditions) == 7 and {c[1] for c in double_conditions} == set("abcdefg")

    perceptual = [(c, run_perceptual_threshold(c, perceiver)) for c in perceptual_conditions()]
    with (tmp_path / "perceptual.csv").open("w") as fh:
        write_perceptual_csv(perceptual, fh)
    prows = (tmp_path / "perceptual.csv").read_text().splitlines()[1:]
    structure_pc = len(prows) == 6 * 6 and len({r.split(",")[0] for r in prows}) == 6

    rates = {hz: run_simultaneous(perceiver, 5.73e-3) for hz in (50.0, 200.0)}
    with (tmp_path / "simultaneous.csv").open("w") as fh:
        write_simultaneous_csv(rates, fh)
    srows = (tmp_path / "simultaneous.csv").read_text().splitlines()
    structure_si = len(srows) == 3 and srows[0].endswith("reference_rate_percent")

    by_label = {r.condition.label: r.threshold for r in results}
    us_in_band = 4e-3 <= by_label["a"] <= 9e-3 and 4e-3 <= by_label["b"] <= 9e-3
    vx_in_band = 8e-3 <= by_label["c"] <= 14e-3

    ok = structure_dp and structure_pc and structure_si and us_in_band and vx_in_band
    _report(
        8,
        ok,
        f"7 two-point conditions, 6x6 perceptual rows, 2-row simultaneous table; "
        f"tuned thresholds us {by_label['a'] * 1e3:.2f} mm in [4,9], vortex {by_label['c'] * 1e3:.2f} mm in [8,14]",
    )
    assert structure_dp
    assert structure_pc
    assert structure_si
    assert us_in_band
    assert vx_in_band


def test_criterion_9_wire_round_trip_and_corruption():
    rng = np.random.default_rng(99)
    carrier = 40e3
    scale = carrier * protocol.DELAY_COUNTS_PER_PERIOD
    max_delay = 0xFFFF / scale
    tol = 1.0 / (512 * carrier)

    worst_err = 0.0
    for _ in range(10_000):
        n = int(rng.integers(0, 3))
        times = np.sort(rng.integers(0, 1_000_000, n))
        events = []
        for k in range(n):
            if rng.random() < 0.5:
                rows, cols = int(rng.integers(1, 3)), int(rng.integers(1, 3))
                delays = rng.uniform(0.0, max_delay, (rows, cols))
                events.append(
                    PhaseFrameEvent(
                        emit_time=int(times[k]) / 1e6,
                        target=Point3(*rng.uniform(-0.1, 0.2, 3)),
                        delays=DelayTable(delays),
                        intensity=float(rng.integers(0, 1249)),
                        on_duration=float(rng.uniform(1e-4, 0.05)),
                        carrier_frequency_hz=carrier,
                        predicted_arrival=float(rng.uniform(0, 1)),
                        focal_index=k,
                    )
                )
            else:
                events.append(
                    CannonTriggerEvent(
                        emit_time=int(times[k]) / 1e6,
                        cannon_id=int(rng.integers(0, 0xFFFF)),
                        target=Point3(*rng.uniform(-0.1, 0.2, 3)),
                        predicted_arrival=float(rng.uniform(0, 1)),
                    )
                )
        schedule = StimulusSchedule.from_events(events)
        data = protocol.encode(schedule)
        decoded = protocol.decode(data)
        assert protocol.encode(decoded) == data
        for orig, back in zip(schedule.events, decoded.events):
            if isinstance(orig, PhaseFrameEvent):
                err = float(np.abs(back.delays.delays - orig.delays.delays).max())
                worst_err = max(worst_err, err)

    reference = protocol.encode(
        StimulusSchedule.from_events(
            [
                CannonTriggerEvent(0.0, 1, Point3(0, 0, 0.15), 0.02),
                PhaseFrameEvent(
                    emit_time=0.03,
                    target=Point3(0, 0, 0.15),
                    delays=DelayTable(np.arange(9, dtype=float).reshape(3, 3) / scale),
                    intensity=624.0,
                    on_duration=0.01,
                    carrier_frequency_hz=carrier,
                    predicted_arrival=0.0304,
                ),
            ]
        )
    )
    detected = 0
    for _ in range(10_000):
        pos = int(rng.integers(0, len(reference)))
        flip = int(rng.integers(1, 256))
        corrupted = bytearray(reference)
        corrupted[pos] ^= flip
        try:
            protocol.decode(bytes(corrupted))
        except DecodeError:
            detected += 1

    ok = worst_err <= tol and detected == 10_000
    _report(
        9,
        ok,
        f"10k round-trips, worst delay error {worst_err:.3e} s (tol {tol:.3e}); "
        f"{detected}/10000 corruptions detected",
    )
    assert worst_err <= tol
    assert detected == 10_000
