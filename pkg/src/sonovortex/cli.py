"""Command-line interface.

Subcommands mirror the engine's operations: ``delays``, ``field``,
``stability``, ``schedule``, ``experiment``, ``calibrate``. Every command
is deterministic given a config file and seed. Delimited outputs (CSV,
PGM, wire stream) are written to ``--out-dir`` together with a rendered
matplotlib figure for each report.

Exit codes: 0 success, 1 internal error, 2 invalid input or configuration.

``--units paper`` switches the boundary units to the device study's
conventions (millimeters and millinewtons); everything internal stays SI.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import report
from .acoustic import FocalPoint, ModulationConfig, compute_delays, focal_spot_width, simulate_field
from .calibration import fit_cannon_curve, fit_ultrasound_fmax, load_points_csv
from .config import (
    EngineConfig,
    config_from_mapping,
    curve_to_mapping,
    default_config,
    load_config,
    save_config,
    with_calibration,
)
from .errors import ConfigurationError, DomainError, EngineError
from .geometry import Point3, SampleGrid
from .psychophysics import (
    DOUBLE_POINT_ULTRASOUND_FORCE,
    SIMULTANEOUS_CANNON_FORCE,
    double_point_conditions,
    gaussian_profile,
    perceptual_conditions,
    run_method_of_limits,
    run_perceptual_threshold,
    run_simultaneous,
    ultrasound_force_profile,
    write_double_point_csv,
    write_perceptual_csv,
    write_simultaneous_csv,
)
from .scheduler import (
    HapticImage,
    co_arrival_offset,
    emit_schedule,
    implied_mechanical_latency,
    render_image,
    schedule_cross_field,
)
from .vortex import VortexShot, classify_formation, is_stable, min_stable_aperture

CONFIG_ENV_VAR = "SONOVORTEX_CONFIG"


def _in_length(value: float, units: str) -> float:
    return value * 1e-3 if units == "paper" else value


def _out_length(value: float, units: str) -> float:
    return value * 1e3 if units == "paper" else value


def _length_unit(units: str) -> str:
    return "mm" if units == "paper" else "m"


def _in_volume(value: float, units: str) -> float:
    return value * 1e-9 if units == "paper" else value


def _load_engine_config(args) -> EngineConfig:
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    config = load_config(path) if path else default_config()
    return config


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_delays(args) -> int:
    config = _load_engine_config(args)
    focus = Point3(*(_in_length(v, args.units) for v in args.focus))
    table = compute_delays(config.array, focus)
    normalized = table.normalized()
    out = _out_dir(args) / "delays.csv"
    with out.open("w") as fh:
        fh.write("i,j,delay_s,normalized_delay_s\n")
        for i in range(config.array.rows):
            for j in range(config.array.cols):
                fh.write(f"{i},{j},{float(table.delays[i, j])!r},{float(normalized.delays[i, j])!r}\n")
    span = (table.delays.max() - table.delays.min()) * 1e6
    print(f"wrote {out}")
    print(f"delay span {span:.3f} us across {config.array.rows}x{config.array.cols} elements")
    return 0


def cmd_field(args) -> int:
    config = _load_engine_config(args)
    focus = Point3(*(_in_length(v, args.units) for v in args.focus))
    extents = tuple(_in_length(v, args.units) for v in args.grid_extent)
    grid = SampleGrid.centered(focus, extents, tuple(args.grid_res))
    delays = compute_delays(config.array, focus)
    field = simulate_field(config.array, delays, grid)
    out = _out_dir(args)
    with (out / "field.csv").open("w") as fh:
        field.to_csv(fh)
    wrote = [str(out / "field.csv")]
    if sum(1 for n in grid.resolution if n == 1) == 1:
        with (out / "field.pgm").open("wb") as fh:
            field.to_pgm(fh)
        report.save_field_heatmap(field, out / "field.png", focus=focus)
        wrote += [str(out / "field.pgm"), str(out / "field.png")]
    peak = field.argmax_position()
    unit = _length_unit(args.units)
    print(f"wrote {', '.join(wrote)}")
    print(
        f"argmax at ({_out_length(peak.x, args.units):.4g}, {_out_length(peak.y, args.units):.4g}, "
        f"{_out_length(peak.z, args.units):.4g}) {unit}"
    )
    try:
        width = focal_spot_width(field, focus)
        print(
            f"focal FWHM {_out_length(width, args.units):.4g} {unit} "
            f"(wavelength {_out_length(config.array.wavelength, args.units):.4g} {unit})"
        )
    except DomainError:
        pass
    return 0


def cmd_stability(args) -> int:
    config = _load_engine_config(args)
    volume = _in_volume(args.slug_volume, args.units) if args.slug_volume is not None else config.cannon.slug_volume
    aperture = _in_length(args.aperture, args.units) if args.aperture is not None else config.cannon.aperture_diameter
    result = is_stable(volume, aperture)
    min_d = min_stable_aperture(volume)
    classification = classify_formation(volume, aperture)
    unit = _length_unit(args.units)
    out = _out_dir(args) / "stability.csv"
    with out.open("w") as fh:
        fh.write(f"slug_volume_m3,aperture_{unit},ratio,stable,margin,min_stable_aperture_{unit},classification\n")
        fh.write(
            f"{volume!r},{_out_length(aperture, args.units)!r},{result.ratio!r},{result.stable},"
            f"{result.margin!r},{_out_length(min_d, args.units)!r},{classification}\n"
        )
    print(f"wrote {out}")
    print(f"stroke ratio 4V/(pi D^3) = {result.ratio:.4f} (stability limit 4.5)")
    print(f"stable: {result.stable} (margin {result.margin:+.4f})")
    print(f"minimum stable aperture: {_out_length(min_d, args.units):.4g} {unit}")
    print(f"formation classification: {classification}")
    return 0


def _load_scene(path: str):
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"scene file {path} not found") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"scene file {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict) or "focal_points" not in raw:
        raise ConfigurationError("scene file must be a mapping with a 'focal_points' list")
    points = []
    for k, fp in enumerate(raw["focal_points"]):
        try:
            points.append(
                FocalPoint(
                    position=Point3(fp["x_mm"] * 1e-3, fp["y_mm"] * 1e-3, fp["z_mm"] * 1e-3),
                    intensity=float(fp["intensity"]),
                    duration=float(fp["duration_ms"]) * 1e-3,
                )
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"scene focal point {k}: needs x_mm, y_mm, z_mm, intensity, duration_ms ({exc})")
    modulation = None
    if raw.get("modulation"):
        mod = raw["modulation"]
        modulation = ModulationConfig(frequency_hz=float(mod["frequency_hz"]), duty=float(mod.get("duty", 0.5)))
    target = None
    if raw.get("vortex_target"):
        vt = raw["vortex_target"]
        target = Point3(vt["x_mm"] * 1e-3, vt["y_mm"] * 1e-3, vt["z_mm"] * 1e-3)
    return HapticImage(tuple(points)), modulation, target


def cmd_schedule(args) -> int:
    config = _load_engine_config(args)
    image, modulation, vortex_target = _load_scene(args.scene)
    if vortex_target is not None:
        shot = VortexShot.aimed(config.cannon, config.cannon_origin, vortex_target)
        policy = replace(
            config.policy,
            mechanical_latency=config.policy.mechanical_latency + config.cannon.mechanical_latency,
        )
        schedule = schedule_cross_field(image, shot, config.array, policy, modulation)
        offset = co_arrival_offset(vortex_target, shot, config.array, policy)
        print(f"compensation mode {policy.mode}: ultrasound delayed {offset * 1e3:.3f} ms after trigger")
        if policy.mode == "fixed":
            implied = implied_mechanical_latency(vortex_target, shot, config.array, policy.fixed_offset)
            print(f"implied mechanical latency of the fixed offset: {implied * 1e3:.3f} ms")
    else:
        schedule = render_image(image, config.array, modulation)
    out = _out_dir(args)
    (out / "schedule.svx").write_bytes(emit_schedule(schedule))
    with (out / "schedule.csv").open("w") as fh:
        schedule.to_csv(fh)
    report.save_schedule_timeline(schedule, out / "schedule.png")
    print(f"wrote {out / 'schedule.svx'}, {out / 'schedule.csv'}, {out / 'schedule.png'}")
    print(f"{len(schedule)} events; last emission at {schedule.events[-1].emit_time * 1e3:.3f} ms")
    return 0


def _experiment_perceiver(args, config: EngineConfig):
    perceiver = config.perceiver
    sigma = config.profile_sigma()
    if args.perceiver:
        try:
            raw = yaml.safe_load(Path(args.perceiver).read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"perceiver file {args.perceiver} not found") from None
        override = config_from_mapping(raw if isinstance(raw, dict) else {})
        perceiver = override.perceiver
        if override.vortex_profile_sigma is not None:
            sigma = override.vortex_profile_sigma
    if args.seed is not None:
        perceiver = replace(perceiver, seed=args.seed)
    return perceiver, sigma


def cmd_experiment(args) -> int:
    config = _load_engine_config(args)
    perceiver, sigma = _experiment_perceiver(args, config)
    out = _out_dir(args)
    if args.protocol == "double-point":
        us_profile = ultrasound_force_profile(config.array, config.focus())
        vx_profile = gaussian_profile(sigma)
        results = []
        for condition in double_point_conditions():
            profile = us_profile if condition.target_stimulus == "ultrasound" else vx_profile
            results.append(
                run_method_of_limits(
                    condition,
                    perceiver,
                    profile,
                    platform_step=config.platform_step,
                    max_separation=config.max_separation,
                )
            )
        with (out / "double_point.csv").open("w") as fh:
            write_double_point_csv(results, fh, units=args.units)
        report.save_double_point_figure(results, out / "double_point.png")
        print(f"wrote {out / 'double_point.csv'}, {out / 'double_point.png'}")
        for res in results:
            print(f"{res.condition.describe()}: threshold {res.threshold * 1e3:.2f} mm")
    elif args.protocol == "perceptual":
        results = []
        for condition in perceptual_conditions():
            results.append((condition, run_perceptual_threshold(condition, perceiver)))
        with (out / "perceptual.csv").open("w") as fh:
            write_perceptual_csv(results, fh, units=args.units)
        report.save_perceptual_figure(results, out / "perceptual.png")
        print(f"wrote {out / 'perceptual.csv'}, {out / 'perceptual.png'}")
        for condition, rates in results:
            crossing = next((r.level for r in rates if r.rate_percent >= 50.0), None)
            shown = "none" if crossing is None else f"{crossing * 1e3:.2f} mN"
            print(f"{condition.describe()}: first level at >=50% perception: {shown}")
    elif args.protocol == "simultaneous":
        rates = {
            hz: run_simultaneous(perceiver, DOUBLE_POINT_ULTRASOUND_FORCE, SIMULTANEOUS_CANNON_FORCE)
            for hz in (50.0, 200.0)
        }
        with (out / "simultaneous.csv").open("w") as fh:
            write_simultaneous_csv(rates, fh)
        report.save_simultaneous_figure(rates, out / "simultaneous.png")
        print(f"wrote {out / 'simultaneous.csv'}, {out / 'simultaneous.png'}")
        for hz in sorted(rates):
            print(f"ultrasound {hz:g} Hz + cannon: simulated rate {rates[hz]:.1f}%")
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigurationError(f"unknown protocol {args.protocol!r}")
    return 0


def cmd_calibrate(args) -> int:
    try:
        with open(args.points) as fh:
            points = load_points_csv(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"points file {args.points} not found") from None
    curve = fit_cannon_curve(points) if args.kind == "cannon" else fit_ultrasound_fmax(points)
    out = _out_dir(args)
    report.save_calibration_figure(points, curve, out / "calibration.png")
    if args.kind == "cannon":
        print(
            f"cannon-linear fit: slope {curve.slope * 1e3:.4f} mN/V, intercept {curve.intercept * 1e3:.4f} mN, "
            f"RMS residual {curve.residual * 1e3:.4g} mN"
        )
    else:
        print(f"ultrasound-sin2 fit: f_max {curve.f_max * 1e3:.4f} mN, RMS residual {curve.residual * 1e3:.4g} mN")
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if config_path:
        config = load_config(config_path)
        save_config(with_calibration(config, args.kind, curve), config_path)
        print(f"updated calibration.{args.kind} in {config_path}")
    else:
        snippet = out / "calibration.yaml"
        snippet.write_text(yaml.safe_dump({"calibration": {args.kind: curve_to_mapping(curve)}}, sort_keys=False))
        print(f"no config file given; wrote {snippet}")
    print(f"wrote {out / 'calibration.png'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonovortex",
        description="Cross-field aerial haptics engine: phased-array focusing, vortex kinematics, "
        "co-arrival scheduling, calibration, and psychophysics protocol replay.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"engine config YAML (default: ${CONFIG_ENV_VAR} or built-ins)")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--units", choices=("si", "paper"), default="si", help="boundary units: si (m, N) or paper (mm, mN)")
    common.add_argument("--seed", type=int, default=None, help="override the perceiver seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("delays", parents=[common], help="focal delay table for one focus")
    p.add_argument("--focus", nargs=3, type=float, required=True, metavar=("X", "Y", "Z"))
    p.set_defaults(func=cmd_delays)

    p = sub.add_parser("field", parents=[common], help="simulate the pressure field on a grid")
    p.add_argument("--focus", nargs=3, type=float, required=True, metavar=("X", "Y", "Z"))
    p.add_argument("--grid-extent", nargs=3, type=float, default=None, metavar=("EX", "EY", "EZ"))
    p.add_argument("--grid-res", nargs=3, type=int, default=[61, 61, 1], metavar=("NX", "NY", "NZ"))
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("stability", parents=[common], help="vortex formation stability report")
    p.add_argument("--slug-volume", type=float, default=None, help="slug volume (m^3, or mm^3 with --units paper)")
    p.add_argument("--aperture", type=float, default=None, help="aperture diameter (m, or mm with --units paper)")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("schedule", parents=[common], help="render a scene into a wire-format schedule")
    p.add_argument("--scene", required=True, help="scene YAML (focal points, modulation, optional vortex target)")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("experiment", parents=[common], help="replay a psychophysics protocol")
    p.add_argument("--protocol", choices=("double-point", "perceptual", "simultaneous"), required=True)
    p.add_argument("--perceiver", default=None, help="partial config YAML overriding the perceiver")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("calibrate", parents=[common], help="fit a setting-to-force curve")
    p.add_argument("--points", required=True, help="CSV with header setting,force_mN")
    p.add_argument("--kind", choices=("cannon", "ultrasound"), required=True)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "grid_extent", None) is None and args.command == "field":
        args.grid_extent = [0.06, 0.06, 0.001] if args.units == "si" else [60.0, 60.0, 1.0]
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
