"""Engine configuration: one YAML file describing the whole rig.

The file uses explicitly unit-suffixed keys (``pitch_mm``, ``cone_time_ms``,
``detection_threshold_mN``); values are converted to SI at load time and
every module invariant is checked immediately, so a bad file fails fast
naming the violated constraint. See the shipped ``fixtures/engine.yaml``
for the full schema with defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .calibration import KIND_CANNON, KIND_ULTRASOUND, CalibrationCurve
from .acoustic import TransducerArray
from .errors import ConfigurationError, DomainError
from .geometry import Point3
from .psychophysics import PerceiverModel
from .scheduler import CompensationPolicy
from .vortex import CannonSpec, slug_length


@dataclass(frozen=True)
class EngineConfig:
    """Validated bundle of every module's parameters."""

    array: TransducerArray
    cannon: CannonSpec
    cannon_origin: Point3
    cannon_direction: tuple[float, float, float]
    policy: CompensationPolicy
    perceiver: PerceiverModel
    working_distance: float = 0.15
    vortex_profile_sigma: float | None = None
    platform_step: float = 1e-4
    max_separation: float = 0.04
    calibration: dict[str, CalibrationCurve] = field(default_factory=dict)

    def __post_init__(self):
        if not self.working_distance > 0:
            raise ConfigurationError(f"working distance must be > 0, got {self.working_distance}")
        if self.vortex_profile_sigma is not None and not self.vortex_profile_sigma > 0:
            raise ConfigurationError(f"vortex profile sigma must be > 0, got {self.vortex_profile_sigma}")
        if not self.platform_step > 0:
            raise ConfigurationError(f"platform step must be > 0, got {self.platform_step}")
        if not self.max_separation > self.platform_step:
            raise ConfigurationError("max separation must exceed the platform step")
        for key in self.calibration:
            if key not in ("cannon", "ultrasound"):
                raise ConfigurationError(f"unknown calibration slot {key!r}")

    def focus(self) -> Point3:
        """Nominal stimulus target on the working axis."""
        return Point3(0.0, 0.0, self.working_distance)

    def profile_sigma(self) -> float:
        """Vortex footprint sigma; defaults to half the aperture diameter."""
        if self.vortex_profile_sigma is not None:
            return self.vortex_profile_sigma
        return self.cannon.aperture_diameter / 2.0


#: Published average ring speed of the device, m/s; pins the default cone time.
NOMINAL_VORTEX_SPEED = 7.2


def default_config() -> EngineConfig:
    """Built-in defaults matching the shipped ``fixtures/engine.yaml``."""
    slug_volume = 33_670e-9
    aperture = 0.021
    cannon = CannonSpec(
        slug_volume=slug_volume,
        aperture_diameter=aperture,
        cone_time=slug_length(slug_volume, aperture) / (2 * NOMINAL_VORTEX_SPEED),
        actuation_rate_hz=30.0,
        mechanical_latency=0.0,
    )
    return EngineConfig(
        array=TransducerArray.centered(),
        cannon=cannon,
        cannon_origin=Point3(0.0, 0.0, 0.0),
        cannon_direction=(0.0, 0.0, 1.0),
        policy=CompensationPolicy(mode="fixed", fixed_offset=0.030),
        perceiver=PerceiverModel(),
    )


def _section(data: dict, name: str) -> dict:
    sub = data.get(name, {})
    if sub is None:
        return {}
    if not isinstance(sub, dict):
        raise ConfigurationError(f"config section {name!r} must be a mapping")
    return sub


def _build(section_name: str, builder, *args, **kwargs):
    try:
        return builder(*args, **kwargs)
    except DomainError as exc:
        raise ConfigurationError(f"config section {section_name!r}: {exc}") from exc


def _curve_from_mapping(slot: str, data: dict) -> CalibrationCurve:
    try:
        kind = data["kind"]
        setting_range = (float(data["setting_min"]), float(data["setting_max"]))
        if kind == KIND_CANNON:
            return CalibrationCurve(
                kind=kind,
                setting_range=setting_range,
                slope=float(data["slope_mN_per_setting"]) * 1e-3,
                intercept=float(data["intercept_mN"]) * 1e-3,
                residual=float(data.get("residual_mN", 0.0)) * 1e-3,
            )
        if kind == KIND_ULTRASOUND:
            return CalibrationCurve(
                kind=kind,
                setting_range=setting_range,
                f_max=float(data["f_max_mN"]) * 1e-3,
                residual=float(data.get("residual_mN", 0.0)) * 1e-3,
            )
        raise ConfigurationError(f"calibration slot {slot!r}: unknown curve kind {kind!r}")
    except KeyError as exc:
        raise ConfigurationError(f"calibration slot {slot!r}: missing key {exc.args[0]!r}") from None


def curve_to_mapping(curve: CalibrationCurve) -> dict:
    out: dict = {
        "kind": curve.kind,
        "setting_min": curve.setting_range[0],
        "setting_max": curve.setting_range[1],
        "residual_mN": curve.residual * 1e3,
    }
    if curve.kind == KIND_CANNON:
        out["slope_mN_per_setting"] = curve.slope * 1e3
        out["intercept_mN"] = curve.intercept * 1e3
    else:
        out["f_max_mN"] = curve.f_max * 1e3
    return out


def config_from_mapping(data: dict) -> EngineConfig:
    """Build and validate a config from parsed YAML."""
    base = default_config()

    arr = _section(data, "array")
    array = _build(
        "array",
        TransducerArray.centered,
        rows=int(arr.get("rows", base.array.rows)),
        cols=int(arr.get("cols", base.array.cols)),
        pitch=float(arr.get("pitch_mm", base.array.pitch * 1e3)) * 1e-3,
        carrier_frequency_hz=float(arr.get("carrier_frequency_hz", base.array.carrier_frequency_hz)),
        speed_of_sound=float(arr.get("speed_of_sound_m_s", base.array.speed_of_sound)),
    )

    can = _section(data, "cannon")
    cannon = _build(
        "cannon",
        CannonSpec,
        slug_volume=float(can.get("slug_volume_mm3", base.cannon.slug_volume * 1e9)) * 1e-9,
        aperture_diameter=float(can.get("aperture_diameter_mm", base.cannon.aperture_diameter * 1e3)) * 1e-3,
        cone_time=float(can.get("cone_time_ms", base.cannon.cone_time * 1e3)) * 1e-3,
        actuation_rate_hz=float(can.get("actuation_rate_hz", base.cannon.actuation_rate_hz)),
        mechanical_latency=float(can.get("mechanical_latency_ms", base.cannon.mechanical_latency * 1e3)) * 1e-3,
    )
    origin_mm = can.get("origin_mm", [0.0, 0.0, 0.0])
    direction = can.get("direction", [0.0, 0.0, 1.0])
    if len(origin_mm) != 3 or len(direction) != 3:
        raise ConfigurationError("cannon origin_mm and direction must be 3-vectors")
    cannon_origin = _build("cannon", Point3, *(float(v) * 1e-3 for v in origin_mm))
    norm = sum(float(v) ** 2 for v in direction) ** 0.5
    if norm == 0:
        raise ConfigurationError("cannon direction must be non-zero")
    cannon_direction = tuple(float(v) / norm for v in direction)

    comp = _section(data, "compensation")
    policy = _build(
        "compensation",
        CompensationPolicy,
        mode=str(comp.get("mode", base.policy.mode)),
        fixed_offset=float(comp.get("fixed_offset_ms", base.policy.fixed_offset * 1e3)) * 1e-3,
        mechanical_latency=float(
            comp.get("extra_mechanical_latency_ms", base.policy.mechanical_latency * 1e3)
        )
        * 1e-3,
    )

    per = _section(data, "perceiver")
    perceiver = _build(
        "perceiver",
        PerceiverModel,
        detection_threshold=float(per.get("detection_threshold_mN", base.perceiver.detection_threshold * 1e3)) * 1e-3,
        valley_fraction=float(per.get("valley_fraction", base.perceiver.valley_fraction)),
        seed=int(per.get("seed", base.perceiver.seed)),
        noise_sd=float(per.get("noise_sd_mN", base.perceiver.noise_sd * 1e3)) * 1e-3,
        masking_fraction=float(per.get("masking_fraction", base.perceiver.masking_fraction)),
        indecision_band=float(per.get("indecision_band", base.perceiver.indecision_band)),
        peak_floor=float(per.get("peak_floor", base.perceiver.peak_floor)),
    )

    exp = _section(data, "experiment")
    sigma_mm = exp.get("vortex_profile_sigma_mm")
    calibration = {}
    cal = _section(data, "calibration")
    for slot, mapping in cal.items():
        if slot not in ("cannon", "ultrasound"):
            raise ConfigurationError(f"unknown calibration slot {slot!r}")
        if mapping:
            calibration[slot] = _build(f"calibration.{slot}", _curve_from_mapping, slot, mapping)

    return _build(
        "root",
        EngineConfig,
        array=array,
        cannon=cannon,
        cannon_origin=cannon_origin,
        cannon_direction=cannon_direction,  # type: ignore[arg-type]
        policy=policy,
        perceiver=perceiver,
        working_distance=float(exp.get("working_distance_mm", base.working_distance * 1e3)) * 1e-3,
        vortex_profile_sigma=None if sigma_mm is None else float(sigma_mm) * 1e-3,
        platform_step=float(exp.get("platform_step_mm", base.platform_step * 1e3)) * 1e-3,
        max_separation=float(exp.get("max_separation_mm", base.max_separation * 1e3)) * 1e-3,
        calibration=calibration,
    )


def config_to_mapping(config: EngineConfig) -> dict:
    data = {
        "array": {
            "rows": config.array.rows,
            "cols": config.array.cols,
            "pitch_mm": config.array.pitch * 1e3,
            "carrier_frequency_hz": config.array.carrier_frequency_hz,
            "speed_of_sound_m_s": config.array.speed_of_sound,
        },
        "cannon": {
            "slug_volume_mm3": config.cannon.slug_volume * 1e9,
            "aperture_diameter_mm": config.cannon.aperture_diameter * 1e3,
            "cone_time_ms": config.cannon.cone_time * 1e3,
            "actuation_rate_hz": config.cannon.actuation_rate_hz,
            "mechanical_latency_ms": config.cannon.mechanical_latency * 1e3,
            "origin_mm": [config.cannon_origin.x * 1e3, config.cannon_origin.y * 1e3, config.cannon_origin.z * 1e3],
            "direction": list(config.cannon_direction),
        },
        "compensation": {
            "mode": config.policy.mode,
            "fixed_offset_ms": config.policy.fixed_offset * 1e3,
            "extra_mechanical_latency_ms": config.policy.mechanical_latency * 1e3,
        },
        "perceiver": {
            "detection_threshold_mN": config.perceiver.detection_threshold * 1e3,
            "valley_fraction": config.perceiver.valley_fraction,
            "seed": config.perceiver.seed,
            "noise_sd_mN": config.perceiver.noise_sd * 1e3,
            "masking_fraction": config.perceiver.masking_fraction,
            "indecision_band": config.perceiver.indecision_band,
            "peak_floor": config.perceiver.peak_floor,
        },
        "experiment": {
            "working_distance_mm": config.working_distance * 1e3,
            "vortex_profile_sigma_mm": None
            if config.vortex_profile_sigma is None
            else config.vortex_profile_sigma * 1e3,
            "platform_step_mm": config.platform_step * 1e3,
            "max_separation_mm": config.max_separation * 1e3,
        },
    }
    if config.calibration:
        data["calibration"] = {slot: curve_to_mapping(curve) for slot, curve in config.calibration.items()}
    return data


def load_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file {path} not found") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config file {path} is not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config file {path} must contain a mapping")
    return config_from_mapping(raw)


def save_config(config: EngineConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_mapping(config), sort_keys=False))


def with_calibration(config: EngineConfig, slot: str, curve: CalibrationCurve) -> EngineConfig:
    """Copy of ``config`` with one calibration slot replaced."""
    if slot not in ("cannon", "ultrasound"):
        raise ConfigurationError(f"unknown calibration slot {slot!r}")
    updated = dict(config.calibration)
    updated[slot] = curve
    return replace(config, calibration=updated)
