"""Sonovortex: computational engine for a cross-field aerial haptics device.

The device pairs a focused-ultrasound phased array with an air-vortex
cannon. This package implements the full computational stack between a
scene description and the emitter hardware: focal-delay computation,
pressure-field simulation, vortex formation and kinematics, co-arrival
scheduling, force calibration, a wire protocol with loopback emulator,
and a simulated replay of the device's psychophysics protocols.
"""

from .acoustic import (
    DelayTable,
    FocalPoint,
    ModulationConfig,
    PressureField,
    TransducerArray,
    apply_modulation,
    compute_delays,
    focal_spot_width,
    intensity_to_force,
    simulate_field,
)
from .calibration import (
    CalibrationCurve,
    CalibrationPoint,
    fit_cannon_curve,
    fit_ultrasound_fmax,
    implied_t_cone,
    setting_for_force,
)
from .config import EngineConfig, default_config, load_config, save_config
from .errors import (
    ConfigurationError,
    DecodeError,
    DomainError,
    EncodingError,
    EngineError,
    FitError,
    GeometryError,
    InternalConsistencyError,
    NonConvergenceError,
    OutOfRangeError,
    TargetingError,
)
from .geometry import Point3, SampleGrid, distance
from .protocol import decode, emulate, encode
from .psychophysics import (
    ExperimentCondition,
    MethodOfLimitsResult,
    PerceiverModel,
    StimulusProfile,
    ThresholdRun,
    run_method_of_limits,
    run_perceptual_threshold,
    run_simultaneous,
)
from .scheduler import (
    CompensationPolicy,
    HapticImage,
    StimulusSchedule,
    co_arrival_offset,
    emit_schedule,
    render_image,
    schedule_cross_field,
)
from .vortex import (
    CannonSpec,
    VortexShot,
    is_stable,
    min_stable_aperture,
    slug_length,
    stroke_ratio,
    travel_time,
    vortex_speed,
)

__version__ = "0.1.0"
