"""Experiment protocol harness with a pluggable simulated perceiver.

Replays the device's user-study protocols (method-of-limits two-point
series, perceptual-threshold sweeps, simultaneous presentation) against a
deterministic perceiver model. Human study results are shipped only as
reference constants for report overlays; the harness makes no claim of
reproducing them.

Perceiver model
---------------
Detection: a stimulus is perceived when its force reaches the detection
threshold, optionally raised by ``masking_fraction`` times any constant
background force and jittered per-trial by ``noise_sd``.

Two-point division: the combined lateral force profile of the two stimuli
is "divided" when it shows two local maxima (each at least ``peak_floor``
of the profile maximum, which keeps focal sidelobes from counting as
stimuli) whose inter-peak minimum drops below ``valley_fraction`` times
the smaller peak. Responses within ``indecision_band`` of that boundary
come back as "unknown" and are pooled with "not divided", as the original
protocol did.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import mean
from typing import Callable, NamedTuple

import numpy as np
from scipy.signal import find_peaks

from .acoustic import TransducerArray, compute_delays, _field_at_points
from .errors import ConfigurationError, DomainError, NonConvergenceError
from .geometry import Point3

RESPONSE_DIVIDED = "divided"
RESPONSE_NOT_DIVIDED = "not-divided"
RESPONSE_UNKNOWN = "unknown"
RESPONSE_PERCEIVED = "perceived"
RESPONSE_NOT_PERCEIVED = "not-perceived"

CONDITION_KINDS = (
    "ultrasound-only",
    "cannon-only",
    "cannon-with-constant-ultrasound",
    "ultrasound-with-constant-vortex",
    "simultaneous",
)

# Protocol constants of the original study. Forces are SI newtons.
DOUBLE_POINT_ULTRASOUND_FORCE = 5.73e-3
DOUBLE_POINT_CANNON_FORCE = 7.67e-3
CONSTANT_ULTRASOUND_FORCE = 9.7e-3
SIMULTANEOUS_CANNON_FORCE = 7.67e-3
CONSTANT_VORTEX_RATE_DOUBLE_POINT_HZ = 15.0
CONSTANT_VORTEX_RATE_PERCEPTUAL_HZ = 20.0
PLATFORM_STEP = 1e-4  # positioning accuracy of the stimulus platform

# Six per-stimulus force levels between the published min/max; the
# intermediate values are reconstructed by linear spacing.
ULTRASOUND_FORCE_LEVELS = tuple(float(v) for v in np.linspace(0.70e-3, 10.9e-3, 6))
VORTEX_FORCE_LEVELS = tuple(float(v) for v in np.linspace(0.66e-3, 13.7e-3, 6))

# Measured human baselines, kept for report overlays only - never oracles.
REFERENCE_DOUBLE_POINT_MM = {
    "a": 6.0,
    "b": 6.0,
    "c": 11.0,
    "d": 11.0,
    "e": 11.0,
    "f": 9.0,
    "g": 9.0,
}
REFERENCE_SIMULTANEOUS_RATE_PERCENT = {50.0: 95.2, 200.0: 100.0}
REFERENCE_ULTRASOUND_SATURATION_FORCE = 4e-3
REFERENCE_CANNON_PERCEPTION_FORCE = 11e-3
REFERENCE_MASKED_ULTRASOUND_50HZ_RATE_PERCENT = 20.0


@dataclass(frozen=True)
class PerceiverModel:
    """Deterministic stand-in for a study participant."""

    detection_threshold: float = 4e-3
    valley_fraction: float = 0.75
    seed: int = 0
    noise_sd: float = 0.0
    masking_fraction: float = 0.0
    indecision_band: float = 0.0
    peak_floor: float = 0.5

    def __post_init__(self):
        if not self.detection_threshold > 0:
            raise DomainError(f"detection threshold must be > 0, got {self.detection_threshold}")
        if not 0 < self.valley_fraction < 1:
            raise DomainError(f"valley fraction must be in (0, 1), got {self.valley_fraction}")
        if self.noise_sd < 0:
            raise DomainError(f"noise sd must be >= 0, got {self.noise_sd}")
        if self.masking_fraction < 0:
            raise DomainError(f"masking fraction must be >= 0, got {self.masking_fraction}")
        if not 0 <= self.indecision_band < 1:
            raise DomainError(f"indecision band must be in [0, 1), got {self.indecision_band}")
        if not 0 < self.peak_floor < 1:
            raise DomainError(f"peak floor must be in (0, 1), got {self.peak_floor}")


@dataclass(frozen=True)
class StimulusProfile:
    """Unit-peak lateral force profile of one stimulus on the palm plane."""

    offsets: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if offsets.ndim != 1 or offsets.shape != values.shape or offsets.size < 3:
            raise DomainError("profile needs matching 1D offsets/values with >= 3 samples")
        steps = np.diff(offsets)
        if not np.allclose(steps, steps[0], rtol=0, atol=1e-12):
            raise DomainError("profile offsets must be uniformly spaced")
        peak = values.max()
        if not peak > 0:
            raise DomainError("profile must have a positive peak")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "values", values / peak)

    @property
    def step(self) -> float:
        return float(self.offsets[1] - self.offsets[0])

    def shifted(self, separation: float) -> np.ndarray:
        """Profile translated by ``separation``, zero-padded at the edges."""
        cells = separation / self.step
        k = round(cells)
        if abs(cells - k) <= 1e-6 and 0 <= k:
            out = np.zeros_like(self.values)
            if k < self.values.size:
                out[k:] = self.values[: self.values.size - k]
            return out
        return np.interp(self.offsets - separation, self.offsets, self.values, left=0.0, right=0.0)


def gaussian_profile(sigma: float, half_width: float = 0.06, step: float = 5e-5) -> StimulusProfile:
    """Gaussian footprint, the model for the vortex ring's contact patch."""
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    n = round(half_width / step)
    offsets = (np.arange(2 * n + 1) - n) * step
    return StimulusProfile(offsets, np.exp(-(offsets**2) / (2 * sigma**2)))


def ultrasound_force_profile(
    array: TransducerArray,
    focus: Point3 = Point3(0.0, 0.0, 0.15),
    half_width: float = 0.06,
    step: float = 5e-5,
) -> StimulusProfile:
    """Radiation-force profile along x through the focus.

    Radiation pressure scales with the squared field magnitude, so the
    simulated |field| lateral cut is squared before normalization.
    """
    delays = compute_delays(array, focus)
    n = round(half_width / step)
    offsets = (np.arange(2 * n + 1) - n) * step
    points = np.stack(
        [offsets + focus.x, np.full_like(offsets, focus.y), np.full_like(offsets, focus.z)],
        axis=1,
    )
    values, singular = _field_at_points(array, delays, points)
    magnitude = np.where(singular, 0.0, np.abs(values))
    return StimulusProfile(offsets, magnitude**2)


@dataclass(frozen=True)
class ExperimentCondition:
    """One stimulus condition of the two-point or perceptual protocols."""

    label: str
    kind: str
    modulation_hz: float | None = None
    target_force: float = DOUBLE_POINT_ULTRASOUND_FORCE
    background_force: float = 0.0
    background_rate_hz: float | None = None
    force_levels: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in CONDITION_KINDS:
            raise ConfigurationError(f"unknown condition kind {self.kind!r}")
        if not self.target_force > 0:
            raise ConfigurationError(f"target force must be > 0, got {self.target_force}")
        if self.background_force < 0:
            raise ConfigurationError(f"background force must be >= 0, got {self.background_force}")
        if self.modulation_hz is not None and not self.modulation_hz > 0:
            raise ConfigurationError(f"modulation frequency must be > 0, got {self.modulation_hz}")
        if self.force_levels is not None:
            levels = tuple(float(v) for v in self.force_levels)
            if not levels or any(v <= 0 for v in levels):
                raise ConfigurationError("force levels must be positive")
            object.__setattr__(self, "force_levels", levels)

    @property
    def target_stimulus(self) -> str:
        """Which stimulus the protocol varies: 'ultrasound' or 'cannon'."""
        if self.kind in ("ultrasound-only", "ultrasound-with-constant-vortex"):
            return "ultrasound"
        if self.kind in ("cannon-only", "cannon-with-constant-ultrasound"):
            return "cannon"
        return "both"

    def describe(self) -> str:
        mod = f" {self.modulation_hz:g}Hz" if self.modulation_hz is not None else ""
        return f"({self.label}) {self.kind}{mod}"


def double_point_conditions() -> list[ExperimentCondition]:
    """The seven two-point conditions (a)-(g) of the original protocol."""
    us = DOUBLE_POINT_ULTRASOUND_FORCE
    ca = DOUBLE_POINT_CANNON_FORCE
    rate = CONSTANT_VORTEX_RATE_DOUBLE_POINT_HZ
    return [
        ExperimentCondition("a", "ultrasound-only", 50.0, us),
        ExperimentCondition("b", "ultrasound-only", 200.0, us),
        ExperimentCondition("c", "cannon-only", None, ca),
        ExperimentCondition("d", "cannon-with-constant-ultrasound", 50.0, ca, background_force=us),
        ExperimentCondition("e", "cannon-with-constant-ultrasound", 200.0, ca, background_force=us),
        ExperimentCondition("f", "ultrasound-with-constant-vortex", 50.0, us, background_force=ca, background_rate_hz=rate),
        ExperimentCondition("g", "ultrasound-with-constant-vortex", 200.0, us, background_force=ca, background_rate_hz=rate),
    ]


def perceptual_conditions() -> list[ExperimentCondition]:
    """The six perceptual-threshold conditions, each with its force levels."""
    rate = CONSTANT_VORTEX_RATE_PERCEPTUAL_HZ
    return [
        ExperimentCondition("us-50", "ultrasound-only", 50.0, force_levels=ULTRASOUND_FORCE_LEVELS),
        ExperimentCondition("us-200", "ultrasound-only", 200.0, force_levels=ULTRASOUND_FORCE_LEVELS),
        ExperimentCondition("cannon", "cannon-only", None, force_levels=VORTEX_FORCE_LEVELS),
        ExperimentCondition(
            "cannon-under-us",
            "cannon-with-constant-ultrasound",
            None,
            background_force=CONSTANT_ULTRASOUND_FORCE,
            force_levels=VORTEX_FORCE_LEVELS,
        ),
        ExperimentCondition(
            "us-50-under-vortex",
            "ultrasound-with-constant-vortex",
            50.0,
            background_force=SIMULTANEOUS_CANNON_FORCE,
            background_rate_hz=rate,
            force_levels=ULTRASOUND_FORCE_LEVELS,
        ),
        ExperimentCondition(
            "us-200-under-vortex",
            "ultrasound-with-constant-vortex",
            200.0,
            background_force=SIMULTANEOUS_CANNON_FORCE,
            background_rate_hz=rate,
            force_levels=ULTRASOUND_FORCE_LEVELS,
        ),
    ]


def build_condition_profile(
    condition: ExperimentCondition,
    array: TransducerArray | None = None,
    vortex_sigma: float | None = None,
    focus: Point3 = Point3(0.0, 0.0, 0.15),
) -> StimulusProfile:
    """Lateral profile of the condition's varied stimulus."""
    if condition.target_stimulus == "ultrasound":
        if array is None:
            raise ConfigurationError("ultrasound conditions need a transducer array")
        return ultrasound_force_profile(array, focus)
    if condition.target_stimulus == "cannon":
        if vortex_sigma is None:
            raise ConfigurationError("cannon conditions need a vortex footprint sigma")
        return gaussian_profile(vortex_sigma)
    raise ConfigurationError(f"condition {condition.describe()} has no single varied stimulus")


def combined_two_point_profile(
    profile: StimulusProfile,
    separation: float,
    force: float,
    background: float = 0.0,
) -> np.ndarray:
    """Force profile of standard + comparative stimuli plus background pedestal."""
    if separation < 0:
        raise DomainError(f"separation must be >= 0, got {separation}")
    return force * (profile.values + profile.shifted(separation)) + background


def two_point_response(
    perceiver: PerceiverModel,
    profile: StimulusProfile,
    separation: float,
    force: float,
    background: float = 0.0,
) -> str:
    """Twin-peak division judgment for one separation."""
    y = combined_two_point_profile(profile, separation, force, background)
    peaks, _ = find_peaks(y)
    if peaks.size == 0:
        return RESPONSE_NOT_DIVIDED
    heights = y[peaks]
    keep = heights >= perceiver.peak_floor * y.max()
    peaks, heights = peaks[keep], heights[keep]
    if peaks.size < 2:
        return RESPONSE_NOT_DIVIDED
    order = np.lexsort((peaks, -heights))
    top = sorted((int(peaks[order[0]]), int(peaks[order[1]])))
    p_small = float(min(heights[order[0]], heights[order[1]]))
    valley = float(y[top[0] : top[1] + 1].min())
    margin = perceiver.valley_fraction * p_small - valley
    band = perceiver.indecision_band * perceiver.valley_fraction * p_small
    if margin > band:
        return RESPONSE_DIVIDED
    if margin >= -band:
        return RESPONSE_UNKNOWN
    return RESPONSE_NOT_DIVIDED


@dataclass(frozen=True)
class TrialRecord:
    stimulus: float
    response: str


@dataclass(frozen=True)
class ThresholdRun:
    """One ascending or descending method-of-limits series."""

    direction: str
    step: float
    trials: tuple[TrialRecord, ...]
    crossing: float
    unknown_count: int = 0

    def __post_init__(self):
        if self.direction not in ("ascending", "descending"):
            raise DomainError(f"direction must be ascending/descending, got {self.direction!r}")
        object.__setattr__(self, "trials", tuple(self.trials))
        values = [t.stimulus for t in self.trials]
        sign = 1.0 if self.direction == "ascending" else -1.0
        if any(sign * (b - a) <= 0 for a, b in zip(values, values[1:])):
            raise DomainError(f"{self.direction} series stimuli must be strictly monotone")
        if len(values) >= 2:
            lo, hi = sorted(values[-2:])
            if not lo <= self.crossing <= hi:
                raise DomainError("crossing value must lie between the last two trials")


@dataclass(frozen=True)
class MethodOfLimitsResult:
    condition: ExperimentCondition
    threshold: float
    runs: tuple[ThresholdRun, ...]
    platform_step: float
    inter_stimulus_gap_s: float

    @property
    def unknown_total(self) -> int:
        return sum(r.unknown_count for r in self.runs)

    def log_text(self) -> str:
        """Canonical dump of every trial; byte-stable for determinism checks."""
        lines = [f"condition={self.condition.describe()}", f"platform_step={self.platform_step!r}"]
        for run in self.runs:
            lines.append(f"run direction={run.direction} crossing={run.crossing!r} unknown={run.unknown_count}")
            lines.extend(f"  {t.stimulus!r} {t.response}" for t in run.trials)
        lines.append(f"threshold={self.threshold!r}")
        return "\n".join(lines) + "\n"


def _run_series(
    direction: str,
    start: float,
    step: float,
    limit: float,
    respond: Callable[[float], str],
) -> ThresholdRun:
    # separations live on the integer platform grid, so ascending and
    # descending series visit bitwise-identical stimulus values
    trials: list[TrialRecord] = []
    unknown = 0
    if direction == "descending":
        indices = range(round(start / step), -1, -1)
    else:
        indices = range(round(start / step), round(limit / step) + 1)
    for m in indices:
        sep = m * step
        response = respond(sep)
        trials.append(TrialRecord(sep, response))
        if response == RESPONSE_UNKNOWN:
            unknown += 1
        flipped = (response != RESPONSE_DIVIDED) if direction == "descending" else (response == RESPONSE_DIVIDED)
        if flipped:
            if len(trials) < 2:
                raise NonConvergenceError(
                    f"{direction} series started on the wrong side of the threshold", trials
                )
            crossing = (trials[-2].stimulus + trials[-1].stimulus) / 2
            return ThresholdRun(direction, step, tuple(trials), crossing, unknown)
    raise NonConvergenceError(f"{direction} series never crossed within the platform range", trials)


def run_method_of_limits(
    condition: ExperimentCondition,
    perceiver: PerceiverModel,
    profile: StimulusProfile,
    platform_step: float = PLATFORM_STEP,
    max_separation: float = 0.04,
    repeats: int = 2,
    inter_stimulus_gap_s: float = 2.0,
) -> MethodOfLimitsResult:
    """Two descending and two ascending series; threshold = mean crossing.

    ``inter_stimulus_gap_s`` is the pause between standard and comparative
    stimuli. The original protocol leaves it unstated; it is recorded with
    the result and has no effect on the simulated perceiver.
    """
    if not platform_step > 0:
        raise DomainError(f"platform step must be > 0, got {platform_step}")
    if not max_separation > platform_step:
        raise DomainError("max separation must exceed the platform step")

    def respond(separation: float) -> str:
        return two_point_response(
            perceiver, profile, separation, condition.target_force, condition.background_force
        )

    runs: list[ThresholdRun] = []
    for _ in range(repeats):
        runs.append(_run_series("descending", max_separation, platform_step, 0.0, respond))
        runs.append(_run_series("ascending", 0.0, platform_step, max_separation, respond))
    threshold = mean(run.crossing for run in runs)
    return MethodOfLimitsResult(condition, threshold, tuple(runs), platform_step, inter_stimulus_gap_s)


class LevelRate(NamedTuple):
    level: float
    rate_percent: float


def _effective_threshold(perceiver: PerceiverModel, background: float, rng: np.random.Generator | None) -> float:
    eff = perceiver.detection_threshold + perceiver.masking_fraction * background
    if perceiver.noise_sd > 0 and rng is not None:
        eff += float(rng.normal(0.0, perceiver.noise_sd))
    return eff


def run_perceptual_threshold(
    condition: ExperimentCondition,
    perceiver: PerceiverModel,
    levels: tuple[float, ...] | None = None,
    trials_per_level: int = 10,
) -> list[LevelRate]:
    """Randomized detection trials; returns perception rate per force level."""
    if levels is None:
        levels = condition.force_levels
    if not levels:
        raise ConfigurationError("perceptual run needs at least one force level")
    if trials_per_level < 1:
        raise DomainError("need at least one trial per level")
    rng = np.random.default_rng(perceiver.seed)
    schedule = [(i, level) for i, level in enumerate(levels) for _ in range(trials_per_level)]
    order = rng.permutation(len(schedule))
    hits = [0] * len(levels)
    for slot in order:
        idx, level = schedule[slot]
        if level >= _effective_threshold(perceiver, condition.background_force, rng):
            hits[idx] += 1
    return [LevelRate(float(level), 100.0 * hits[i] / trials_per_level) for i, level in enumerate(levels)]


def run_simultaneous(
    perceiver: PerceiverModel,
    ultrasound_force: float,
    cannon_force: float = SIMULTANEOUS_CANNON_FORCE,
    trials: int = 10,
) -> float:
    """Perception rate for co-arriving stimuli.

    The fields do not interfere, so the presentation is perceived when
    either stimulus alone clears its effective threshold (each masked by
    the other when masking is enabled).
    """
    if not ultrasound_force > 0 or not cannon_force > 0:
        raise DomainError("both stimulus forces must be > 0")
    if trials < 1:
        raise DomainError("need at least one trial")
    rng = np.random.default_rng(perceiver.seed)
    hits = 0
    for _ in range(trials):
        us_ok = ultrasound_force >= _effective_threshold(perceiver, cannon_force, rng)
        ca_ok = cannon_force >= _effective_threshold(perceiver, ultrasound_force, rng)
        if us_ok or ca_ok:
            hits += 1
    return 100.0 * hits / trials


def _length_out(value_m: float, units: str) -> float:
    return value_m * 1000.0 if units == "paper" else value_m


def _force_out(value_n: float, units: str) -> float:
    return value_n * 1000.0 if units == "paper" else value_n


def write_double_point_csv(results: list[MethodOfLimitsResult], fileobj, units: str = "si") -> None:
    """Panel-shaped CSV: every trial row plus one threshold row per condition."""
    fileobj.write("condition,level_or_separation,rate_or_response\n")
    for res in results:
        name = res.condition.describe()
        for run in res.runs:
            for trial in run.trials:
                fileobj.write(f"{name},{_length_out(trial.stimulus, units)!r},{trial.response}\n")
        fileobj.write(f"{name},{_length_out(res.threshold, units)!r},threshold\n")


def write_perceptual_csv(
    results: list[tuple[ExperimentCondition, list[LevelRate]]], fileobj, units: str = "si"
) -> None:
    fileobj.write("condition,level_or_separation,rate_or_response\n")
    for condition, rates in results:
        name = condition.describe()
        for entry in rates:
            fileobj.write(f"{name},{_force_out(entry.level, units)!r},{entry.rate_percent!r}\n")


def write_simultaneous_csv(rates: dict[float, float], fileobj) -> None:
    """Replica of the simultaneous-presentation table, human baseline alongside."""
    fileobj.write("ultrasound_modulation_hz,simulated_rate_percent,reference_rate_percent\n")
    for hz in sorted(rates):
        ref = REFERENCE_SIMULTANEOUS_RATE_PERCENT.get(hz, float("nan"))
        fileobj.write(f"{hz:g},{rates[hz]!r},{ref!r}\n")
