"""Matplotlib figure rendering for the CLI report paths.

Every figure is written next to its delimited output file. Rendering uses
the Agg backend so the CLI works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .acoustic import PressureField
from .calibration import CalibrationCurve, CalibrationPoint
from .geometry import Point3
from .psychophysics import (
    ExperimentCondition,
    LevelRate,
    MethodOfLimitsResult,
    REFERENCE_DOUBLE_POINT_MM,
    REFERENCE_SIMULTANEOUS_RATE_PERCENT,
)
from .scheduler import PhaseFrameEvent, StimulusSchedule

_AX_NAMES = "xyz"


def save_field_heatmap(field: PressureField, path: str | Path, focus: Point3 | None = None) -> None:
    """Heat map of |field| over the grid's 2D slice."""
    img, kept = field.slice2d()
    a, b = kept
    xa = field.grid.axis_coords(a) * 1e3
    xb = field.grid.axis_coords(b) * 1e3
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    mesh = ax.pcolormesh(xb, xa, img, shading="nearest", cmap="inferno")
    fig.colorbar(mesh, ax=ax, label="|p| (arb. units)")
    if focus is not None:
        fx = (focus.x, focus.y, focus.z)
        ax.plot(fx[b] * 1e3, fx[a] * 1e3, "c+", markersize=12, markeredgewidth=2, label="focus")
        ax.legend(loc="upper right")
    ax.set_xlabel(f"{_AX_NAMES[b]} (mm)")
    ax.set_ylabel(f"{_AX_NAMES[a]} (mm)")
    ax.set_title("Simulated pressure magnitude")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_double_point_figure(results: list[MethodOfLimitsResult], path: str | Path) -> None:
    """Simulated two-point thresholds with the human baselines overlaid."""
    labels = [r.condition.label for r in results]
    simulated = [r.threshold * 1e3 for r in results]
    reference = [REFERENCE_DOUBLE_POINT_MM.get(lbl, np.nan) for lbl in labels]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.bar(x, simulated, width=0.55, color="#3d7bb5", label="simulated perceiver")
    ax.plot(x, reference, "o", color="#c23b22", label="human baseline (reference only)")
    ax.set_xticks(x, [f"({lbl})" for lbl in labels])
    ax.set_ylabel("two-point threshold (mm)")
    ax.set_xlabel("condition")
    ax.set_title("Two-point thresholds")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_perceptual_figure(
    results: list[tuple[ExperimentCondition, list[LevelRate]]], path: str | Path
) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    for condition, rates in results:
        forces = [r.level * 1e3 for r in rates]
        percents = [r.rate_percent for r in rates]
        ax.plot(forces, percents, marker="o", label=condition.label)
    ax.set_xlabel("output force (mN)")
    ax.set_ylabel("perception rate (%)")
    ax.set_ylim(-5, 105)
    ax.set_title("Perceptual thresholds")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_simultaneous_figure(rates: dict[float, float], path: str | Path) -> None:
    hz = sorted(rates)
    sim = [rates[h] for h in hz]
    ref = [REFERENCE_SIMULTANEOUS_RATE_PERCENT.get(h, np.nan) for h in hz]
    x = np.arange(len(hz))
    fig, ax = plt.subplots(figsize=(4.5, 4.0))
    ax.bar(x - 0.18, sim, width=0.36, color="#3d7bb5", label="simulated")
    ax.bar(x + 0.18, ref, width=0.36, color="#c23b22", label="human baseline")
    ax.set_xticks(x, [f"{h:g} Hz" for h in hz])
    ax.set_ylabel("perception rate (%)")
    ax.set_ylim(0, 105)
    ax.set_title("Simultaneous presentation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_calibration_figure(
    points: list[CalibrationPoint], curve: CalibrationCurve, path: str | Path
) -> None:
    settings = np.array([p.setting for p in points])
    forces = np.array([p.force for p in points]) * 1e3
    grid = np.linspace(curve.setting_range[0], curve.setting_range[1], 200)
    fitted = np.array([curve.predict(s) for s in grid]) * 1e3
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(settings, forces, "ko", label="points")
    ax.plot(grid, fitted, "-", color="#3d7bb5", label=curve.kind)
    ax.set_xlabel("setting (V or device units)")
    ax.set_ylabel("force (mN)")
    ax.set_title(f"Calibration fit, RMS residual {curve.residual * 1e3:.3g} mN")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_schedule_timeline(schedule: StimulusSchedule, path: str | Path) -> None:
    """Emission and predicted-arrival timeline of a schedule."""
    fig, ax = plt.subplots(figsize=(7.0, 3.2))
    for event in schedule.events:
        if isinstance(event, PhaseFrameEvent):
            ax.broken_barh(
                [(event.emit_time * 1e3, event.on_duration * 1e3)], (0.6, 0.8), color="#3d7bb5"
            )
            ax.plot(event.predicted_arrival * 1e3, 1.0, "v", color="#3d7bb5", markersize=5)
        else:
            ax.plot(event.emit_time * 1e3, 2.0, "^", color="#c23b22", markersize=9)
            ax.plot(event.predicted_arrival * 1e3, 2.0, "v", color="#c23b22", markersize=9)
    ax.set_yticks([1.0, 2.0], ["ultrasound", "cannon"])
    ax.set_ylim(0.2, 2.8)
    ax.set_xlabel("time (ms)")
    ax.set_title("Stimulus schedule (bars: emission, triangles: predicted arrival)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
