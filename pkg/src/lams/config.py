"""Tunable constants for the simulated workspace and session timing.

The grasp/drop tolerances and task thresholds are engineering defaults; the
source experiments decided success physically, so these are exposed here
rather than hard-coded at call sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import VelocityProfile


@dataclass(frozen=True)
class SessionClock:
    """Tick timing; the pause window must be a whole number of ticks."""

    tick_duration: float = 0.1     # seconds
    pause_threshold: float = 1.5   # seconds of stillness that request a switch

    def __post_init__(self):
        if self.tick_duration <= 0:
            raise ValueError("tick_duration must be positive")
        ratio = self.pause_threshold / self.tick_duration
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("pause_threshold must be a positive integer multiple of tick_duration")

    @property
    def pause_window_ticks(self) -> int:
        return round(self.pause_threshold / self.tick_duration)


# Resting center heights for released objects, by kind (meters above table).
REST_Z = {
    "bottle_cap": 0.015,
    "bottle": 0.10,
    "bowl": 0.04,
    "book": 0.03,
    "shelf": 0.15,
}


@dataclass(frozen=True)
class SimConfig:
    velocities: VelocityProfile = field(default_factory=VelocityProfile)
    clock: SessionClock = field(default_factory=SessionClock)
    workspace_min: tuple[float, float, float] = (0.0, 0.0, 0.0)
    workspace_max: tuple[float, float, float] = (0.8, 0.8, 0.8)
    grasp_position_tol: float = 0.03    # meters
    grasp_angle_tol: float = 20.0       # degrees, max over axes
    drop_displacement: float = 0.10     # meters from initial pose -> dropped
    close_threshold: float = 0.5        # aperture below this counts as closed


@dataclass(frozen=True)
class HarnessConfig:
    tick_budget: int = 20000
    # Pause-triggered switch attempts per needed direction before the scripted
    # user falls back to manual switching.
    patience: int = 1
    switch_threshold: float = 0.2


DEFAULT_SIM = SimConfig()
DEFAULT_HARNESS = HarnessConfig()
