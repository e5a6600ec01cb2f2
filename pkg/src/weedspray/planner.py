"""Sprayer rig arithmetic: camera count, frame rates and GPU budget.

Lengths are millimetres and speeds millimetres per second. Adjacent frames
are assumed not to overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

LONG_EDGE_ALONG_BOOM = "long_edge_along_boom"
SHORT_EDGE_ALONG_BOOM = "short_edge_along_boom"
ORIENTATIONS = (LONG_EDGE_ALONG_BOOM, SHORT_EDGE_ALONG_BOOM)

MM_PER_M = 1000.0
# international mile / hour, exact
MPS_PER_MPH = 0.44704


@dataclass(frozen=True)
class SprayerGeometry:
    boom_length: float = 24_000.0
    footprint_long: float = 550.0
    footprint_short: float = 305.0
    speed: float = 15 * MPS_PER_MPH * MM_PER_M
    orientation: str = LONG_EDGE_ALONG_BOOM

    def __post_init__(self) -> None:
        for name in ("boom_length", "footprint_long", "footprint_short", "speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")

    @property
    def along_boom_edge(self) -> float:
        if self.orientation == LONG_EDGE_ALONG_BOOM:
            return self.footprint_long
        return self.footprint_short

    @property
    def along_travel_edge(self) -> float:
        if self.orientation == LONG_EDGE_ALONG_BOOM:
            return self.footprint_short
        return self.footprint_long


@dataclass(frozen=True)
class ThroughputPlan:
    camera_count: int
    fps_per_camera: int
    total_fps: int


def _ceil_div(a: float, b: float) -> int:
    # exact rational arithmetic on the float inputs, so ceil(a / b) * b >= a always holds
    return math.ceil(Fraction(a) / Fraction(b))


def _floor_div(a: float, b: float) -> int:
    return math.floor(Fraction(a) / Fraction(b))


def plan_throughput(g: SprayerGeometry) -> ThroughputPlan:
    cameras = _ceil_div(g.boom_length, g.along_boom_edge)
    fps = _ceil_div(g.speed, g.along_travel_edge)
    return ThroughputPlan(cameras, fps, cameras * fps)


def gpu_estimate(required_total_fps: float, measured_fps_per_gpu: float) -> int:
    """GPUs needed to sustain ``required_total_fps`` at the measured per-GPU rate."""
    if not measured_fps_per_gpu > 0:
        raise ValueError("measured fps per GPU must be positive")
    if required_total_fps < 0:
        raise ValueError("required fps must be non-negative")
    return _ceil_div(required_total_fps, measured_fps_per_gpu)


def max_feasible_speed(g: SprayerGeometry, available_total_fps: float) -> float:
    """Fastest speed whose plan fits in ``available_total_fps`` with the camera layout fixed.

    Per-camera frame rates are whole numbers, so the budget per camera is
    floored before converting back to a speed.
    """
    if not available_total_fps > 0:
        raise ValueError("available fps must be positive")
    cameras = plan_throughput(g).camera_count
    return _floor_div(available_total_fps, cameras) * g.along_travel_edge
