"""Geometry schemas: source location, array pose and motion schedules."""

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class SourceTruth(BaseModel):
    """Ground-truth source location relative to the robot center, in radians."""

    model_config = ConfigDict(frozen=True)

    distance: float = Field(..., gt=0)
    elevation: float = Field(..., ge=0, le=math.pi / 2)
    azimuth: float

    @field_validator("azimuth")
    @classmethod
    def validate_azimuth(cls, v: float) -> float:
        """Validate azimuth lies in (-pi, pi]."""
        if not -math.pi < v <= math.pi:
            raise ValueError("Azimuth must lie in (-pi, pi]")
        return v

    @classmethod
    def from_degrees(cls, distance: float, elevation_deg: float, azimuth_deg: float) -> "SourceTruth":
        """Build a source from degree-valued angles; 180 deg maps to +pi."""
        azimuth = math.radians(azimuth_deg)
        wrapped = math.atan2(math.sin(azimuth), math.cos(azimuth))
        if math.isclose(wrapped, -math.pi):
            wrapped = math.pi
        return cls(distance=distance, elevation=math.radians(elevation_deg), azimuth=wrapped)


class ArrayPose(BaseModel):
    """Heading and lateral offset of the two-microphone array.

    ``beta`` is the clockwise rotation of the array heading from the robot
    heading. ``offset`` is the translation of the array center along the
    microphone axis, away from the robot center.
    """

    model_config = ConfigDict(frozen=True)

    beta: float = 0.0
    offset: float = Field(0.0, ge=0)
    baseline: float = Field(..., gt=0)


class RotationSchedule(BaseModel):
    """Clockwise rotation at constant rate, sampled every ``itd_cadence`` radians."""

    model_config = ConfigDict(frozen=True)

    omega: float = Field(..., gt=0)
    revolutions: int = Field(..., ge=1)
    itd_cadence: float = Field(..., gt=0)

    @property
    def sample_period(self) -> float:
        """Seconds between successive ITD samples."""
        return self.itd_cadence / self.omega

    @property
    def samples_per_revolution(self) -> int:
        return int(round(2.0 * math.pi / self.itd_cadence))

    @property
    def sample_count(self) -> int:
        return self.revolutions * self.samples_per_revolution

    def betas(self, start: float = 0.0) -> np.ndarray:
        """Array headings at every sample, unwrapped and strictly increasing."""
        return start + self.itd_cadence * np.arange(self.sample_count, dtype=float)


class TranslationPlan(BaseModel):
    """Stepwise translation of the array along its microphone axis at fixed heading."""

    model_config = ConfigDict(frozen=True)

    step: float = Field(..., gt=0)
    steps: int = Field(..., ge=1)
    beta: float = 0.0
    sample_period: float = Field(..., gt=0)

    def offsets(self) -> np.ndarray:
        """Cumulative offsets after each step, strictly increasing from one step."""
        return self.step * np.arange(1, self.steps + 1, dtype=float)
