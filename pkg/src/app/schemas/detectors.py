"""Singularity detector schemas."""

from typing import Any

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class DftAmplitudeSpectrum(BaseModel):
    """One-sided amplitude estimates (2/N)|X| of an ITD series."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    frequencies: np.ndarray  # rad/s
    amplitudes: np.ndarray  # meters
    sample_count: int = Field(..., ge=1)

    @field_validator("frequencies", "amplitudes", mode="before")
    @classmethod
    def coerce_array(cls, v: Any) -> np.ndarray:
        return np.asarray(v, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def validate_amplitudes(self) -> "DftAmplitudeSpectrum":
        """Validate shapes and non-negativity."""
        if self.frequencies.shape != self.amplitudes.shape:
            raise ValueError("frequencies and amplitudes must have equal length")
        if np.any(self.amplitudes < 0):
            raise ValueError("Amplitude estimates must be non-negative")
        return self


class RmseCalibrationCurve(BaseModel):
    """Polynomial RMSE(elevation) fitted in one environment, both in degrees.

    Coefficients are in ascending powers of elevation. The curve is inverted
    numerically to map a measured RMSE back to an elevation.
    """

    coefficients: list[float]
    domain_deg: tuple[float, float]
    residuals: list[float] = Field(default_factory=list)
    samples: list[tuple[float, float]] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_domain(self) -> "RmseCalibrationCurve":
        """Validate the fit domain and coefficient count."""
        lo, hi = self.domain_deg
        if not lo < hi:
            raise ValueError("Curve domain must be a non-empty interval")
        if not self.coefficients:
            raise ValueError("Curve needs at least one coefficient")
        return self

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, elevation_deg: float | np.ndarray) -> Any:
        return P.polyval(elevation_deg, self.coefficients)

    @property
    def max_abs_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)


class ElevationLookup(BaseModel):
    """Curve inversion result; ``clamped`` marks queries outside the curve's range."""

    elevation_deg: float
    clamped: bool = False


class Thresholds(BaseModel):
    """Detector thresholds for one array and environment."""

    model_config = ConfigDict(frozen=True)

    d_threshold: float = Field(..., gt=0)  # meters
    rmse_threshold: float = Field(..., gt=0)  # degrees
