"""Acoustics schemas: room, source signal, synthesized audio and ITD series."""

from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.constants import RoomConstants, SignalConstants

SourceKind = Literal["white_noise", "speech_file", "tone"]
FractionalDelay = Literal["sinc", "linear"]
SeriesKind = Literal["rotation", "translation"]


class RoomConfig(BaseModel):
    """Rectangular shoebox room with one corner at the origin."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dimensions_m: tuple[float, float, float] = RoomConstants.DIMENSIONS_M
    wall_reflection: float = Field(RoomConstants.WALL_REFLECTION, ge=0, lt=1)
    floor_reflection: float = Field(RoomConstants.FLOOR_REFLECTION, ge=0, lt=1)
    ceiling_reflection: float = Field(RoomConstants.CEILING_REFLECTION, ge=0, lt=1)
    sound_speed_m_s: float = Field(RoomConstants.SOUND_SPEED_M_S, gt=0)
    max_image_order: int = Field(RoomConstants.MAX_IMAGE_ORDER, ge=0)
    # Robot center; defaults to the middle of the room
    array_center_m: tuple[float, float, float] | None = None

    @field_validator("dimensions_m")
    @classmethod
    def validate_dimensions(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        """Validate all room dimensions are positive."""
        if any(d <= 0 for d in v):
            raise ValueError("Room dimensions must be positive")
        return v

    @model_validator(mode="after")
    def validate_center(self) -> "RoomConfig":
        """Validate the robot center lies strictly inside the room."""
        if self.array_center_m is not None:
            for c, d in zip(self.array_center_m, self.dimensions_m, strict=True):
                if not 0 < c < d:
                    raise ValueError("Array center must lie strictly inside the room")
        return self

    @property
    def center(self) -> np.ndarray:
        if self.array_center_m is not None:
            return np.asarray(self.array_center_m, dtype=float)
        return np.asarray(self.dimensions_m, dtype=float) / 2.0


class SignalConfig(BaseModel):
    """Source waveform and additive sensor noise."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sample_rate_hz: int = Field(SignalConstants.SAMPLE_RATE_HZ, gt=0)
    source_kind: SourceKind = "white_noise"
    speech_file: Path | None = None
    tone_frequency_hz: float = Field(SignalConstants.TONE_FREQUENCY_HZ, gt=0)
    noise_sigma: float = Field(0.0, ge=0)  # per-sample sensor noise std
    snr_db: float | None = None  # overrides noise_sigma when set
    fractional_delay: FractionalDelay = "sinc"

    @model_validator(mode="after")
    def validate_speech_file(self) -> "SignalConfig":
        """Validate a speech source names its file."""
        if self.source_kind == "speech_file" and self.speech_file is None:
            raise ValueError("source_kind 'speech_file' requires speech_file")
        return self


class ImageSource(BaseModel):
    """One mirror image of the source as seen from a receiver."""

    model_config = ConfigDict(frozen=True)

    position: tuple[float, float, float]
    order: int = Field(..., ge=0)
    reflection_gain: float
    distance: float = Field(..., gt=0)

    @property
    def gain(self) -> float:
        """Reflection product over spherical spreading."""
        return self.reflection_gain / self.distance


class StereoRecording(BaseModel):
    """Two synthesized microphone channels segmented into ITD analysis frames."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    channels: np.ndarray  # shape (2, samples)
    sample_rate_hz: int = Field(..., gt=0)
    frame_length: int = Field(..., ge=1)

    @property
    def frame_count(self) -> int:
        return int(self.channels.shape[1] // self.frame_length)

    def frame(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        start = index * self.frame_length
        stop = start + self.frame_length
        return self.channels[0, start:stop], self.channels[1, start:stop]


class ItdSeries(BaseModel):
    """Measured path differences with the array pose at every sample.

    Missing measurements (frames without signal) are stored as NaN.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: SeriesKind
    beta: np.ndarray
    offset: np.ndarray
    d_measured: np.ndarray
    baseline: float = Field(..., gt=0)
    sample_period: float = Field(..., gt=0)
    omega: float = Field(0.0, ge=0)

    @field_validator("beta", "offset", "d_measured", mode="before")
    @classmethod
    def coerce_array(cls, v: Any) -> np.ndarray:
        """Coerce sequences to 1-D float arrays."""
        return np.asarray(v, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def validate_series(self) -> "ItdSeries":
        """Validate lengths and the monotone pose coordinate."""
        n = self.d_measured.size
        if self.beta.size != n or self.offset.size != n:
            raise ValueError("beta, offset and d_measured must have equal length")
        if n == 0:
            raise ValueError("Series must contain at least one sample")
        axis = self.beta if self.kind == "rotation" else self.offset
        if n > 1 and not np.all(np.diff(axis) > 0):
            coordinate = "beta" if self.kind == "rotation" else "offset"
            raise ValueError(f"{coordinate} must be strictly increasing in a {self.kind} series")
        if self.kind == "rotation" and self.omega <= 0:
            raise ValueError("Rotation series requires omega > 0")
        return self

    def __len__(self) -> int:
        return int(self.d_measured.size)

    @property
    def times(self) -> np.ndarray:
        return self.sample_period * np.arange(len(self), dtype=float)

    @property
    def absent(self) -> np.ndarray:
        return np.isnan(self.d_measured)
