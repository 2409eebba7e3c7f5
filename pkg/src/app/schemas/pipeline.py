"""Localization verdict, distance estimate and experiment suite schemas."""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.acoustics import SourceKind
from app.schemas.estimation import EkfRecord
from app.schemas.run_config import RunConfig, SourceSettings

Branch = Literal["ninety_deg", "curve_fit", "full_3d"]


class OrientationTraces(BaseModel):
    """Per-sample estimate tracks of both orientation filters, in degrees."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    beta_deg: np.ndarray
    azimuth_2d_deg: np.ndarray | None = None
    azimuth_3d_deg: np.ndarray | None = None
    elevation_3d_deg: np.ndarray | None = None
    history_2d: list[EkfRecord] = Field(default_factory=list)
    history_3d: list[EkfRecord] = Field(default_factory=list)


class OrientationDiagnostics(BaseModel):
    amplitude_peak_m: float
    d_threshold_m: float
    rmse_deg: float | None = None
    rmse_threshold_deg: float | None = None
    curve_clamped: bool = False
    azimuth_spread_deg: float | None = None  # last-revolution circular std
    elevation_spread_deg: float | None = None
    converged: bool = True
    absent_frames: int = 0


class LocalizationVerdict(BaseModel):
    """Outcome of one orientation localization; azimuth None means undefined."""

    branch: Branch
    azimuth_deg: float | None
    elevation_deg: float
    distance_m: float | None = None  # None means the distance phase was not run
    diagnostics: OrientationDiagnostics
    traces: OrientationTraces | None = Field(None, exclude=True)

    @model_validator(mode="after")
    def validate_branch(self) -> "LocalizationVerdict":
        """Validate the ninety-degree branch leaves azimuth undefined."""
        if self.branch == "ninety_deg" and self.azimuth_deg is not None:
            raise ValueError("Azimuth is undefined on the ninety-degree branch")
        if self.branch != "ninety_deg" and self.azimuth_deg is None:
            raise ValueError("Azimuth must be defined outside the ninety-degree branch")
        return self

    @property
    def azimuth_bound_deg(self) -> float:
        """Orientation error bound the facing step is checked against."""
        spread = self.diagnostics.azimuth_spread_deg or 0.0
        return max(3.0 * spread, 1.0)


class FacingResult(BaseModel):
    """Array heading chosen for the translation phase."""

    beta: float  # radians
    residual_psi_deg: float | None = None  # measured after regulation
    bypass: bool = False


class DistanceEstimate(BaseModel):
    distance_m: float
    std_m: float
    band_entry_step: int | None  # first step after which truth stays inside 3 sigma
    band_entry_shift_m: float | None
    facing: FacingResult
    history: list[EkfRecord] = Field(default_factory=list, exclude=True)


class ExperimentRow(BaseModel):
    """One table row of the suite: an id and a source location."""

    row_id: str
    source: SourceSettings


class ExperimentSpec(BaseModel):
    """Validated suite description: a base config plus the cell grid."""

    label: str
    config: RunConfig
    rows: list[ExperimentRow]
    signal_kinds: list[SourceKind] = Field(default_factory=lambda: ["white_noise"])
    repetitions: int = Field(1, ge=1)
    with_distance: bool = False


class ExperimentResult(BaseModel):
    """Outcome of one (row, signal kind, repetition) cell."""

    row_id: str
    signal_kind: SourceKind
    repetition: int
    seed: int
    source: SourceSettings
    verdict: LocalizationVerdict | None = None
    distance: DistanceEstimate | None = None
    error: str | None = None
    azimuth_abs_error_deg: float | None = None
    elevation_abs_error_deg: float | None = None
    distance_abs_error_m: float | None = None
