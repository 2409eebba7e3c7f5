"""Run configuration document.

The YAML config is validated against ``RunConfig``. Unknown keys are rejected
at every level. Angles are in degrees here and converted to radians by the
builder methods, so services only ever see radians.
"""

import math
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.constants import (
    ArrayConstants,
    DetectorConstants,
    EkfConstants,
    ObservabilityConstants,
    PipelineConstants,
)
from app.schemas.acoustics import RoomConfig, SignalConfig, SourceKind
from app.schemas.detectors import RmseCalibrationCurve, Thresholds
from app.schemas.geometry import RotationSchedule, SourceTruth, TranslationPlan
from app.schemas.itd import GccConfig

ModelId = Literal["2d", "3d", "azimuth", "elevation", "distance"]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SourceSettings(StrictModel):
    """Source location in config units."""

    distance_m: float = Field(5.0, gt=0)
    elevation_deg: float = Field(20.0, ge=0, le=90)
    azimuth_deg: float = Field(50.0, ge=-360, le=360)

    def to_truth(self) -> SourceTruth:
        return SourceTruth.from_degrees(self.distance_m, self.elevation_deg, self.azimuth_deg)


class ArraySettings(StrictModel):
    """Array geometry and motion.

    ``preset: hardware`` selects the wider baseline of the physical platform
    unless ``baseline_m`` is given explicitly.
    """

    preset: Literal["simulation", "hardware"] = "simulation"
    baseline_m: float = Field(ArrayConstants.BASELINE_M, gt=0)
    omega_rad_s: float = Field(ArrayConstants.OMEGA_RAD_S, gt=0)
    revolutions: int = Field(ArrayConstants.REVOLUTIONS, ge=1)
    itd_cadence_deg: float = Field(ArrayConstants.ITD_CADENCE_DEG, gt=0, le=90)
    translation_step_m: float = Field(ArrayConstants.TRANSLATION_STEP_M, gt=0)
    translation_steps: int = Field(ArrayConstants.TRANSLATION_STEPS, ge=1)

    @model_validator(mode="before")
    @classmethod
    def apply_preset(cls, data: Any) -> Any:
        """Fill the baseline of the hardware preset when none is given."""
        if not isinstance(data, dict) or "baseline_m" in data:
            return data
        if data.get("preset") == "hardware":
            return {**data, "baseline_m": ArrayConstants.HARDWARE_BASELINE_M}
        return data

    def rotation_schedule(self) -> RotationSchedule:
        return RotationSchedule(
            omega=self.omega_rad_s,
            revolutions=self.revolutions,
            itd_cadence=math.radians(self.itd_cadence_deg),
        )

    def translation_plan(self, beta: float) -> TranslationPlan:
        # One translation step per ITD period of the rotation phase
        return TranslationPlan(
            step=self.translation_step_m,
            steps=self.translation_steps,
            beta=beta,
            sample_period=self.rotation_schedule().sample_period,
        )


class NoiseSettings(StrictModel):
    """Path-difference noise of ideal-ITD runs, in meters."""

    orientation_sigma_m: float = Field(PipelineConstants.ORIENTATION_NOISE_SIGMA_M, ge=0)
    distance_sigma_m: float = Field(PipelineConstants.DISTANCE_NOISE_SIGMA_M, ge=0)


class OrientationFilterSettings(StrictModel):
    """Orientation filter noise and start.

    With ``initial_guess: spectrum`` both filters start from the rotation-frequency
    fit of the series; ``fixed`` starts them at the configured angles.
    """

    process_sigma: float = Field(EkfConstants.ORIENTATION_PROCESS_SIGMA, ge=0)
    sensor_sigma: float = Field(EkfConstants.ORIENTATION_SENSOR_SIGMA, gt=0)
    initial_azimuth_deg: float = EkfConstants.INITIAL_AZIMUTH_DEG
    initial_elevation_deg: float = EkfConstants.INITIAL_ELEVATION_DEG
    initial_angle_std_deg: float = Field(EkfConstants.INITIAL_ANGLE_STD_DEG, gt=0)
    initial_guess: Literal["spectrum", "fixed"] = EkfConstants.INITIAL_GUESS
    substeps: int = Field(EkfConstants.SUBSTEPS, ge=1)


class DistanceFilterSettings(StrictModel):
    process_sigma: float = Field(EkfConstants.DISTANCE_PROCESS_SIGMA, ge=0)
    sensor_sigma: float = Field(EkfConstants.DISTANCE_SENSOR_SIGMA, gt=0)
    initial_distance_m: float = Field(EkfConstants.INITIAL_DISTANCE_M, gt=0)
    initial_distance_std_m: float = Field(EkfConstants.INITIAL_DISTANCE_STD_M, gt=0)
    substeps: int = Field(EkfConstants.SUBSTEPS, ge=1)


class FilterSettings(StrictModel):
    orientation: OrientationFilterSettings = OrientationFilterSettings()
    distance: DistanceFilterSettings = DistanceFilterSettings()


class ThresholdSettings(StrictModel):
    """Detector thresholds.

    ``d_threshold_m`` applies at ``d_threshold_baseline_m`` and scales with the
    baseline. With ``rmse_threshold_from_curve`` the RMSE threshold is the
    calibration curve's value at ``rmse_threshold_elevation_deg``; the literal
    ``rmse_threshold_deg`` is used when no curve is loaded.
    """

    d_threshold_m: float = Field(DetectorConstants.D_THRESHOLD_M, gt=0)
    d_threshold_baseline_m: float = Field(DetectorConstants.D_THRESHOLD_BASELINE_M, gt=0)
    rmse_threshold_deg: float = Field(DetectorConstants.RMSE_THRESHOLD_DEG, gt=0)
    rmse_threshold_elevation_deg: float = Field(
        DetectorConstants.RMSE_THRESHOLD_ELEVATION_DEG, gt=0, lt=90
    )
    rmse_threshold_from_curve: bool = True

    def resolve(self, baseline: float, curve: RmseCalibrationCurve | None) -> Thresholds:
        d_threshold = self.d_threshold_m * baseline / self.d_threshold_baseline_m
        rmse_threshold = self.rmse_threshold_deg
        if self.rmse_threshold_from_curve and curve is not None:
            value = float(curve(self.rmse_threshold_elevation_deg))
            if value > 0:
                rmse_threshold = value
        return Thresholds(d_threshold=d_threshold, rmse_threshold=rmse_threshold)


class CalibrationSettings(StrictModel):
    elevations_deg: list[float] = Field(
        default_factory=lambda: list(DetectorConstants.CALIBRATION_ELEVATIONS_DEG)
    )
    azimuths_deg: list[float] = Field(
        default_factory=lambda: list(DetectorConstants.CALIBRATION_AZIMUTHS_DEG)
    )
    degree: int = Field(DetectorConstants.CURVE_DEGREE, ge=1)
    curve_path: Path | None = None

    @field_validator("elevations_deg")
    @classmethod
    def validate_elevations(cls, v: list[float]) -> list[float]:
        """Validate calibration elevations lie in [0, 90]."""
        if any(not 0 <= e <= 90 for e in v):
            raise ValueError("Calibration elevations must lie in [0, 90] degrees")
        return v


class PipelineSettings(StrictModel):
    convergence_gate_deg: float = Field(PipelineConstants.CONVERGENCE_GATE_DEG, gt=0)
    rmse_revolutions: int = Field(PipelineConstants.RMSE_REVOLUTIONS, ge=1)
    regulate_facing: bool = True
    regulation_samples: int = Field(PipelineConstants.REGULATION_SAMPLES, ge=1)
    regulation_iterations: int = Field(PipelineConstants.REGULATION_ITERATIONS, ge=0)
    ninety_deg_bypass: bool = True


class ExperimentSettings(StrictModel):
    """Batch grid; ``table`` selects a built-in grid instead of ``sources``."""

    table: Literal[3, 4, 5, 6] | None = None
    sources: list[SourceSettings] = Field(default_factory=list)
    signal_kinds: list[SourceKind] = Field(default_factory=lambda: ["white_noise"])
    repetitions: int = Field(1, ge=1)
    with_distance: bool = False
    workers: int = Field(1, ge=1)


class SweepSettings(StrictModel):
    """Grids of the azimuth sweep (2D filter at elevation 0) and the hemisphere sweep."""

    azimuth_distances_m: list[float] = Field(default_factory=lambda: [1.0, 5.0, 10.0])
    azimuths_deg: list[float] = Field(default_factory=lambda: [float(a) for a in range(0, 360, 10)])
    hemisphere_distance_m: float = Field(5.0, gt=0)
    hemisphere_elevations_deg: list[float] = Field(
        default_factory=lambda: [float(e) for e in range(0, 91, 5)]
    )
    hemisphere_azimuths_deg: list[float] = Field(
        default_factory=lambda: [float(a) for a in range(-180, 180, 30)]
    )


class ObservabilitySettings(StrictModel):
    """Sweep grid; angles in degrees, distances and offsets in meters."""

    model: ModelId = "3d"
    rows: int | None = Field(None, ge=1)
    elevations_deg: list[float] = Field(default_factory=lambda: np.linspace(0, 90, 19).tolist())
    psis_deg: list[float] = Field(default_factory=lambda: np.linspace(-180, 180, 25).tolist())
    distances_m: list[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 3.0, 5.0, 10.0])
    offsets_m: list[float] = Field(default_factory=lambda: [0.0, 0.0007, 0.014, 0.07, 0.14])
    tolerance: float = Field(ObservabilityConstants.SINGULAR_TOLERANCE, gt=0)


class RunConfig(StrictModel):
    """Complete run configuration with reference defaults."""

    seed: int = Field(0, ge=0)
    mode: Literal["ideal_itd", "audio"] = "ideal_itd"
    output_dir: Path = Path("results")
    room: RoomConfig = RoomConfig()
    array: ArraySettings = ArraySettings()
    signal: SignalConfig = SignalConfig()
    gcc: GccConfig = GccConfig()
    noise: NoiseSettings = NoiseSettings()
    ekf: FilterSettings = FilterSettings()
    thresholds: ThresholdSettings = ThresholdSettings()
    calibration: CalibrationSettings = CalibrationSettings()
    pipeline: PipelineSettings = PipelineSettings()
    source: SourceSettings = SourceSettings()
    experiment: ExperimentSettings = ExperimentSettings()
    sweeps: SweepSettings = SweepSettings()
    observability: ObservabilitySettings = ObservabilitySettings()
