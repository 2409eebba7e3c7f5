"""Schemas package."""

from app.schemas.acoustics import (
    ImageSource,
    ItdSeries,
    RoomConfig,
    SignalConfig,
    StereoRecording,
)
from app.schemas.detectors import (
    DftAmplitudeSpectrum,
    ElevationLookup,
    RmseCalibrationCurve,
    Thresholds,
)
from app.schemas.estimation import EkfConfig, EkfRecord, EkfState
from app.schemas.geometry import ArrayPose, RotationSchedule, SourceTruth, TranslationPlan
from app.schemas.itd import GccConfig
from app.schemas.observability import ObservabilityCell, ObservabilityReport
from app.schemas.pipeline import (
    DistanceEstimate,
    ExperimentResult,
    ExperimentRow,
    ExperimentSpec,
    FacingResult,
    LocalizationVerdict,
    OrientationDiagnostics,
    OrientationTraces,
)
from app.schemas.run_config import RunConfig, SourceSettings

__all__ = [
    # Geometry
    "ArrayPose",
    "RotationSchedule",
    "SourceTruth",
    "TranslationPlan",
    # Acoustics
    "ImageSource",
    "ItdSeries",
    "RoomConfig",
    "SignalConfig",
    "StereoRecording",
    # ITD
    "GccConfig",
    # Estimation
    "EkfConfig",
    "EkfRecord",
    "EkfState",
    # Observability
    "ObservabilityCell",
    "ObservabilityReport",
    # Detectors
    "DftAmplitudeSpectrum",
    "ElevationLookup",
    "RmseCalibrationCurve",
    "Thresholds",
    # Pipeline
    "DistanceEstimate",
    "ExperimentResult",
    "ExperimentRow",
    "ExperimentSpec",
    "FacingResult",
    "LocalizationVerdict",
    "OrientationDiagnostics",
    "OrientationTraces",
    # Config
    "RunConfig",
    "SourceSettings",
]
