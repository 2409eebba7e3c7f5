"""Pytest fixtures for testing."""

import logging

import numpy as np
import pytest

from app.schemas.acoustics import RoomConfig
from app.schemas.detectors import RmseCalibrationCurve
from app.schemas.geometry import SourceTruth
from app.schemas.run_config import CalibrationSettings, RunConfig
from app.services.pipeline_service import calibrate


@pytest.fixture
def run_config() -> RunConfig:
    """Reference configuration in ideal-ITD mode."""
    return RunConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def anechoic_room() -> RoomConfig:
    """Room with the direct path only."""
    return RoomConfig(max_image_order=0)


@pytest.fixture
def source_20_50() -> SourceTruth:
    """Source at 5 m, elevation 20 deg, azimuth 50 deg."""
    return SourceTruth.from_degrees(5.0, 20.0, 50.0)


@pytest.fixture(scope="session")
def small_calibration_config() -> RunConfig:
    """Reference configuration with a reduced calibration sweep."""
    return RunConfig(
        calibration=CalibrationSettings(
            elevations_deg=[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            azimuths_deg=[0.0, 120.0, 240.0],
            degree=3,
        )
    )


@pytest.fixture(scope="session")
def calibration_curve(small_calibration_config: RunConfig) -> RmseCalibrationCurve:
    """Curve fitted once per session from the reduced sweep."""
    return calibrate(small_calibration_config)


@pytest.fixture(autouse=True)
def propagate_app_logs(monkeypatch: pytest.MonkeyPatch) -> None:
    """Let caplog see records of the app logger even after dictConfig ran."""
    monkeypatch.setattr(logging.getLogger("app"), "propagate", True)
