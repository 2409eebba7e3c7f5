"""Tests for config and domain schema validation."""

import math

import numpy as np
import pydantic
import pytest

from app.schemas.acoustics import ItdSeries, RoomConfig, SignalConfig
from app.schemas.estimation import EkfConfig
from app.schemas.geometry import SourceTruth
from app.schemas.pipeline import LocalizationVerdict, OrientationDiagnostics
from app.schemas.run_config import RunConfig


@pytest.mark.unit
def test_run_config_defaults() -> None:
    """Test the defaults are the reference setup."""
    config = RunConfig()

    assert config.array.baseline_m == 0.18
    assert config.array.omega_rad_s == pytest.approx(2 * math.pi / 5)
    assert config.array.translation_step_m == 0.0007
    assert config.array.translation_steps == 200
    assert config.room.dimensions_m == (20.0, 20.0, 20.0)
    assert config.room.sound_speed_m_s == 345.0
    assert config.thresholds.d_threshold_m == 0.017
    assert config.thresholds.rmse_threshold_deg == 1.9


@pytest.mark.unit
def test_rotation_schedule_sampling() -> None:
    """Test three revolutions at one sample per degree give 1080 samples every 5/360 s."""
    schedule = RunConfig().array.rotation_schedule()

    assert schedule.sample_count == 1080
    assert schedule.sample_period == pytest.approx(5.0 / 360.0)
    betas = schedule.betas()
    assert betas[1] - betas[0] == pytest.approx(math.radians(1.0))
    assert np.all(np.diff(betas) > 0)


@pytest.mark.unit
def test_run_config_rejects_unknown_keys() -> None:
    """Test unknown keys are rejected at every level."""
    with pytest.raises(pydantic.ValidationError):
        RunConfig.model_validate({"sead": 1})
    with pytest.raises(pydantic.ValidationError):
        RunConfig.model_validate({"array": {"baseline": 0.3}})


@pytest.mark.unit
def test_hardware_preset_widens_baseline() -> None:
    """Test the hardware preset selects the 0.3 m baseline and scales the amplitude threshold."""
    config = RunConfig.model_validate({"array": {"preset": "hardware"}})

    assert config.array.baseline_m == 0.3
    thresholds = config.thresholds.resolve(config.array.baseline_m, None)
    assert thresholds.d_threshold == pytest.approx(0.017 * 0.3 / 0.18)


@pytest.mark.unit
def test_explicit_baseline_overrides_preset() -> None:
    """Test an explicit baseline wins over the preset."""
    config = RunConfig.model_validate({"array": {"preset": "hardware", "baseline_m": 0.25}})

    assert config.array.baseline_m == 0.25
    assert RunConfig().array.preset == "simulation"


@pytest.mark.unit
def test_room_rejects_bad_dimensions() -> None:
    """Test non-positive room dimensions are rejected."""
    with pytest.raises(pydantic.ValidationError):
        RoomConfig(dimensions_m=(20.0, 0.0, 20.0))


@pytest.mark.unit
def test_speech_source_requires_file() -> None:
    """Test a speech source without a file is rejected."""
    with pytest.raises(pydantic.ValidationError):
        SignalConfig(source_kind="speech_file")


@pytest.mark.unit
@pytest.mark.parametrize("azimuth_deg", [180.0, -180.0, 540.0])
def test_source_from_degrees_maps_half_turn_to_pi(azimuth_deg: float) -> None:
    """Test azimuth 180 deg in any representation maps to +pi."""
    source = SourceTruth.from_degrees(5.0, 20.0, azimuth_deg)

    assert source.azimuth == pytest.approx(math.pi)


@pytest.mark.unit
def test_source_rejects_negative_elevation() -> None:
    """Test elevations below the horizon are rejected."""
    with pytest.raises(pydantic.ValidationError):
        SourceTruth(distance=5.0, elevation=-0.1, azimuth=0.0)


@pytest.mark.unit
def test_itd_series_rejects_non_monotone_beta() -> None:
    """Test a rotation series needs strictly increasing headings."""
    with pytest.raises(pydantic.ValidationError):
        ItdSeries(
            kind="rotation",
            beta=[0.0, 0.2, 0.1],
            offset=[0.0, 0.0, 0.0],
            d_measured=[0.0, 0.0, 0.0],
            baseline=0.18,
            sample_period=0.01,
            omega=1.0,
        )


@pytest.mark.unit
def test_itd_series_rejects_length_mismatch() -> None:
    """Test pose and measurement arrays must have equal length."""
    with pytest.raises(pydantic.ValidationError):
        ItdSeries(
            kind="translation",
            beta=[0.0, 0.0],
            offset=[0.1, 0.2],
            d_measured=[0.0],
            baseline=0.18,
            sample_period=0.01,
        )


@pytest.mark.unit
def test_ekf_config_rejects_indefinite_covariance() -> None:
    """Test an initial covariance with a negative eigenvalue is rejected."""
    with pytest.raises(pydantic.ValidationError):
        EkfConfig(
            process_noise=[1e-4, 1e-4],
            sensor_noise=1e-4,
            substeps=10,
            sample_period=0.01,
            initial_state=[0.0, 0.0],
            initial_covariance=[[1.0, 2.0], [2.0, 1.0]],
        )


@pytest.mark.unit
def test_verdict_branch_exclusivity() -> None:
    """Test the overhead branch leaves azimuth undefined and the others define it."""
    diagnostics = OrientationDiagnostics(amplitude_peak_m=0.001, d_threshold_m=0.017)

    with pytest.raises(pydantic.ValidationError):
        LocalizationVerdict(
            branch="ninety_deg", azimuth_deg=10.0, elevation_deg=90.0, diagnostics=diagnostics
        )
    with pytest.raises(pydantic.ValidationError):
        LocalizationVerdict(
            branch="full_3d", azimuth_deg=None, elevation_deg=20.0, diagnostics=diagnostics
        )


@pytest.mark.unit
def test_verdict_azimuth_bound_has_floor() -> None:
    """Test the facing bound is three spreads, never below one degree."""
    tight = OrientationDiagnostics(
        amplitude_peak_m=0.1, d_threshold_m=0.017, azimuth_spread_deg=0.1
    )
    loose = OrientationDiagnostics(
        amplitude_peak_m=0.1, d_threshold_m=0.017, azimuth_spread_deg=1.5
    )

    assert LocalizationVerdict(
        branch="full_3d", azimuth_deg=0.0, elevation_deg=20.0, diagnostics=tight
    ).azimuth_bound_deg == pytest.approx(1.0)
    assert LocalizationVerdict(
        branch="full_3d", azimuth_deg=0.0, elevation_deg=20.0, diagnostics=loose
    ).azimuth_bound_deg == pytest.approx(4.5)
