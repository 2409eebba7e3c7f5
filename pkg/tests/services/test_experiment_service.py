"""Tests for experiment grids, batch execution and summaries."""

import math

import pandas as pd
import pytest
from pytest_mock import MockerFixture

from app.core.exceptions import ConfigurationError, NumericalError, ValidationError
from app.schemas.detectors import RmseCalibrationCurve
from app.schemas.pipeline import ExperimentRow, ExperimentSpec
from app.schemas.run_config import ExperimentSettings, RunConfig, SourceSettings, SweepSettings
from app.services.experiment_service import (
    RESULT_COLUMNS,
    azimuth_sweep,
    config_for_signal,
    hemisphere_sweep,
    results_frame,
    run_experiment_suite,
    spec_from_config,
    summary_frame,
    table_rows,
    table_spec,
)


def _overhead_spec(config: RunConfig, repetitions: int = 2) -> ExperimentSpec:
    return ExperimentSpec(
        label="overhead",
        config=config,
        rows=[
            ExperimentRow(
                row_id="4b",
                source=SourceSettings(distance_m=7.0, elevation_deg=89.0, azimuth_deg=150.0),
            )
        ],
        repetitions=repetitions,
    )


@pytest.mark.unit
def test_table_rows() -> None:
    """Test the twenty rows, their ids and a sample of locations."""
    rows = table_rows()
    by_id = {row.row_id: row.source for row in rows}

    assert len(rows) == 20
    assert [row.row_id for row in rows[:3]] == ["1a", "1b", "1c"]
    assert by_id["1b"] == SourceSettings(distance_m=5.0, elevation_deg=20.0, azimuth_deg=50.0)
    assert by_id["2g"] == SourceSettings(distance_m=10.0, elevation_deg=60.0, azimuth_deg=-90.0)
    assert by_id["3b"] == SourceSettings(distance_m=7.0, elevation_deg=4.0, azimuth_deg=-120.0)
    assert by_id["4b"] == SourceSettings(distance_m=7.0, elevation_deg=89.0, azimuth_deg=150.0)


@pytest.mark.unit
@pytest.mark.parametrize(
    ("table_id", "kind", "with_distance"),
    [
        (3, "speech_file", False),
        (4, "white_noise", False),
        (5, "speech_file", True),
        (6, "white_noise", True),
    ],
)
def test_table_spec(table_id: int, kind: str, with_distance: bool, run_config: RunConfig) -> None:
    """Test each table's signal and distance phase."""
    spec = table_spec(table_id, run_config)

    assert spec.label == f"table{table_id}"
    assert spec.signal_kinds == [kind]
    assert spec.with_distance is with_distance


@pytest.mark.unit
def test_table_spec_unknown_id(run_config: RunConfig) -> None:
    """Test an unknown table is a validation error."""
    with pytest.raises(ValidationError):
        table_spec(7, run_config)


@pytest.mark.unit
def test_spec_from_config_custom_sources() -> None:
    """Test configured sources become rows s1, s2, ..."""
    config = RunConfig(
        experiment=ExperimentSettings(
            sources=[SourceSettings(), SourceSettings(elevation_deg=40.0)],
            repetitions=3,
            with_distance=True,
        )
    )

    spec = spec_from_config(config)

    assert [row.row_id for row in spec.rows] == ["s1", "s2"]
    assert spec.repetitions == 3
    assert spec.with_distance is True


@pytest.mark.unit
def test_spec_from_config_table() -> None:
    """Test a table id in the config selects the built-in grid."""
    spec = spec_from_config(RunConfig(experiment=ExperimentSettings(table=4)))

    assert spec.label == "table4"
    assert len(spec.rows) == 20


@pytest.mark.unit
def test_config_for_signal(run_config: RunConfig) -> None:
    """Test switching signals keeps a matching config and refuses speech without a file."""
    assert config_for_signal(run_config, "white_noise") is run_config
    assert config_for_signal(run_config, "tone").signal.source_kind == "tone"
    with pytest.raises(ConfigurationError):
        config_for_signal(run_config, "speech_file")


@pytest.mark.unit
def test_empty_suite(run_config: RunConfig) -> None:
    """Test a suite without rows yields empty results and frames with headers."""
    spec = ExperimentSpec(label="empty", config=run_config, rows=[])

    results = run_experiment_suite(spec)
    frame = results_frame(results)

    assert results == []
    assert list(frame.columns) == RESULT_COLUMNS
    assert summary_frame(frame).empty


@pytest.mark.unit
def test_failed_cell_is_recorded(mocker: MockerFixture, run_config: RunConfig) -> None:
    """Test a cell error is stored and the suite continues."""
    mocker.patch(
        "app.services.experiment_service.localize_orientation",
        side_effect=NumericalError("3d filter diverged"),
    )

    results = run_experiment_suite(_overhead_spec(run_config))

    assert len(results) == 2
    assert all(r.error == "NumericalError: 3d filter diverged" for r in results)
    summary = summary_frame(results_frame(results))
    assert summary.loc[0, "cells"] == 2
    assert summary.loc[0, "failures"] == 2


@pytest.mark.integration
def test_suite_results_do_not_depend_on_workers(run_config: RunConfig) -> None:
    """Test inline and pooled execution give identical cells."""
    spec = _overhead_spec(run_config)

    inline = results_frame(run_experiment_suite(spec, workers=1))
    pooled = results_frame(run_experiment_suite(spec, workers=2))

    pd.testing.assert_frame_equal(inline, pooled)
    assert inline["branch"].tolist() == ["ninety_deg", "ninety_deg"]
    assert inline["seed"].nunique() == 2
    assert inline["azimuth_abs_error_deg"].isna().all()


@pytest.mark.integration
def test_suite_with_distance(run_config: RunConfig) -> None:
    """Test the distance phase fills distance columns."""
    spec = ExperimentSpec(
        label="distance",
        config=run_config,
        rows=[ExperimentRow(row_id="s1", source=SourceSettings(elevation_deg=50.0))],
        with_distance=True,
    )

    frame = results_frame(run_experiment_suite(spec))

    assert frame.loc[0, "error"] is None
    assert frame.loc[0, "branch"] == "full_3d"
    assert frame.loc[0, "distance_abs_error_m"] < 0.1
    assert frame.loc[0, "azimuth_abs_error_deg"] < 1.5


@pytest.mark.unit
def test_summary_frame_averages_on_the_circle() -> None:
    """Test azimuth estimates average across the half turn and errors are plain means."""
    frame = pd.DataFrame(
        {
            "row_id": ["x", "x", "y"],
            "signal_kind": ["white_noise"] * 3,
            "seed": [1, 2, 3],
            "distance_true_m": [5.0, 5.0, 3.0],
            "elevation_true_deg": [20.0, 20.0, 60.0],
            "azimuth_true_deg": [180.0, 180.0, 0.0],
            "azimuth_est_deg": [179.0, -179.0, math.nan],
            "azimuth_abs_error_deg": [1.0, 1.0, math.nan],
            "elevation_est_deg": [19.0, 21.0, 60.0],
            "elevation_abs_error_deg": [1.0, 1.0, 0.0],
            "distance_est_m": [math.nan, math.nan, math.nan],
            "distance_abs_error_m": [math.nan, math.nan, math.nan],
            "error": [None, None, "NonConvergenceError: spread"],
        }
    )

    summary = summary_frame(frame).set_index("row_id")

    assert abs(summary.loc["x", "azimuth_est_deg"]) == pytest.approx(180.0)
    assert summary.loc["x", "elevation_est_deg"] == pytest.approx(20.0)
    assert summary.loc["x", "azimuth_avg_abs_error_deg"] == pytest.approx(1.0)
    assert summary.loc["x", "failures"] == 0
    assert summary.loc["y", "failures"] == 1
    assert math.isnan(summary.loc["y", "azimuth_est_deg"])


@pytest.mark.integration
def test_azimuth_sweep() -> None:
    """Test the planar sweep recovers azimuths at zero elevation."""
    config = RunConfig(sweeps=SweepSettings(azimuth_distances_m=[5.0], azimuths_deg=[0.0, 60.0]))

    frame = azimuth_sweep(config)

    assert list(frame.columns) == [
        "distance_m",
        "azimuth_deg",
        "repetition",
        "azimuth_est_deg",
        "azimuth_abs_error_deg",
    ]
    assert len(frame) == 2
    assert (frame["azimuth_abs_error_deg"] < 1.8).all()


@pytest.mark.integration
def test_hemisphere_sweep() -> None:
    """Test the 3D sweep recovers an elevated source."""
    config = RunConfig(
        sweeps=SweepSettings(hemisphere_elevations_deg=[30.0], hemisphere_azimuths_deg=[60.0])
    )

    frame = hemisphere_sweep(config)

    assert len(frame) == 1
    assert frame.loc[0, "elevation_abs_error_deg"] < 2.0
    assert frame.loc[0, "azimuth_abs_error_deg"] < 1.5


@pytest.mark.integration
@pytest.mark.slow
def test_planar_ring_accuracy() -> None:
    """Test every point of the planar ring at 5 and 10 m stays under 1.8 deg of azimuth error."""
    config = RunConfig(
        sweeps=SweepSettings(
            azimuth_distances_m=[5.0, 10.0],
            azimuths_deg=[float(a) for a in range(0, 360, 10)],
        )
    )

    frame = azimuth_sweep(config)

    assert len(frame) == 72
    assert frame["azimuth_abs_error_deg"].notna().all()
    assert (frame["azimuth_abs_error_deg"] < 1.8).all()
    assert frame["azimuth_abs_error_deg"].mean() < 1.5


@pytest.mark.integration
@pytest.mark.slow
def test_elevated_table_rows(
    small_calibration_config: RunConfig, calibration_curve: RmseCalibrationCurve
) -> None:
    """Test the elevated rows at 20 and 60 deg average under 4 deg over five seeds."""
    spec = ExperimentSpec(
        label="elevated",
        config=small_calibration_config,
        rows=[row for row in table_rows() if row.row_id[0] in "12"],
        signal_kinds=["white_noise"],
        repetitions=5,
    )

    frame = results_frame(run_experiment_suite(spec, calibration_curve))
    summary = summary_frame(frame)

    assert frame["error"].isna().all()
    assert (frame["branch"] == "full_3d").all()
    assert len(summary) == 16
    assert (summary["azimuth_avg_abs_error_deg"] < 4.0).all()
    assert (summary["elevation_avg_abs_error_deg"] < 4.0).all()


@pytest.mark.integration
@pytest.mark.slow
def test_hemisphere_errors_sit_on_singular_surfaces() -> None:
    """Test large 3D errors stay near the horizon and the zenith and the interior is accurate."""
    config = RunConfig(
        sweeps=SweepSettings(
            hemisphere_elevations_deg=[float(e) for e in range(0, 91, 5)],
            hemisphere_azimuths_deg=[float(a) for a in range(-180, 180, 60)],
        )
    )

    frame = hemisphere_sweep(config)

    assert frame["elevation_abs_error_deg"].notna().all()
    middle = frame[frame["elevation_deg"].between(10.0, 80.0)]
    assert (middle["elevation_abs_error_deg"] <= 5.0).all()
    assert (middle["azimuth_abs_error_deg"] <= 5.0).all()
    interior = frame[(frame["elevation_deg"] > 15.0) & (frame["elevation_deg"] < 80.0)]
    assert interior["elevation_abs_error_deg"].mean() < 2.0
    assert interior["azimuth_abs_error_deg"].mean() < 2.0


@pytest.mark.integration
@pytest.mark.slow
def test_distance_table_rows(
    small_calibration_config: RunConfig, calibration_curve: RmseCalibrationCurve
) -> None:
    """Test distances stay within 0.6 m everywhere and 0.1 m up to 5 m, entering the band early."""
    spec = ExperimentSpec(
        label="distance-rows",
        config=small_calibration_config,
        rows=[row for row in table_rows() if row.row_id[0] in "12"],
        signal_kinds=["white_noise"],
        repetitions=2,
        with_distance=True,
    )

    frame = results_frame(run_experiment_suite(spec, calibration_curve))
    summary = summary_frame(frame)

    assert frame["error"].isna().all()
    assert (summary["distance_avg_abs_error_m"] <= 0.6).all()
    near = summary["distance_true_m"] <= 5.0
    assert (summary.loc[near, "distance_avg_abs_error_m"] <= 0.1).all()
    near_cells = frame[frame["distance_true_m"] <= 5.0]
    assert near_cells["band_entry_shift_m"].notna().all()
    assert (near_cells["band_entry_shift_m"] <= 0.14).all()
