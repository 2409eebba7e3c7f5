"""Batch experiments: table grids, parallel cell execution and summaries.

A suite is a grid of (source row, signal kind, repetition) cells. Each cell
gets a seed derived from the base seed and its grid indices, so results do not
depend on worker count or completion order. Failures are recorded on the cell
and the suite carries on.
"""

import logging
import math
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

import numpy as np
import pandas as pd
import pydantic

from app.core.exceptions import AppException, ConfigurationError, ValidationError
from app.schemas.acoustics import SignalConfig, SourceKind
from app.schemas.detectors import RmseCalibrationCurve
from app.schemas.geometry import SourceTruth
from app.schemas.pipeline import ExperimentResult, ExperimentRow, ExperimentSpec
from app.schemas.run_config import RunConfig, SourceSettings
from app.services.estimation_service import Model2D, Model3D, orientation_ekf_config, run_filter
from app.services.geometry_service import canonical_orientation, wrap_angle
from app.services.pipeline_service import (
    SimulatedScene,
    circular_mean,
    derive_seed,
    localize_distance,
    localize_orientation,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# (distance_m, azimuth_deg) of the eight azimuth rows repeated at each elevation
_AZIMUTH_ROWS = [
    (5.0, 0.0),
    (5.0, 50.0),
    (7.0, 90.0),
    (7.0, 120.0),
    (3.0, 180.0),
    (3.0, -40.0),
    (10.0, -90.0),
    (10.0, -140.0),
]
_SINGULAR_ROWS = [
    ("3a", 5.0, 0.0, 50.0),
    ("3b", 7.0, 4.0, -120.0),
    ("4a", 5.0, 86.0, -40.0),
    ("4b", 7.0, 89.0, 150.0),
]
_TABLE_SIGNALS: dict[int, SourceKind] = {
    3: "speech_file",
    4: "white_noise",
    5: "speech_file",
    6: "white_noise",
}

RESULT_COLUMNS = [
    "row_id",
    "signal_kind",
    "repetition",
    "seed",
    "distance_true_m",
    "elevation_true_deg",
    "azimuth_true_deg",
    "branch",
    "azimuth_est_deg",
    "elevation_est_deg",
    "distance_est_m",
    "azimuth_abs_error_deg",
    "elevation_abs_error_deg",
    "distance_abs_error_m",
    "band_entry_shift_m",
    "rmse_deg",
    "amplitude_peak_m",
    "azimuth_spread_deg",
    "converged",
    "error",
]


def table_rows() -> list[ExperimentRow]:
    """The twenty source rows shared by all four tables."""
    rows = []
    for prefix, elevation in (("1", 20.0), ("2", 60.0)):
        for letter, (distance, azimuth) in zip("abcdefgh", _AZIMUTH_ROWS, strict=True):
            rows.append(
                ExperimentRow(
                    row_id=f"{prefix}{letter}",
                    source=SourceSettings(
                        distance_m=distance, elevation_deg=elevation, azimuth_deg=azimuth
                    ),
                )
            )
    for row_id, distance, elevation, azimuth in _SINGULAR_ROWS:
        rows.append(
            ExperimentRow(
                row_id=row_id,
                source=SourceSettings(
                    distance_m=distance, elevation_deg=elevation, azimuth_deg=azimuth
                ),
            )
        )
    return rows


def table_spec(table_id: int, config: RunConfig) -> ExperimentSpec:
    """
    Suite reproducing one results table.

    Tables 3 and 5 use the speech source, 4 and 6 white noise; 5 and 6 add
    the distance phase.

    Raises:
        ValidationError: If the table id is unknown
    """
    if table_id not in _TABLE_SIGNALS:
        raise ValidationError(f"Unknown table {table_id}; expected one of {sorted(_TABLE_SIGNALS)}")
    return ExperimentSpec(
        label=f"table{table_id}",
        config=config,
        rows=table_rows(),
        signal_kinds=[_TABLE_SIGNALS[table_id]],
        repetitions=config.experiment.repetitions,
        with_distance=table_id in (5, 6),
    )


def spec_from_config(config: RunConfig) -> ExperimentSpec:
    """Suite described by the ``experiment`` section of a config."""
    settings = config.experiment
    if settings.table is not None:
        return table_spec(settings.table, config)
    return ExperimentSpec(
        label="custom",
        config=config,
        rows=[
            ExperimentRow(row_id=f"s{i + 1}", source=source)
            for i, source in enumerate(settings.sources)
        ],
        signal_kinds=settings.signal_kinds,
        repetitions=settings.repetitions,
        with_distance=settings.with_distance,
    )


def config_for_signal(config: RunConfig, kind: SourceKind) -> RunConfig:
    """Config whose source signal is ``kind``; validated so a speech source needs its file."""
    if config.signal.source_kind == kind:
        return config
    try:
        signal = SignalConfig.model_validate(
            {**config.signal.model_dump(), "source_kind": kind}
        )
    except pydantic.ValidationError as e:
        raise ConfigurationError(f"Signal kind {kind} is not usable: {e}") from e
    return config.model_copy(update={"signal": signal})


def _abs_angle_error_deg(estimate_deg: float, truth_deg: float) -> float:
    return abs(math.degrees(wrap_angle(math.radians(estimate_deg - truth_deg))))


def run_cell(
    spec: ExperimentSpec,
    row_index: int,
    kind_index: int,
    repetition: int,
    curve: RmseCalibrationCurve | None = None,
) -> ExperimentResult:
    """
    Run one cell: orientation, then distance when the suite asks for it.

    Application errors are caught and stored on the result.
    """
    row = spec.rows[row_index]
    kind = spec.signal_kinds[kind_index]
    seed = derive_seed(spec.config.seed, row_index, kind_index, repetition)
    result = ExperimentResult(
        row_id=row.row_id,
        signal_kind=kind,
        repetition=repetition,
        seed=seed,
        source=row.source,
    )
    try:
        config = spec.config
        if config.mode == "audio":
            config = config_for_signal(config, kind)
        truth = row.source.to_truth()
        scene = SimulatedScene(config, truth, seed)
        verdict = localize_orientation(config, scene.rotation_series(), curve)
        # Tracks stay in the worker; only the summary crosses the process boundary
        result.verdict = verdict.model_copy(update={"traces": None})
        if verdict.azimuth_deg is not None and row.source.elevation_deg < 90.0:
            result.azimuth_abs_error_deg = _abs_angle_error_deg(
                verdict.azimuth_deg, math.degrees(truth.azimuth)
            )
        result.elevation_abs_error_deg = abs(verdict.elevation_deg - row.source.elevation_deg)
        if spec.with_distance:
            distance = localize_distance(config, verdict, scene)
            result.distance = distance.model_copy(update={"history": []})
            result.verdict = result.verdict.model_copy(update={"distance_m": distance.distance_m})
            result.distance_abs_error_m = abs(distance.distance_m - row.source.distance_m)
    except AppException as e:
        logger.warning(f"Cell {row.row_id}/{kind}/{repetition} failed: {e.detail}")
        result.error = f"{e.__class__.__name__}: {e.detail}"
    return result


def _run_cell_task(
    task: tuple[ExperimentSpec, int, int, int, RmseCalibrationCurve | None],
) -> ExperimentResult:
    return run_cell(*task)


def parallel_map(fn: Callable[[T], R], tasks: Iterable[T], workers: int) -> list[R]:
    """Map over tasks in a process pool, or inline for a single worker. Order is preserved."""
    items = list(tasks)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def run_experiment_suite(
    spec: ExperimentSpec,
    curve: RmseCalibrationCurve | None = None,
    workers: int = 1,
) -> list[ExperimentResult]:
    """
    Execute every cell of a suite.

    Args:
        spec: Rows, signal kinds, repetitions and base config
        curve: Calibration curve for the near-horizon branch
        workers: Process count; 1 runs inline

    Returns:
        Results sorted by row order, signal kind and repetition
    """
    tasks = [
        (spec, r, k, rep, curve)
        for r in range(len(spec.rows))
        for k in range(len(spec.signal_kinds))
        for rep in range(spec.repetitions)
    ]
    logger.info(f"Running suite {spec.label}: {len(tasks)} cells on {workers} worker(s)")
    results = parallel_map(_run_cell_task, tasks, workers)
    order = {row.row_id: i for i, row in enumerate(spec.rows)}
    kinds = {kind: i for i, kind in enumerate(spec.signal_kinds)}
    results.sort(key=lambda r: (order[r.row_id], kinds[r.signal_kind], r.repetition))
    failures = sum(r.error is not None for r in results)
    if failures:
        logger.warning(f"Suite {spec.label}: {failures}/{len(results)} cells failed")
    return results


def results_frame(results: list[ExperimentResult]) -> pd.DataFrame:
    """One row per cell with unit-suffixed columns."""
    records = []
    for r in results:
        verdict, diagnostics = r.verdict, r.verdict.diagnostics if r.verdict else None
        records.append(
            {
                "row_id": r.row_id,
                "signal_kind": r.signal_kind,
                "repetition": r.repetition,
                "seed": r.seed,
                "distance_true_m": r.source.distance_m,
                "elevation_true_deg": r.source.elevation_deg,
                "azimuth_true_deg": r.source.azimuth_deg,
                "branch": verdict.branch if verdict else None,
                "azimuth_est_deg": verdict.azimuth_deg if verdict else None,
                "elevation_est_deg": verdict.elevation_deg if verdict else None,
                "distance_est_m": r.distance.distance_m if r.distance else None,
                "azimuth_abs_error_deg": r.azimuth_abs_error_deg,
                "elevation_abs_error_deg": r.elevation_abs_error_deg,
                "distance_abs_error_m": r.distance_abs_error_m,
                "band_entry_shift_m": r.distance.band_entry_shift_m if r.distance else None,
                "rmse_deg": diagnostics.rmse_deg if diagnostics else None,
                "amplitude_peak_m": diagnostics.amplitude_peak_m if diagnostics else None,
                "azimuth_spread_deg": diagnostics.azimuth_spread_deg if diagnostics else None,
                "converged": diagnostics.converged if diagnostics else None,
                "error": r.error,
            }
        )
    frame = pd.DataFrame.from_records(records, columns=RESULT_COLUMNS)
    numeric = [c for c in RESULT_COLUMNS if c.endswith(("_m", "_deg"))]
    frame[numeric] = frame[numeric].apply(pd.to_numeric)
    return frame


def _circular_mean_deg(values: pd.Series) -> float:
    finite = values.dropna().to_numpy(dtype=float)
    if finite.size == 0:
        return math.nan
    return math.degrees(circular_mean(np.radians(finite)))


def summary_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Per-row averages recomputed from the per-cell frame.

    Azimuth estimates are averaged on the circle; errors are plain means of
    absolute errors over the cells that succeeded.
    """
    if frame.empty:
        return pd.DataFrame(
            columns=[
                "row_id",
                "signal_kind",
                "distance_true_m",
                "elevation_true_deg",
                "azimuth_true_deg",
                "azimuth_est_deg",
                "azimuth_avg_abs_error_deg",
                "elevation_est_deg",
                "elevation_avg_abs_error_deg",
                "distance_est_m",
                "distance_avg_abs_error_m",
                "cells",
                "failures",
            ]
        )
    grouped = frame.groupby(["row_id", "signal_kind"], sort=False)
    summary = grouped.agg(
        distance_true_m=("distance_true_m", "first"),
        elevation_true_deg=("elevation_true_deg", "first"),
        azimuth_true_deg=("azimuth_true_deg", "first"),
        azimuth_est_deg=("azimuth_est_deg", _circular_mean_deg),
        azimuth_avg_abs_error_deg=("azimuth_abs_error_deg", "mean"),
        elevation_est_deg=("elevation_est_deg", "mean"),
        elevation_avg_abs_error_deg=("elevation_abs_error_deg", "mean"),
        distance_est_m=("distance_est_m", "mean"),
        distance_avg_abs_error_m=("distance_abs_error_m", "mean"),
        cells=("seed", "size"),
        failures=("error", "count"),
    )
    return summary.reset_index()


def _azimuth_sweep_cell(task: tuple[RunConfig, float, float, int]) -> dict[str, float]:
    config, distance, azimuth_deg, repetition = task
    truth = SourceTruth.from_degrees(distance, 0.0, azimuth_deg)
    seed = derive_seed(config.seed, 200, int(distance * 1000), int(azimuth_deg * 10), repetition)
    record = {"distance_m": distance, "azimuth_deg": azimuth_deg, "repetition": repetition}
    try:
        series = SimulatedScene(config, truth, seed).rotation_series()
        model = Model2D(series.baseline, series.omega)
        state = run_filter(
            model, orientation_ekf_config(model, config.ekf.orientation, series), series
        )
        last = config.array.rotation_schedule().samples_per_revolution
        psi = np.array([r.state[0] for r in state.history[-last:]])
        estimate = math.degrees(circular_mean(psi + series.beta[-last:]))
        record["azimuth_est_deg"] = estimate
        record["azimuth_abs_error_deg"] = _abs_angle_error_deg(estimate, azimuth_deg)
    except AppException as e:
        logger.warning(f"Azimuth sweep cell D={distance} phi={azimuth_deg} failed: {e.detail}")
        record["azimuth_est_deg"] = math.nan
        record["azimuth_abs_error_deg"] = math.nan
    return record


def azimuth_sweep(config: RunConfig, repetitions: int = 1, workers: int = 1) -> pd.DataFrame:
    """2D-filter azimuth error over a ring of sources at elevation 0."""
    sweeps = config.sweeps
    tasks = [
        (config, distance, azimuth, rep)
        for distance in sweeps.azimuth_distances_m
        for azimuth in sweeps.azimuths_deg
        for rep in range(repetitions)
    ]
    return pd.DataFrame.from_records(parallel_map(_azimuth_sweep_cell, tasks, workers))


def _hemisphere_cell(task: tuple[RunConfig, float, float]) -> dict[str, float]:
    config, elevation_deg, azimuth_deg = task
    distance = config.sweeps.hemisphere_distance_m
    truth = SourceTruth.from_degrees(distance, elevation_deg, azimuth_deg)
    seed = derive_seed(config.seed, 300, int(elevation_deg * 10), int(azimuth_deg * 10))
    record = {"elevation_deg": elevation_deg, "azimuth_deg": azimuth_deg}
    try:
        series = SimulatedScene(config, truth, seed).rotation_series()
        model = Model3D(series.baseline, series.omega)
        state = run_filter(
            model, orientation_ekf_config(model, config.ekf.orientation, series), series
        )
        last = config.array.rotation_schedule().samples_per_revolution
        folded = [canonical_orientation(r.state[0], r.state[1]) for r in state.history[-last:]]
        elevations = np.array([theta for theta, _ in folded])
        azimuths = np.array([psi for _, psi in folded]) + series.beta[-last:]
        record["elevation_est_deg"] = math.degrees(float(np.mean(elevations)))
        record["azimuth_est_deg"] = math.degrees(circular_mean(azimuths))
        record["elevation_abs_error_deg"] = abs(record["elevation_est_deg"] - elevation_deg)
        record["azimuth_abs_error_deg"] = _abs_angle_error_deg(
            record["azimuth_est_deg"], azimuth_deg
        )
    except AppException as e:
        logger.warning(f"Hemisphere cell theta={elevation_deg} phi={azimuth_deg} failed: {e.detail}")
        for key in (
            "elevation_est_deg",
            "azimuth_est_deg",
            "elevation_abs_error_deg",
            "azimuth_abs_error_deg",
        ):
            record[key] = math.nan
    return record


def hemisphere_sweep(config: RunConfig, workers: int = 1) -> pd.DataFrame:
    """3D-filter elevation and azimuth errors over an elevation x azimuth grid."""
    sweeps = config.sweeps
    tasks = [
        (config, elevation, azimuth)
        for elevation in sweeps.hemisphere_elevations_deg
        for azimuth in sweeps.hemisphere_azimuths_deg
    ]
    return pd.DataFrame.from_records(parallel_map(_hemisphere_cell, tasks, workers))
