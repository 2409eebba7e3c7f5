"""``reproduce``: rerun a results table or one of the orientation sweeps."""

import argparse
import logging
from pathlib import Path
from typing import Any

from app.cli.common import load_context, resolve_curve
from app.services.artifact_service import save_curve, save_frame, write_manifest
from app.services.experiment_service import (
    azimuth_sweep,
    hemisphere_sweep,
    results_frame,
    run_experiment_suite,
    summary_frame,
    table_spec,
)
from app.services.pipeline_service import calibrate

logger = logging.getLogger(__name__)

TABLES = ("3", "4", "5", "6")
SWEEPS = ("azimuth-sweep", "hemisphere-sweep")


def register(subparsers: Any, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "reproduce", parents=parents, help="Rerun a results table (3-6) or a sweep"
    )
    parser.add_argument("target", choices=TABLES + SWEEPS, help="Table id or sweep name")
    parser.add_argument("--calibration", type=Path, help="Calibration curve JSON")
    parser.add_argument("--workers", type=int, help="Override the worker count")
    parser.add_argument("--repetitions", type=int, help="Override repetitions per cell")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config, output_dir = load_context(args)
    experiment = config.experiment
    if args.repetitions is not None:
        experiment = experiment.model_copy(update={"repetitions": args.repetitions})
    config = config.model_copy(update={"experiment": experiment})
    workers = args.workers or experiment.workers
    artifacts: list[Path] = []

    if args.target == "azimuth-sweep":
        frame = azimuth_sweep(config, experiment.repetitions, workers)
        artifacts.append(save_frame(output_dir / "azimuth_sweep.csv", frame))
        print(f"mean azimuth error: {frame['azimuth_abs_error_deg'].mean():.3f} deg")
    elif args.target == "hemisphere-sweep":
        frame = hemisphere_sweep(config, workers)
        artifacts.append(save_frame(output_dir / "hemisphere_sweep.csv", frame))
        print(f"cells: {len(frame)}")
    else:
        spec = table_spec(int(args.target), config)
        curve = resolve_curve(config, args.calibration)
        if curve is None:
            logger.info("No calibration curve given; calibrating before the suite")
            curve = calibrate(config)
            artifacts.append(save_curve(output_dir / "calibration_curve.json", curve))
        results = run_experiment_suite(spec, curve, workers)
        cells = results_frame(results)
        summary = summary_frame(cells)
        artifacts.append(save_frame(output_dir / f"{spec.label}_cells.csv", cells))
        artifacts.append(save_frame(output_dir / f"{spec.label}_summary.csv", summary))
        print(summary.to_string(index=False))

    write_manifest(output_dir, "reproduce", config, [config.seed], artifacts)
    return 0
