"""``calibrate``: fit the RMSE-versus-elevation curve for the configured environment."""

import argparse
from typing import Any

import pandas as pd

from app.cli.common import load_context
from app.schemas.run_config import CalibrationSettings
from app.services.artifact_service import save_curve, save_frame, write_manifest
from app.services.pipeline_service import calibrate


def register(subparsers: Any, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "calibrate", parents=parents, help="Sweep low elevations and fit the RMSE curve"
    )
    parser.add_argument("--degree", type=int, help="Override the polynomial degree")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config, output_dir = load_context(args)
    if args.degree is not None:
        calibration = CalibrationSettings.model_validate(
            {**config.calibration.model_dump(), "degree": args.degree}
        )
        config = config.model_copy(update={"calibration": calibration})
    curve = calibrate(config)
    curve_path = save_curve(output_dir / "calibration_curve.json", curve)
    samples = pd.DataFrame(curve.samples, columns=["elevation_deg", "mean_rmse_deg"])
    samples["fitted_rmse_deg"] = curve(samples["elevation_deg"].to_numpy())
    samples_path = save_frame(output_dir / "calibration_samples.csv", samples)
    write_manifest(output_dir, "calibrate", config, [config.seed], [curve_path, samples_path])
    print(
        f"curve: {curve_path} (degree {curve.degree}, "
        f"max residual {curve.max_abs_residual:.3f} deg)"
    )
    return 0
