"""Helpers shared by the subcommands."""

import argparse
import logging
from pathlib import Path

from app.schemas.detectors import RmseCalibrationCurve
from app.schemas.run_config import RunConfig
from app.services.artifact_service import load_curve, load_run_config

logger = logging.getLogger(__name__)


def load_context(args: argparse.Namespace) -> tuple[RunConfig, Path]:
    """Validated config with command-line overrides, and the output directory."""
    config = load_run_config(args.config)
    if args.seed is not None:
        config = RunConfig.model_validate({**config.model_dump(), "seed": args.seed})
    output_dir = args.output_dir or config.output_dir
    return config, output_dir


def resolve_curve(config: RunConfig, path: Path | None) -> RmseCalibrationCurve | None:
    """Curve from an explicit path, else from ``calibration.curve_path``, else None."""
    chosen = path or config.calibration.curve_path
    if chosen is None:
        return None
    curve = load_curve(chosen)
    logger.info(f"Loaded calibration curve from {chosen}")
    return curve
