"""``localize``: run the orientation flow on a stored series, optionally followed by distance."""

import argparse
import logging
from pathlib import Path
from typing import Any

import numpy as np

from app.cli.common import load_context, resolve_curve
from app.schemas.estimation import EkfState
from app.services.artifact_service import (
    load_series,
    save_frame,
    save_verdict,
    traces_frame,
    write_manifest,
)
from app.services.estimation_service import ModelDist, history_frame
from app.services.pipeline_service import (
    SimulatedScene,
    localize_distance,
    localize_orientation,
)

logger = logging.getLogger(__name__)


def register(subparsers: Any, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "localize", parents=parents, help="Localize the source from a rotation series"
    )
    parser.add_argument("series", type=Path, help="Series CSV written by 'simulate'")
    parser.add_argument("--calibration", type=Path, help="Calibration curve JSON")
    parser.add_argument(
        "--distance",
        action="store_true",
        help="Also run the translation phase against the configured source",
    )
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config, output_dir = load_context(args)
    series = load_series(args.series)
    curve = resolve_curve(config, args.calibration)
    verdict = localize_orientation(config, series, curve)
    artifacts = [save_frame(output_dir / "orientation_traces.csv", traces_frame(verdict))]

    distance = None
    if args.distance:
        scene = SimulatedScene(config, config.source.to_truth(), config.seed)
        distance = localize_distance(config, verdict, scene)
        verdict = verdict.model_copy(update={"distance_m": distance.distance_m})
        history = EkfState(
            x_hat=np.array([distance.distance_m]),
            P=np.array([[distance.std_m**2]]),
            history=distance.history,
        )
        artifacts.append(
            save_frame(
                output_dir / "distance_history.csv",
                history_frame(history, ModelDist(series.baseline)),
            )
        )

    artifacts.append(save_verdict(output_dir / "verdict.json", verdict, distance))
    write_manifest(output_dir, "localize", config, [config.seed], artifacts)

    azimuth = "undefined" if verdict.azimuth_deg is None else f"{verdict.azimuth_deg:.2f} deg"
    print(f"branch: {verdict.branch}")
    print(f"azimuth: {azimuth}")
    print(f"elevation: {verdict.elevation_deg:.2f} deg")
    if distance is not None:
        print(f"distance: {distance.distance_m:.3f} m (std {distance.std_m:.3f} m)")
    if not verdict.diagnostics.converged:
        logger.warning(
            f"Azimuth spread {verdict.diagnostics.azimuth_spread_deg:.2f} deg exceeds the "
            "convergence gate"
        )
    return 0
