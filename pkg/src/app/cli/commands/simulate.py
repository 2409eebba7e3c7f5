"""``simulate``: produce the rotation-phase ITD series for the configured source."""

import argparse
import logging
from pathlib import Path
from typing import Any

from app.cli.common import load_context
from app.schemas.geometry import ArrayPose
from app.services.acoustics_service import synthesize_pair, write_recording
from app.services.artifact_service import save_series, write_manifest
from app.services.pipeline_service import SimulatedScene, derive_seed

logger = logging.getLogger(__name__)


def register(subparsers: Any, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "simulate", parents=parents, help="Simulate a rotation run and write its ITD series"
    )
    parser.add_argument(
        "--save-audio",
        action="store_true",
        help="Also write the two-channel recording as WAV (audio mode only)",
    )
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config, output_dir = load_context(args)
    source = config.source.to_truth()
    scene = SimulatedScene(config, source, config.seed)
    series = scene.rotation_series()
    artifacts: list[Path] = []
    series_path = save_series(output_dir / "series.csv", series)
    artifacts += [series_path, series_path.with_suffix(".json")]

    if args.save_audio and config.mode == "audio":
        schedule = config.array.rotation_schedule()
        baseline = config.array.baseline_m
        poses = [ArrayPose(beta=float(b), baseline=baseline) for b in schedule.betas()]
        recording = synthesize_pair(
            config.room,
            source,
            poses,
            schedule.sample_period,
            config.signal,
            derive_seed(config.seed, 1),
        )
        audio_path = output_dir / "recording.wav"
        write_recording(audio_path, recording)
        artifacts.append(audio_path)
    elif args.save_audio:
        logger.warning("--save-audio ignored in ideal_itd mode")

    write_manifest(output_dir, "simulate", config, [config.seed], artifacts)
    print(f"series: {series_path} ({len(series)} samples, {series.absent.sum()} absent)")
    return 0
