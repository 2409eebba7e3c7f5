"""``observability``: rank sweep of one model over a state grid."""

import argparse
from typing import Any, get_args

from app.cli.common import load_context
from app.schemas.run_config import ModelId
from app.services.artifact_service import save_frame, write_manifest
from app.services.observability_service import report_frame, singularity_sweep


def register(subparsers: Any, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "observability", parents=parents, help="Sweep the observability rank of a model"
    )
    parser.add_argument("--model", choices=get_args(ModelId), help="Override the swept model")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config, output_dir = load_context(args)
    model_id = args.model or config.observability.model
    report = singularity_sweep(
        model_id, config.observability, config.array.baseline_m, config.array.omega_rad_s
    )
    path = save_frame(output_dir / f"observability_{model_id}.csv", report_frame(report))
    write_manifest(output_dir, "observability", config, [], [path])
    print(report.summary())
    return 0
