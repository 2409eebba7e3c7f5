"""Reading and writing run artifacts.

Artifacts are plain files under the output directory:

- ITD series: a CSV (``time_s, beta_rad, offset_m, d_measured_m``) with a JSON
  sidecar holding kind, baseline, sample period and rotation rate
- Calibration curve: JSON dump of ``RmseCalibrationCurve``
- Verdict: JSON dump of ``LocalizationVerdict`` plus the distance estimate
- Manifest: ``manifest.json`` with the config hash, seeds and library versions

Nothing written here carries a timestamp, so identical inputs give
byte-identical files.
"""

import hashlib
import json
import logging
import platform
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import pydantic
import yaml

from app.core.config import Settings, settings
from app.core.exceptions import ConfigurationError, NotFoundError, ValidationError
from app.schemas.acoustics import ItdSeries
from app.schemas.detectors import RmseCalibrationCurve
from app.schemas.pipeline import DistanceEstimate, LocalizationVerdict
from app.schemas.run_config import RunConfig

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ["time_s", "beta_rad", "offset_m", "d_measured_m"]
_VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "soundfile", "pyyaml")


def load_run_config(path: Path | None, env: Settings = settings) -> RunConfig:
    """
    Load and validate a YAML run config, then apply environment overrides.

    Args:
        path: YAML document, or None for the reference defaults
        env: Process settings; only ``OUTPUT_DIR`` and ``WORKERS`` are applied

    Raises:
        NotFoundError: If the file does not exist
        ConfigurationError: If the YAML is malformed or fails schema validation
    """
    document: dict[str, Any] = {}
    if path is not None:
        if not path.exists():
            raise NotFoundError(f"Config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Malformed YAML in {path}: {e}") from e
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigurationError(f"Config {path} must be a mapping at the top level")
        document = loaded or {}

    if env.OUTPUT_DIR is not None:
        document["output_dir"] = str(env.OUTPUT_DIR)
    if env.WORKERS is not None:
        document.setdefault("experiment", {})
        document["experiment"]["workers"] = env.WORKERS

    try:
        config = RunConfig.model_validate(document)
    except pydantic.ValidationError as e:
        raise ConfigurationError(f"Invalid run config: {e}") from e
    logger.debug(f"Loaded run config from {path or 'defaults'}")
    return config


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of a config."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def library_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for package in _VERSIONED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


def write_manifest(
    output_dir: Path,
    command: str,
    config: RunConfig,
    seeds: list[int],
    artifacts: list[Path],
) -> Path:
    """Write ``manifest.json`` describing one command invocation."""
    output_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config_sha256": config_hash(config),
        "seeds": seeds,
        "artifacts": sorted(str(a.relative_to(output_dir)) for a in artifacts),
        "versions": library_versions(),
    }
    path = output_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def save_series(path: Path, series: ItdSeries) -> Path:
    """Write a series CSV and its metadata sidecar; returns the CSV path."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            "time_s": series.times,
            "beta_rad": series.beta,
            "offset_m": series.offset,
            "d_measured_m": series.d_measured,
        },
        columns=SERIES_COLUMNS,
    )
    frame.to_csv(path, index=False, float_format="%.12g")
    meta = {
        "kind": series.kind,
        "baseline_m": series.baseline,
        "sample_period_s": series.sample_period,
        "omega_rad_s": series.omega,
    }
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(series)}-sample {series.kind} series to {path}")
    return path


def load_series(path: Path) -> ItdSeries:
    """
    Read a series written by ``save_series``.

    Raises:
        NotFoundError: If the CSV or its sidecar is missing
        ValidationError: If columns are missing or the series is malformed
    """
    meta_path = _sidecar(path)
    for required in (path, meta_path):
        if not required.exists():
            raise NotFoundError(f"Series artifact not found: {required}")
    frame = pd.read_csv(path)
    missing = [c for c in SERIES_COLUMNS if c not in frame.columns]
    if missing:
        raise ValidationError(f"Series {path} lacks columns {missing}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    try:
        return ItdSeries(
            kind=meta["kind"],
            beta=frame["beta_rad"].to_numpy(dtype=float),
            offset=frame["offset_m"].to_numpy(dtype=float),
            d_measured=frame["d_measured_m"].to_numpy(dtype=float),
            baseline=meta["baseline_m"],
            sample_period=meta["sample_period_s"],
            omega=meta.get("omega_rad_s", 0.0),
        )
    except (KeyError, pydantic.ValidationError) as e:
        raise ValidationError(f"Malformed series {path}: {e}") from e


def save_curve(path: Path, curve: RmseCalibrationCurve) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(curve.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote degree-{curve.degree} calibration curve to {path}")
    return path


def load_curve(path: Path) -> RmseCalibrationCurve:
    """Read a calibration curve written by ``save_curve``."""
    if not path.exists():
        raise NotFoundError(
            f"Calibration curve not found: {path}; run the 'calibrate' command first"
        )
    try:
        return RmseCalibrationCurve.model_validate_json(path.read_text(encoding="utf-8"))
    except pydantic.ValidationError as e:
        raise ValidationError(f"Malformed calibration curve {path}: {e}") from e


def save_verdict(
    path: Path,
    verdict: LocalizationVerdict,
    distance: DistanceEstimate | None = None,
) -> Path:
    """Write the verdict report as JSON, with the distance estimate when present."""
    path.parent.mkdir(parents=True, exist_ok=True)
    report = {
        "orientation": verdict.model_dump(mode="json"),
        "distance": distance.model_dump(mode="json") if distance is not None else None,
    }
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def save_frame(path: Path, frame: pd.DataFrame) -> Path:
    """Write a DataFrame as CSV with a stable float format."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def traces_frame(verdict: LocalizationVerdict) -> pd.DataFrame:
    """Per-sample azimuth and elevation tracks of both filters, in degrees."""
    traces = verdict.traces
    if traces is None:
        return pd.DataFrame(columns=["step", "beta_deg"])
    n = traces.beta_deg.size
    columns: dict[str, np.ndarray] = {
        "step": np.arange(n),
        "beta_deg": traces.beta_deg,
    }
    for name in ("azimuth_2d_deg", "azimuth_3d_deg", "elevation_3d_deg"):
        values = getattr(traces, name)
        if values is not None:
            columns[name] = values
    return pd.DataFrame(columns)
