"""Interaural time difference estimation by generalized cross-correlation.

Correlation convention: ``c[tau] = sum_n y1[n] * y2[n + tau]``, so a positive
lag means channel 2 receives the sound after channel 1.
"""

import logging
import math

import numpy as np
from scipy import fft as spfft
from scipy.stats import gmean

from app.core.constants import GccConstants
from app.core.exceptions import SignalAbsentError, ValidationError
from app.schemas.acoustics import ItdSeries, SeriesKind, StereoRecording
from app.schemas.geometry import ArrayPose
from app.schemas.itd import CrossCorrelation, GccConfig

logger = logging.getLogger(__name__)


def resolve_max_lag(cfg: GccConfig, b: float, c0: float) -> float:
    """
    Search half-window in seconds for an array of baseline ``b``.

    Raises:
        ValidationError: If an explicit window cannot contain the endfire delay
    """
    physical = b / c0
    if cfg.max_lag_s is None:
        return cfg.max_lag_margin * physical
    if cfg.max_lag_s < physical:
        raise ValidationError(
            f"max_lag {cfg.max_lag_s:.3e} s is below the endfire delay {physical:.3e} s"
        )
    return cfg.max_lag_s


def spectral_flatness(frame: np.ndarray) -> float:
    """Geometric over arithmetic mean of the power spectrum, in [0, 1]."""
    power = np.abs(np.fft.rfft(frame)) ** 2 + 1e-30
    return float(gmean(power) / np.mean(power))


def _choose_weighting(cfg: GccConfig, frame: np.ndarray) -> str:
    if cfg.weighting != "auto":
        return cfg.weighting
    if spectral_flatness(frame) < GccConstants.PHAT_FLATNESS_THRESHOLD:
        return "phat"
    return "none"


def cross_correlate(
    frame1: np.ndarray,
    frame2: np.ndarray,
    cfg: GccConfig,
    sample_rate: int,
    max_lag_s: float,
) -> CrossCorrelation:
    """
    Correlate two frames over lags in [-max_lag, +max_lag].

    Frames are zero-padded so the correlation is linear, not circular. With
    PHAT weighting the cross-spectrum is magnitude-normalized first.

    Args:
        frame1: Channel 1 samples
        frame2: Channel 2 samples, same length
        cfg: Weighting settings
        sample_rate: Samples per second
        max_lag_s: Search half-window in seconds

    Returns:
        Correlation values at integer lags

    Raises:
        ValidationError: If frames differ in length or are shorter than the window
    """
    frame1 = np.asarray(frame1, dtype=float)
    frame2 = np.asarray(frame2, dtype=float)
    if frame1.shape != frame2.shape or frame1.ndim != 1:
        raise ValidationError("Frames must be 1-D and of equal length")
    max_lag = int(math.ceil(max_lag_s * sample_rate))
    if frame1.size < 2 * max_lag + 1:
        raise ValidationError(
            f"Frame of {frame1.size} samples is shorter than the {2 * max_lag + 1}-sample "
            "lag window"
        )

    weighting = _choose_weighting(cfg, frame1)
    n_fft = spfft.next_fast_len(2 * frame1.size - 1, real=True)
    cross = np.conj(np.fft.rfft(frame1, n_fft)) * np.fft.rfft(frame2, n_fft)
    if weighting == "phat":
        magnitude = np.abs(cross)
        cross = cross / np.maximum(magnitude, np.finfo(float).tiny)
    full = np.fft.irfft(cross, n_fft)

    lags = np.arange(-max_lag, max_lag + 1)
    values = np.concatenate((full[n_fft - max_lag :], full[: max_lag + 1]))
    return CrossCorrelation(
        lags=lags, values=values, sample_rate_hz=sample_rate, weighting=weighting
    )


def peak_lag(correlation: CrossCorrelation, subsample: str = "off") -> float:
    """
    Lag of the correlation maximum, in samples.

    Ties are broken toward the smallest absolute lag. Parabolic refinement fits
    the peak and its two neighbours.
    """
    values = correlation.values
    best = values.max()
    candidates = np.flatnonzero(values == best)
    index = int(min(candidates, key=lambda i: (abs(int(correlation.lags[i])), i)))
    lag = float(correlation.lags[index])
    if subsample == "parabolic" and 0 < index < values.size - 1:
        left, centre, right = values[index - 1], values[index], values[index + 1]
        curvature = left - 2.0 * centre + right
        if curvature < 0:
            lag += float(np.clip(0.5 * (left - right) / curvature, -0.5, 0.5))
    return lag


def frame_has_signal(frame1: np.ndarray, frame2: np.ndarray, cfg: GccConfig) -> bool:
    """True when both channels carry mean power above the floor."""
    floor = cfg.energy_floor
    return bool(np.mean(frame1**2) > floor and np.mean(frame2**2) > floor)


def estimate_itd(
    frame1: np.ndarray,
    frame2: np.ndarray,
    cfg: GccConfig,
    sample_rate: int,
    max_lag_s: float,
) -> float:
    """
    Time difference of arrival in seconds, positive when channel 2 lags.

    Raises:
        SignalAbsentError: If either frame falls below the energy floor
    """
    frame1 = np.asarray(frame1, dtype=float)
    frame2 = np.asarray(frame2, dtype=float)
    if not frame_has_signal(frame1, frame2, cfg):
        raise SignalAbsentError("Frame energy below floor: absence of sound")
    correlation = cross_correlate(frame1, frame2, cfg, sample_rate, max_lag_s)
    return peak_lag(correlation, cfg.subsample) / sample_rate


def itd_to_path_difference(t_hat: float, c0: float) -> float:
    """Path difference ``d = t_hat * c0`` in meters."""
    if c0 <= 0:
        raise ValidationError(f"Speed of sound must be positive, got {c0}")
    return t_hat * c0


def series_from_recording(
    recording: StereoRecording,
    poses: list[ArrayPose],
    cfg: GccConfig,
    c0: float,
    kind: SeriesKind,
    sample_period: float,
    omega: float = 0.0,
) -> ItdSeries:
    """
    Estimate one path difference per frame of a recording.

    Frames without signal become NaN measurements. A recording whose every
    frame is silent raises instead, meaning there is no source at all.

    Args:
        recording: Synthesized or loaded two-channel audio
        poses: Array pose of every frame
        cfg: Cross-correlation settings
        c0: Speed of sound in m/s
        kind: "rotation" or "translation"
        sample_period: Seconds per frame
        omega: Rotation rate of rotation series

    Returns:
        ITD series aligned with ``poses``
    """
    if recording.frame_count < len(poses):
        raise ValidationError(
            f"Recording holds {recording.frame_count} frames, trajectory needs {len(poses)}"
        )
    baseline = poses[0].baseline
    max_lag_s = resolve_max_lag(cfg, baseline, c0)
    measured = np.full(len(poses), np.nan)
    for index in range(len(poses)):
        frame1, frame2 = recording.frame(index)
        if not frame_has_signal(frame1, frame2, cfg):
            continue
        t_hat = estimate_itd(frame1, frame2, cfg, recording.sample_rate_hz, max_lag_s)
        measured[index] = itd_to_path_difference(t_hat, c0)

    absent = int(np.isnan(measured).sum())
    if absent == len(poses):
        raise SignalAbsentError("No source: every frame is below the energy floor")
    if absent:
        logger.warning(f"{absent} of {len(poses)} frames carried no signal")
    return ItdSeries(
        kind=kind,
        beta=np.array([p.beta for p in poses]),
        offset=np.array([p.offset for p in poses]),
        d_measured=measured,
        baseline=baseline,
        sample_period=sample_period,
        omega=omega,
    )
