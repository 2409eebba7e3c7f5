"""Detectors for the two unobservable elevations.

Overhead sources (elevation 90 deg) leave no rotation-frequency component in
the ITD series; the DFT amplitude at the rotation bin is compared with
``d_threshold``. Sources near the horizon (elevation 0 deg) make the 2D and 3D
filters agree; the RMSE between their azimuth tracks is mapped back to an
elevation with a monotone polynomial fitted beforehand in the environment.
"""

import logging
import math

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from app.core.constants import DetectorConstants
from app.core.exceptions import AmbiguityError, SignalAbsentError, ValidationError
from app.schemas.acoustics import ItdSeries
from app.schemas.detectors import (
    DftAmplitudeSpectrum,
    ElevationLookup,
    RmseCalibrationCurve,
    Thresholds,
)
from app.services.geometry_service import wrap_angles

logger = logging.getLogger(__name__)


def itd_amplitude_spectrum(series: ItdSeries) -> DftAmplitudeSpectrum:
    """
    One-sided amplitude spectrum ``(2/N)|X|`` of a rotation series.

    The whole series is transformed with a rectangular window and no padding,
    so an integer number of revolutions puts the rotation frequency on a bin.
    Missing samples are taken as zero.

    Args:
        series: Uniformly sampled rotation series

    Returns:
        Amplitude estimates over angular frequency in rad/s

    Raises:
        ValidationError: If the series covers less than one revolution
    """
    if series.kind != "rotation":
        raise ValidationError("Amplitude spectrum needs a rotation series")
    n = len(series)
    period = 2.0 * math.pi / series.omega
    if n * series.sample_period < period * (1.0 - 1e-9):
        raise ValidationError(
            f"Series spans {n * series.sample_period:.3f} s, less than one revolution ({period:.3f} s)"
        )
    values = np.nan_to_num(series.d_measured, nan=0.0)
    amplitudes = 2.0 / n * np.abs(np.fft.rfft(values))
    frequencies = 2.0 * math.pi * np.fft.rfftfreq(n, series.sample_period)
    return DftAmplitudeSpectrum(frequencies=frequencies, amplitudes=amplitudes, sample_count=n)


def rotation_peak(
    spectrum: DftAmplitudeSpectrum,
    omega_rot: float,
    radius: int = DetectorConstants.BIN_SEARCH_RADIUS,
) -> float:
    """Largest amplitude within ``radius`` bins of the bin nearest ``omega_rot``."""
    if spectrum.frequencies.size == 0:
        raise ValidationError("Spectrum is empty")
    if omega_rot > spectrum.frequencies[-1] + 1e-12:
        raise ValidationError(f"Spectrum does not reach {omega_rot:.4f} rad/s")
    nearest = int(np.argmin(np.abs(spectrum.frequencies - omega_rot)))
    lo = max(nearest - radius, 0)
    hi = min(nearest + radius + 1, spectrum.amplitudes.size)
    return float(spectrum.amplitudes[lo:hi].max())


def detect_ninety_deg(
    spectrum: DftAmplitudeSpectrum, thresholds: Thresholds, omega_rot: float
) -> bool:
    """True when the rotation-frequency amplitude falls below ``d_threshold``."""
    return rotation_peak(spectrum, omega_rot) < thresholds.d_threshold


def rotation_fit(series: ItdSeries) -> tuple[float, float]:
    """
    Amplitude and azimuth of the rotation-frequency component.

    Fits ``d = A sin(phi - beta)`` by linear least squares on the columns
    ``cos(beta)`` and ``-sin(beta)`` over the samples that carry a measurement.

    Returns:
        Tuple of (amplitude in meters, azimuth in radians)

    Raises:
        SignalAbsentError: If fewer than two samples carry a measurement
    """
    valid = ~np.isnan(series.d_measured)
    if int(valid.sum()) < 2:
        raise SignalAbsentError("Rotation series has fewer than two measured samples")
    beta = series.beta[valid]
    design = np.column_stack([np.cos(beta), -np.sin(beta)])
    (a_sin, a_cos), *_ = np.linalg.lstsq(design, series.d_measured[valid], rcond=None)
    return float(math.hypot(a_sin, a_cos)), float(math.atan2(a_sin, a_cos))


def azimuth_rmse(track2d: np.ndarray, track3d: np.ndarray) -> float:
    """
    RMS of the wrapped difference between two azimuth tracks.

    Args:
        track2d: Azimuth estimates of the 2D filter, radians
        track3d: Azimuth estimates of the 3D filter, radians

    Returns:
        RMSE in degrees
    """
    track2d = np.asarray(track2d, dtype=float)
    track3d = np.asarray(track3d, dtype=float)
    if track2d.shape != track3d.shape:
        raise ValidationError(
            f"Track lengths differ: {track2d.shape} vs {track3d.shape}"
        )
    if track2d.size == 0:
        raise ValidationError("Tracks are empty")
    difference = wrap_angles(track2d - track3d)
    return math.degrees(float(np.sqrt(np.mean(difference**2))))


def fit_rmse_curve(
    samples: list[tuple[float, float]],
    degree: int = DetectorConstants.CURVE_DEGREE,
) -> RmseCalibrationCurve:
    """
    Least-squares polynomial RMSE(elevation) over the calibrated elevations.

    The fit is unconstrained. A curve that falls by more than twice its largest
    residual anywhere in the domain cannot be inverted and is refused.

    Args:
        samples: (elevation_deg, mean RMSE over azimuths in degrees) pairs
        degree: Polynomial degree

    Returns:
        Fitted curve with residuals and the fit domain

    Raises:
        ValidationError: If there are fewer distinct elevations than coefficients
        AmbiguityError: If the fitted curve decreases over its domain
    """
    if degree < 1:
        raise ValidationError(f"Degree must be at least 1, got {degree}")
    elevations = np.array([s[0] for s in samples], dtype=float)
    rmse = np.array([s[1] for s in samples], dtype=float)
    if np.any(elevations < 0):
        raise ValidationError("Calibration elevations must be non-negative")
    if np.unique(elevations).size < degree + 1:
        raise ValidationError(
            f"Degree {degree} needs {degree + 1} distinct elevations, "
            f"got {np.unique(elevations).size}"
        )
    vander = P.polyvander(elevations, degree)
    if np.linalg.matrix_rank(vander) < degree + 1:
        raise ValidationError("Rank-deficient calibration fit")

    coefficients, *_ = np.linalg.lstsq(vander, rmse, rcond=None)
    residuals = rmse - vander @ coefficients
    curve = RmseCalibrationCurve(
        coefficients=coefficients.tolist(),
        domain_deg=(float(elevations.min()), float(elevations.max())),
        residuals=residuals.tolist(),
        samples=[(float(e), float(r)) for e, r in zip(elevations, rmse, strict=True)],
    )
    check_monotone(curve)
    logger.info(
        f"Fitted degree-{degree} RMSE curve over {curve.domain_deg}, "
        f"max residual {curve.max_abs_residual:.3f} deg"
    )
    return curve


def _curve_grid(curve: RmseCalibrationCurve) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = curve.domain_deg
    grid = np.linspace(lo, hi, DetectorConstants.CURVE_GRID_POINTS)
    return grid, np.asarray(curve(grid), dtype=float)


def check_monotone(curve: RmseCalibrationCurve) -> None:
    """
    Refuse a curve whose largest drop exceeds what its fit residuals explain.

    The drop is measured against the running maximum on a dense grid. Two
    neighbouring samples with residuals of opposite sign can produce a dip of
    up to twice the largest residual, so such wiggles are accepted.

    Raises:
        AmbiguityError: If the curve falls by more than twice its largest residual
    """
    _, values = _curve_grid(curve)
    drop = float(np.max(np.maximum.accumulate(values) - values))
    scale = max(1.0, float(np.max(np.abs(values))))
    tolerance = max(2.0 * curve.max_abs_residual, 1e-9 * scale)
    if drop > tolerance:
        raise AmbiguityError(
            f"Calibration curve falls by {drop:.4f} deg inside its domain "
            f"(tolerance {tolerance:.4f} deg)"
        )


def elevation_from_rmse(curve: RmseCalibrationCurve, rmse: float) -> ElevationLookup:
    """
    Invert the calibration curve by root finding.

    RMSE values beyond the curve's range are clamped to the domain edges and
    flagged. Inside a tolerated wiggle the largest matching elevation wins.

    Raises:
        AmbiguityError: If the curve is not monotone over its domain
    """
    check_monotone(curve)
    lo, hi = curve.domain_deg
    at_lo, at_hi = float(curve(lo)), float(curve(hi))
    if rmse <= at_lo:
        return ElevationLookup(elevation_deg=lo, clamped=rmse < at_lo)
    if rmse >= at_hi:
        return ElevationLookup(elevation_deg=hi, clamped=rmse > at_hi)
    grid, values = _curve_grid(curve)
    below = np.flatnonzero(values <= rmse)
    # values[-1] > rmse, so the last grid point at or below rmse brackets the largest root
    start = int(below[-1])
    elevation = brentq(
        lambda e: float(curve(e)) - rmse, grid[start], grid[start + 1], xtol=1e-10
    )
    return ElevationLookup(elevation_deg=float(elevation))
