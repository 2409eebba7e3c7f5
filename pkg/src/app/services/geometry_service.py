"""Coordinate conventions and closed-form path-difference models.

Frame: x forward along the robot heading, y to the left, z up. The array heading
rotates clockwise by ``beta`` from the robot heading. Microphone 1 sits at
``O' + (b/2) r`` and microphone 2 at ``O' - (b/2) r`` with ``r = (-sin b, -cos b, 0)``,
so a positive path difference means the sound reaches microphone 2 last.
"""

import math

import numpy as np

from app.core.exceptions import ValidationError
from app.schemas.geometry import ArrayPose, SourceTruth


def wrap_angle(a: float) -> float:
    """
    Wrap an angle into (-pi, pi].

    Args:
        a: Angle in radians

    Returns:
        Equivalent angle in (-pi, pi]

    Example:
        >>> wrap_angle(-3 * math.pi)
        3.141592653589793
    """
    if not math.isfinite(a):
        raise ValidationError(f"Cannot wrap non-finite angle {a}")
    wrapped = math.remainder(a, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def wrap_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized ``wrap_angle``; NaN entries pass through."""
    wrapped = np.remainder(np.asarray(a, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    return np.where(wrapped <= -math.pi, wrapped + 2.0 * math.pi, wrapped)


def psi_of(phi: float, beta: float) -> float:
    """Source azimuth seen from the array heading: ``wrap(phi - beta)``."""
    return wrap_angle(phi - beta)


def true_path_difference_3d(theta: float, psi: float, b: float) -> float:
    """Far-field path difference ``b cos(theta) sin(psi)`` in meters."""
    if b <= 0:
        raise ValidationError(f"Baseline must be positive, got {b}")
    return b * math.cos(theta) * math.sin(psi)


def true_path_difference_distance(D: float, delta_d: float, b: float) -> float:
    """
    Path difference after translating the array ``delta_d`` toward endfire.

    The array faces the source, so the only path difference comes from the
    lateral offset: ``b * delta_d / sqrt(delta_d**2 + D**2)``.

    Args:
        D: Source distance in meters
        delta_d: Cumulative translation in meters (negative mirrors the sign)
        b: Baseline in meters

    Returns:
        Path difference in meters
    """
    if b <= 0:
        raise ValidationError(f"Baseline must be positive, got {b}")
    if D <= 0:
        raise ValidationError(f"Distance must be positive, got {D}")
    return b * delta_d / math.hypot(delta_d, D)


def source_direction(elevation: float, azimuth: float) -> np.ndarray:
    """Unit vector toward a source; azimuth is clockwise from the robot heading."""
    return np.array(
        [
            math.cos(elevation) * math.cos(azimuth),
            -math.cos(elevation) * math.sin(azimuth),
            math.sin(elevation),
        ]
    )


def source_position(source: SourceTruth) -> np.ndarray:
    """Source position relative to the robot center."""
    return source.distance * source_direction(source.elevation, source.azimuth)


def array_axis(beta: float) -> np.ndarray:
    """Unit vector from microphone 2 to microphone 1 at heading ``beta``."""
    return np.array([-math.sin(beta), -math.cos(beta), 0.0])


def array_center(pose: ArrayPose) -> np.ndarray:
    """Array center relative to the robot center; translation moves it along ``-r``."""
    return -pose.offset * array_axis(pose.beta)


def microphone_positions(pose: ArrayPose) -> tuple[np.ndarray, np.ndarray]:
    """Positions of microphones 1 and 2 relative to the robot center."""
    axis = array_axis(pose.beta)
    center = array_center(pose)
    half = 0.5 * pose.baseline * axis
    return center + half, center - half


def far_field_path_difference(source: SourceTruth, pose: ArrayPose) -> float:
    """
    Far-field path difference for any rotation and translation of the array.

    Reduces to ``b cos(theta) sin(phi - beta)`` at zero offset and to the
    distance model when the heading faces the source.

    Args:
        source: True source location
        pose: Array pose

    Returns:
        Path difference in meters, positive when microphone 2 hears the sound last
    """
    relative = source_position(source) - array_center(pose)
    norm = float(np.linalg.norm(relative))
    if norm == 0.0:
        raise ValidationError("Source coincides with the array center")
    return pose.baseline * float(np.dot(relative, array_axis(pose.beta))) / norm


def canonical_orientation(theta: float, psi: float) -> tuple[float, float]:
    """
    Fold a 3D filter state onto elevation in [0, pi/2].

    ``(theta, psi)``, ``(-theta, psi)`` and ``(pi - theta, psi + pi)`` produce the
    same measurement, so the filter may settle on any of them.

    Args:
        theta: Elevation state, unwrapped
        psi: Array-relative azimuth state, unwrapped

    Returns:
        Tuple of (elevation in [0, pi/2], azimuth-from-heading in (-pi, pi])
    """
    theta = wrap_angle(theta)
    if theta < 0:
        theta = -theta
    if theta > math.pi / 2:
        theta = math.pi - theta
        psi = psi + math.pi
    return theta, wrap_angle(psi)
