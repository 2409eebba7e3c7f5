"""Tests for coordinate conventions and closed-form path differences."""

import math

import numpy as np
import pytest

from app.core.exceptions import ValidationError
from app.schemas.geometry import ArrayPose, SourceTruth
from app.services.geometry_service import (
    array_center,
    canonical_orientation,
    far_field_path_difference,
    microphone_positions,
    psi_of,
    source_direction,
    true_path_difference_3d,
    true_path_difference_distance,
    wrap_angle,
    wrap_angles,
)

B = 0.18


@pytest.mark.unit
@pytest.mark.parametrize(
    ("angle", "expected"),
    [
        (0.0, 0.0),
        (math.pi, math.pi),
        (-math.pi, math.pi),
        (-3 * math.pi, math.pi),
        (1.5 * math.pi, -0.5 * math.pi),
        (2 * math.pi + 0.25, 0.25),
    ],
)
def test_wrap_angle(angle: float, expected: float) -> None:
    """Test angles wrap into (-pi, pi]."""
    assert wrap_angle(angle) == pytest.approx(expected)


@pytest.mark.unit
def test_wrap_angle_rejects_non_finite() -> None:
    """Test NaN and infinity are refused."""
    with pytest.raises(ValidationError):
        wrap_angle(math.nan)
    with pytest.raises(ValidationError):
        wrap_angle(math.inf)


@pytest.mark.unit
def test_wrap_angles_matches_scalar(rng: np.random.Generator) -> None:
    """Test the vectorized wrap agrees with the scalar one."""
    angles = rng.uniform(-20, 20, 200)

    wrapped = wrap_angles(angles)

    assert np.all(wrapped > -math.pi) and np.all(wrapped <= math.pi)
    np.testing.assert_allclose(wrapped, [wrap_angle(a) for a in angles], atol=1e-12)


@pytest.mark.unit
def test_psi_of_wraps_difference() -> None:
    """Test the array-relative azimuth is wrapped."""
    assert psi_of(math.radians(170), math.radians(-170)) == pytest.approx(math.radians(-20))


@pytest.mark.unit
def test_true_path_difference_3d_extremes() -> None:
    """Test endfire gives the full baseline and overhead gives zero."""
    assert true_path_difference_3d(0.0, math.pi / 2, B) == pytest.approx(B)
    assert true_path_difference_3d(0.0, -math.pi / 2, B) == pytest.approx(-B)
    assert true_path_difference_3d(math.pi / 2, 1.0, B) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.unit
def test_true_path_difference_rejects_bad_baseline() -> None:
    """Test non-positive baselines are rejected."""
    with pytest.raises(ValidationError):
        true_path_difference_3d(0.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        true_path_difference_distance(5.0, 0.1, -1.0)


@pytest.mark.unit
def test_true_path_difference_distance() -> None:
    """Test the translation model is odd in the offset and vanishes without it."""
    assert true_path_difference_distance(5.0, 0.0, B) == 0.0
    assert true_path_difference_distance(5.0, 0.14, B) == pytest.approx(
        B * 0.14 / math.hypot(0.14, 5.0)
    )
    assert true_path_difference_distance(5.0, -0.14, B) == pytest.approx(
        -true_path_difference_distance(5.0, 0.14, B)
    )
    with pytest.raises(ValidationError):
        true_path_difference_distance(0.0, 0.1, B)


@pytest.mark.unit
def test_source_direction_is_clockwise() -> None:
    """Test positive azimuth points to the right of the robot heading (negative y)."""
    direction = source_direction(0.0, math.pi / 2)

    np.testing.assert_allclose(direction, [0.0, -1.0, 0.0], atol=1e-15)
    assert np.linalg.norm(source_direction(0.3, 1.2)) == pytest.approx(1.0)


@pytest.mark.unit
def test_microphones_straddle_array_center() -> None:
    """Test microphones are a baseline apart around the translated center."""
    pose = ArrayPose(beta=0.4, offset=0.05, baseline=B)

    mic1, mic2 = microphone_positions(pose)

    assert np.linalg.norm(mic1 - mic2) == pytest.approx(B)
    np.testing.assert_allclose(0.5 * (mic1 + mic2), array_center(pose))
    assert np.linalg.norm(array_center(pose)) == pytest.approx(0.05)


@pytest.mark.unit
def test_far_field_reduces_to_rotation_model(rng: np.random.Generator) -> None:
    """Test zero offset reproduces b cos(theta) sin(phi - beta)."""
    for _ in range(100):
        theta = rng.uniform(0, math.pi / 2)
        phi = rng.uniform(-math.pi, math.pi)
        beta = rng.uniform(-10, 10)
        source = SourceTruth(distance=rng.uniform(1, 10), elevation=theta, azimuth=phi)

        value = far_field_path_difference(source, ArrayPose(beta=beta, baseline=B))

        assert value == pytest.approx(true_path_difference_3d(theta, phi - beta, B), abs=1e-12)


@pytest.mark.unit
@pytest.mark.parametrize("elevation_deg", [0.0, 20.0, 60.0, 90.0])
def test_far_field_reduces_to_distance_model(elevation_deg: float) -> None:
    """Test facing the source and translating reproduces the distance model."""
    source = SourceTruth.from_degrees(5.0, elevation_deg, 50.0)
    pose = ArrayPose(beta=source.azimuth, offset=0.07, baseline=B)

    value = far_field_path_difference(source, pose)

    assert value == pytest.approx(true_path_difference_distance(5.0, 0.07, B), rel=1e-12)


@pytest.mark.unit
def test_canonical_orientation_folds() -> None:
    """Test negative and beyond-vertical elevations fold into [0, pi/2]."""
    assert canonical_orientation(-0.3, 1.0) == pytest.approx((0.3, 1.0))
    theta, psi = canonical_orientation(math.pi - 0.3, 1.0)
    assert theta == pytest.approx(0.3)
    assert psi == pytest.approx(wrap_angle(1.0 + math.pi))


@pytest.mark.unit
def test_canonical_orientation_preserves_measurement(rng: np.random.Generator) -> None:
    """Test folding never changes the predicted path difference."""
    for _ in range(200):
        theta = rng.uniform(-2 * math.pi, 2 * math.pi)
        psi = rng.uniform(-2 * math.pi, 2 * math.pi)

        folded_theta, folded_psi = canonical_orientation(theta, psi)

        assert 0.0 <= folded_theta <= math.pi / 2
        assert true_path_difference_3d(folded_theta, folded_psi, B) == pytest.approx(
            true_path_difference_3d(theta, psi, B), abs=1e-12
        )
