"""Tests for the extended Kalman filters and their state models."""

import math
import warnings

import numpy as np
import pytest
from pytest_mock import MockerFixture

from app.core.exceptions import NumericalError, ValidationError
from app.schemas.acoustics import ItdSeries
from app.schemas.estimation import EkfConfig, EkfState
from app.schemas.geometry import RotationSchedule, SourceTruth, TranslationPlan
from app.schemas.run_config import DistanceFilterSettings, OrientationFilterSettings
from app.services.acoustics_service import ideal_itd_series
from app.services.estimation_service import (
    AzimuthSubsystem,
    ElevationSubsystem,
    Model2D,
    Model3D,
    ModelDist,
    StateModel,
    distance_ekf_config,
    ekf_step,
    history_frame,
    model3d_jacobians,
    modeldist_jacobian,
    orientation_ekf_config,
    run_filter,
)
from app.services.geometry_service import wrap_angle

B = 0.18
OMEGA = 2 * math.pi / 5
T_OUT = 5.0 / 360.0
SCHEDULE = RotationSchedule(omega=OMEGA, revolutions=3, itd_cadence=math.radians(1))


def _numeric_jacobian(model: StateModel, x: np.ndarray, u: float | None = None) -> np.ndarray:
    step = 1e-6
    columns = []
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = step
        columns.append((model.h(x + dx, u) - model.h(x - dx, u)) / (2 * step))
    return np.array(columns)


def _config(n: int, q: float = 1e-4) -> EkfConfig:
    return EkfConfig(
        process_noise=[q] * n,
        sensor_noise=1e-4,
        substeps=10,
        sample_period=T_OUT,
        initial_state=[0.3] * n,
        initial_covariance=np.eye(n) * 0.01,
    )


@pytest.mark.unit
@pytest.mark.parametrize(
    ("model", "x", "u"),
    [
        (Model2D(B, OMEGA), np.array([0.7]), None),
        (Model3D(B, OMEGA), np.array([0.4, -2.1]), None),
        (AzimuthSubsystem(B, OMEGA, 0.5), np.array([1.2]), None),
        (ElevationSubsystem(B, 0.8), np.array([0.6]), None),
        (ModelDist(B), np.array([4.0]), 0.07),
        (ModelDist(B, sign=-1.0), np.array([2.5]), 0.03),
    ],
)
def test_measurement_jacobian_matches_finite_difference(
    model: StateModel, x: np.ndarray, u: float | None
) -> None:
    """Test every analytic measurement Jacobian against central differences."""
    np.testing.assert_allclose(
        model.measurement_jacobian(x, u), _numeric_jacobian(model, x, u), rtol=1e-6, atol=1e-12
    )


@pytest.mark.unit
def test_model3d_jacobian_closed_form() -> None:
    """Test the 3D Jacobian at 45/45 degrees."""
    np.testing.assert_allclose(model3d_jacobians(np.radians([45.0, 45.0]), B), [-0.09, 0.09])
    assert np.all(Model3D(B, OMEGA).process_jacobian(np.zeros(2)) == 0.0)


def _random_states(
    rng: np.random.Generator, model: StateModel, count: int
) -> list[tuple[np.ndarray, float | None]]:
    if isinstance(model, ModelDist):
        distances = rng.uniform(0.5, 20.0, count)
        offsets = rng.uniform(0.0007, 0.14, count)
        return [(np.array([d]), float(u)) for d, u in zip(distances, offsets, strict=True)]
    psis = rng.uniform(-math.pi, math.pi, count)
    if isinstance(model, Model3D):
        # Away from the horizon and the zenith, where the 3D model is singular
        thetas = rng.uniform(0.05, math.pi / 2 - 0.05, count)
        return [(np.array([t, p]), None) for t, p in zip(thetas, psis, strict=True)]
    return [(np.array([p]), None) for p in psis]


@pytest.mark.unit
@pytest.mark.parametrize("model", [Model2D(B, OMEGA), Model3D(B, OMEGA), ModelDist(B)])
def test_jacobians_on_random_states(model: StateModel) -> None:
    """Test analytic Jacobians against central differences on 10^4 random states."""
    rng = np.random.default_rng(8)

    for x, u in _random_states(rng, model, 10_000):
        analytic = model.measurement_jacobian(x, u)
        np.testing.assert_allclose(analytic, _numeric_jacobian(model, x, u), rtol=1e-6, atol=1e-10)


@pytest.mark.unit
def test_modeldist_jacobian_sign_and_domain() -> None:
    """Test the distance Jacobian is never positive and rejects bad arguments."""
    assert modeldist_jacobian(5.0, 0.1, B) < 0
    assert modeldist_jacobian(5.0, 0.0, B) == 0.0
    with pytest.raises(ValidationError):
        modeldist_jacobian(0.0, 0.1, B)
    with pytest.raises(ValidationError):
        modeldist_jacobian(5.0, -0.1, B)


@pytest.mark.unit
def test_modeldist_rejects_undefined_state() -> None:
    """Test D = 0 without translation is undefined and the input is required."""
    model = ModelDist(B)

    with pytest.raises(ValidationError):
        model.validate_state(np.array([0.0]), 0.0)
    with pytest.raises(ValidationError):
        model.h(np.array([1.0]))
    with pytest.raises(ValidationError):
        ModelDist(B, sign=0.5)


@pytest.mark.unit
def test_missing_measurement_only_predicts() -> None:
    """Test a NaN measurement propagates x by the drift and P by T*Q."""
    model = Model2D(B, OMEGA)
    cfg = _config(1)
    state = EkfState.initial(cfg)

    after = ekf_step(state, model, cfg, math.nan)

    assert after.x_hat[0] == pytest.approx(0.3 - OMEGA * T_OUT)
    assert after.P[0, 0] == pytest.approx(0.01 + T_OUT * 1e-4)
    assert after.step == 1
    assert math.isnan(after.history[-1].innovation)


@pytest.mark.unit
def test_update_shrinks_covariance_and_keeps_symmetry() -> None:
    """Test a measurement update reduces uncertainty and P stays symmetric."""
    model = Model3D(B, OMEGA)
    cfg = _config(2)
    state = EkfState.initial(cfg)

    after = ekf_step(state, model, cfg, 0.05)

    np.testing.assert_array_equal(after.P, after.P.T)
    assert np.trace(after.P) < np.trace(cfg.initial_covariance) + 2 * T_OUT * 1e-4
    assert np.all(np.linalg.eigvalsh(after.P) >= 0)


@pytest.mark.unit
def test_step_leaves_input_state_untouched() -> None:
    """Test a cycle returns a new history and keeps the previous state intact."""
    model = Model3D(B, OMEGA)
    cfg = _config(2)
    before = EkfState.initial(cfg)
    x_before = before.x_hat.copy()

    first = ekf_step(before, model, cfg, 0.05)
    second = ekf_step(first, model, cfg, 0.04)

    assert before.history == []
    np.testing.assert_array_equal(before.x_hat, x_before)
    assert len(first.history) == 1
    assert [r.step for r in second.history] == [0, 1]


@pytest.mark.unit
def test_update_does_not_warn() -> None:
    """Test the scalar innovation variance is extracted without NumPy deprecation warnings."""
    model = Model3D(B, OMEGA)
    cfg = _config(2)

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ekf_step(EkfState.initial(cfg), model, cfg, 0.05)


@pytest.mark.unit
def test_covariance_stays_positive_semidefinite_over_long_run() -> None:
    """Test P stays symmetric with eigenvalues above -1e-12 over 10^4 random cycles."""
    rng = np.random.default_rng(21)
    model = Model3D(B, OMEGA)
    cfg = _config(2)
    state = EkfState.initial(cfg)
    smallest = math.inf

    for value in rng.uniform(-B, B, 10_000):
        measurement = math.nan if rng.random() < 0.1 else float(value)
        after = ekf_step(state, model, cfg, measurement)
        np.testing.assert_array_equal(after.P, after.P.T)
        smallest = min(smallest, float(np.linalg.eigvalsh(after.P)[0]))
        state = EkfState(x_hat=after.x_hat, P=after.P, step=after.step)

    assert smallest >= -1e-12


@pytest.mark.integration
def test_2d_error_decays_once_tracking() -> None:
    """Test the planar filter error shrinks every quarter turn on exact measurements."""
    source = SourceTruth.from_degrees(5.0, 0.0, 15.0)
    series = ideal_itd_series(source, SCHEDULE, B, 0.0, seed=0)
    model = Model2D(B, OMEGA)
    settings = OrientationFilterSettings(initial_guess="fixed", process_sigma=0.0)

    state = run_filter(model, orientation_ekf_config(model, settings, series), series)

    psi = np.array([r.state[0] for r in state.history])
    errors = np.abs(
        [wrap_angle(p + b - source.azimuth) for p, b in zip(psi, series.beta, strict=True)]
    )
    quarter_turns = errors[::90]
    assert np.all(np.diff(quarter_turns) <= 0.0)
    assert math.degrees(errors[-1]) < 0.1


@pytest.mark.unit
def test_state_dimension_mismatch_rejected() -> None:
    """Test a state of the wrong size is refused."""
    cfg = _config(1)

    with pytest.raises(ValidationError):
        ekf_step(EkfState.initial(cfg), Model3D(B, OMEGA), cfg, 0.0)


@pytest.mark.unit
def test_divergence_raises(mocker: MockerFixture) -> None:
    """Test a non-finite state raises a numerical error."""
    mocker.patch.object(Model2D, "f", return_value=np.array([np.nan]))
    cfg = _config(1)

    with pytest.raises(NumericalError, match="diverged"):
        ekf_step(EkfState.initial(cfg), Model2D(B, OMEGA), cfg, 0.01)


@pytest.mark.unit
def test_distance_estimate_is_clamped_positive() -> None:
    """Test an update driving D negative is clamped to the floor."""
    model = ModelDist(B)
    cfg = EkfConfig(
        process_noise=[0.01],
        sensor_noise=1e-6,
        substeps=10,
        sample_period=T_OUT,
        initial_state=[1.0],
        initial_covariance=[[25.0]],
    )

    after = ekf_step(EkfState.initial(cfg), model, cfg, 0.18, u=0.01)

    assert after.x_hat[0] == pytest.approx(0.05)


@pytest.mark.integration
def test_2d_filter_converges_in_plane() -> None:
    """Test the planar filter recovers the azimuth of a source at zero elevation."""
    source = SourceTruth.from_degrees(5.0, 0.0, 20.0)
    series = ideal_itd_series(source, SCHEDULE, B, 0.0, seed=0)
    model = Model2D(B, OMEGA)
    cfg = orientation_ekf_config(model, OrientationFilterSettings(), series)

    state = run_filter(model, cfg, series)

    phi_hat = wrap_angle(state.x_hat[0] + series.beta[-1])
    assert math.degrees(abs(wrap_angle(phi_hat - source.azimuth))) < 1.0
    assert len(state.history) == len(series)


@pytest.mark.integration
def test_3d_filter_converges_for_elevated_source() -> None:
    """Test the 3D filter recovers elevation and azimuth at 20 degrees elevation."""
    source = SourceTruth.from_degrees(5.0, 20.0, 20.0)
    series = ideal_itd_series(source, SCHEDULE, B, 0.0, seed=0)
    model = Model3D(B, OMEGA)
    cfg = orientation_ekf_config(model, OrientationFilterSettings(), series)

    state = run_filter(model, cfg, series)

    theta_hat, psi_hat = state.x_hat
    phi_hat = wrap_angle(psi_hat + series.beta[-1])
    assert math.degrees(abs(abs(theta_hat) - source.elevation)) < 1.0
    assert math.degrees(abs(wrap_angle(phi_hat - source.azimuth))) < 1.0


@pytest.mark.unit
def test_orientation_config_fixed_initial_guess() -> None:
    """Test the fixed guess is phi0 - beta0 advanced by one period."""
    series = ideal_itd_series(SourceTruth.from_degrees(5.0, 0.0, 0.0), SCHEDULE, B, 0.0, seed=0)
    model = Model3D(B, OMEGA)

    cfg = orientation_ekf_config(model, OrientationFilterSettings(initial_guess="fixed"), series)

    assert cfg.initial_state[0] == pytest.approx(math.radians(5.0))
    assert cfg.initial_state[1] == pytest.approx(math.radians(5.0) + OMEGA * T_OUT)
    assert cfg.sensor_noise == pytest.approx(1e-4)
    np.testing.assert_allclose(cfg.process_noise, [1e-4, 1e-4])


@pytest.mark.unit
def test_orientation_config_spectrum_initial_guess() -> None:
    """Test the default guess starts both angles at the rotation-frequency fit."""
    source = SourceTruth.from_degrees(5.0, 30.0, -120.0)
    series = ideal_itd_series(source, SCHEDULE, B, 0.0, seed=0)

    cfg3d = orientation_ekf_config(Model3D(B, OMEGA), OrientationFilterSettings(), series)
    cfg2d = orientation_ekf_config(Model2D(B, OMEGA), OrientationFilterSettings(), series)

    assert cfg3d.initial_state[0] == pytest.approx(math.radians(30.0), abs=1e-9)
    expected_psi = source.azimuth - series.beta[0] + OMEGA * T_OUT
    assert wrap_angle(cfg3d.initial_state[1] - expected_psi) == pytest.approx(0.0, abs=1e-9)
    assert wrap_angle(cfg2d.initial_state[0] - expected_psi) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.unit
def test_orientation_config_spectrum_guess_saturates_at_horizon() -> None:
    """Test an amplitude at or above the baseline starts the elevation at zero."""
    series = ideal_itd_series(SourceTruth.from_degrees(5.0, 0.0, 40.0), SCHEDULE, B, 0.0, seed=0)
    louder = series.model_copy(update={"d_measured": series.d_measured * 1.01})

    cfg = orientation_ekf_config(Model3D(B, OMEGA), OrientationFilterSettings(), louder)

    assert cfg.initial_state[0] == 0.0


@pytest.mark.integration
def test_distance_filter_converges() -> None:
    """Test the distance filter recovers 5 m from a facing translation."""
    source = SourceTruth.from_degrees(5.0, 20.0, 50.0)
    plan = TranslationPlan(step=0.0007, steps=200, beta=source.azimuth, sample_period=T_OUT)
    series = ideal_itd_series(source, plan, B, 0.0, seed=0)
    model = ModelDist(B)

    state = run_filter(model, distance_ekf_config(DistanceFilterSettings(), series), series)

    assert state.x_hat[0] == pytest.approx(5.0, abs=0.5)


@pytest.mark.unit
def test_distance_sign_flip_is_equivalent() -> None:
    """Test flipping the measurement sign with the data leaves the estimate unchanged."""
    source = SourceTruth.from_degrees(4.0, 0.0, 0.0)
    plan = TranslationPlan(step=0.0007, steps=50, beta=0.0, sample_period=T_OUT)
    series = ideal_itd_series(source, plan, B, 1e-4, seed=5)
    flipped = ItdSeries(
        kind="translation",
        beta=series.beta,
        offset=series.offset,
        d_measured=-series.d_measured,
        baseline=B,
        sample_period=T_OUT,
    )
    cfg = distance_ekf_config(DistanceFilterSettings(), series)

    plain = run_filter(ModelDist(B), cfg, series)
    mirrored = run_filter(ModelDist(B, sign=-1.0), cfg, flipped)

    np.testing.assert_allclose(plain.x_hat, mirrored.x_hat)


@pytest.mark.unit
def test_history_frame_columns() -> None:
    """Test history columns carry the pose, the state and its variances."""
    model = Model3D(B, OMEGA)
    cfg = _config(2)
    state = ekf_step(EkfState.initial(cfg), model, cfg, 0.01, pose=0.5)

    frame = history_frame(state, model)

    assert list(frame.columns) == [
        "step",
        "beta_rad",
        "measurement_m",
        "innovation_m",
        "theta_rad",
        "psi_rad",
        "var_theta_rad2",
        "var_psi_rad2",
    ]
    assert frame.loc[0, "beta_rad"] == 0.5


@pytest.mark.unit
def test_history_frame_distance_uses_offset() -> None:
    """Test distance histories are indexed by offset."""
    model = ModelDist(B)
    cfg = distance_ekf_config(
        DistanceFilterSettings(),
        ItdSeries(
            kind="translation",
            beta=[0.0],
            offset=[0.01],
            d_measured=[0.0],
            baseline=B,
            sample_period=T_OUT,
        ),
    )
    state = ekf_step(EkfState.initial(cfg), model, cfg, 0.0003, u=0.01, pose=0.01)

    frame = history_frame(state, model)

    assert "offset_m" in frame.columns
    assert "distance_m" in frame.columns
    assert "var_distance_m2" in frame.columns
