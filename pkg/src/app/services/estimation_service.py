"""Continuous-discrete extended Kalman filtering of path-difference series.

Each filter cycle integrates the process model over ``N`` Euler substeps of one
output period, propagating the covariance alongside, then applies a scalar
measurement update. State models bind the filter to a geometry:

- ``Model2D``: state ``[psi]``, source in the array plane
- ``Model3D``: state ``[theta, psi]``
- ``AzimuthSubsystem``: state ``[psi]`` with a known elevation
- ``ElevationSubsystem``: state ``[theta]`` with a known, fixed ``psi``
- ``ModelDist``: state ``[D]`` with the cumulative translation as input
"""

import logging
import math
from abc import ABC, abstractmethod

import numpy as np
import pandas as pd

from app.core.constants import EkfConstants
from app.core.exceptions import NumericalError, ValidationError
from app.schemas.acoustics import ItdSeries
from app.schemas.estimation import EkfConfig, EkfRecord, EkfState
from app.schemas.run_config import DistanceFilterSettings, OrientationFilterSettings
from app.services.detector_service import rotation_fit

logger = logging.getLogger(__name__)


class StateModel(ABC):
    """
    Process and measurement model of one filter.

    Subclasses provide ``f``, ``h`` and their analytic Jacobians. Lie-derivative
    gradients are analytic where the model has a closed form and otherwise
    computed numerically by the observability service.

    Attributes:
        name: Short identifier used in reports
        state_labels: Column names of the state vector, with units
    """

    name: str
    state_labels: tuple[str, ...]

    def __init__(self, b: float) -> None:
        if b <= 0:
            raise ValidationError(f"Baseline must be positive, got {b}")
        self.b = b

    @property
    def dim(self) -> int:
        return len(self.state_labels)

    @property
    def scale(self) -> float:
        """Magnitude of the measurement, used to judge singular values."""
        return self.b

    @abstractmethod
    def f(self, x: np.ndarray, u: float | None = None) -> np.ndarray: ...

    @abstractmethod
    def h(self, x: np.ndarray, u: float | None = None) -> float: ...

    @abstractmethod
    def measurement_jacobian(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        """Row vector ``C_J = dh/dx``."""

    def process_jacobian(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        """``A_J = df/dx``; zero for every model with a constant drift."""
        return np.zeros((self.dim, self.dim))

    def lie_gradients(self, x: np.ndarray, rows: int, u: float | None = None) -> np.ndarray | None:
        """Stacked gradients of ``L_f^k h`` for ``k < rows``, or None if not closed-form."""
        return None

    def validate_state(self, x: np.ndarray, u: float | None = None) -> None:
        """Reject states where the model is undefined."""
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            raise ValidationError(f"{self.name}: state {x} is not a finite {self.dim}-vector")

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return x

    def input_at(self, series: ItdSeries, index: int) -> float | None:
        """Known input of the measurement at ``index``."""
        return None

    def pose_at(self, series: ItdSeries, index: int) -> float:
        return float(series.beta[index])


class Model2D(StateModel):
    """Source in the array plane: ``psi' = -omega``, ``y = b sin(psi)``."""

    name = "2d"
    state_labels = ("psi_rad",)

    def __init__(self, b: float, omega: float) -> None:
        super().__init__(b)
        self.omega = omega

    def f(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return np.array([-self.omega])

    def h(self, x: np.ndarray, u: float | None = None) -> float:
        return self.b * math.sin(x[0])

    def measurement_jacobian(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return np.array([self.b * math.cos(x[0])])

    def lie_gradients(self, x: np.ndarray, rows: int, u: float | None = None) -> np.ndarray:
        # L^k h = b (-omega)^k sin(psi + k pi/2)
        k = np.arange(rows)
        return (self.b * (-self.omega) ** k * np.cos(x[0] + k * math.pi / 2))[:, None]


class Model3D(StateModel):
    """Elevated source: ``theta' = 0``, ``psi' = -omega``, ``y = b cos(theta) sin(psi)``."""

    name = "3d"
    state_labels = ("theta_rad", "psi_rad")

    def __init__(self, b: float, omega: float) -> None:
        super().__init__(b)
        self.omega = omega

    def f(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return np.array([0.0, -self.omega])

    def h(self, x: np.ndarray, u: float | None = None) -> float:
        return self.b * math.cos(x[0]) * math.sin(x[1])

    def measurement_jacobian(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return model3d_jacobians(x, self.b)

    def lie_gradients(self, x: np.ndarray, rows: int, u: float | None = None) -> np.ndarray:
        # L^k h = b (-omega)^k cos(theta) sin(psi + k pi/2)
        theta, psi = x
        k = np.arange(rows)
        gain = self.b * (-self.omega) ** k
        phase = psi + k * math.pi / 2
        return np.column_stack(
            (-gain * math.sin(theta) * np.sin(phase), gain * math.cos(theta) * np.cos(phase))
        )


class AzimuthSubsystem(StateModel):
    """Azimuth-only filter for a known elevation."""

    name = "azimuth"
    state_labels = ("psi_rad",)

    def __init__(self, b: float, omega: float, theta: float) -> None:
        super().__init__(b)
        self.omega = omega
        self.theta = theta

    def f(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return np.array([-self.omega])

    def h(self, x: np.ndarray, u: float | None = None) -> float:
        return self.b * math.cos(self.theta) * math.sin(x[0])

    def measurement_jacobian(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return np.array([self.b * math.cos(self.theta) * math.cos(x[0])])

    def lie_gradients(self, x: np.ndarray, rows: int, u: float | None = None) -> np.ndarray:
        k = np.arange(rows)
        gain = self.b * math.cos(self.theta) * (-self.omega) ** k
        return (gain * np.cos(x[0] + k * math.pi / 2))[:, None]


class ElevationSubsystem(StateModel):
    """Elevation-only filter for a known array-relative azimuth held fixed."""

    name = "elevation"
    state_labels = ("theta_rad",)

    def __init__(self, b: float, psi: float) -> None:
        super().__init__(b)
        self.psi = psi

    def f(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return np.zeros(1)

    def h(self, x: np.ndarray, u: float | None = None) -> float:
        return self.b * math.cos(x[0]) * math.sin(self.psi)

    def measurement_jacobian(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return np.array([-self.b * math.sin(x[0]) * math.sin(self.psi)])

    def lie_gradients(self, x: np.ndarray, rows: int, u: float | None = None) -> np.ndarray:
        gradients = np.zeros((rows, 1))
        gradients[0] = self.measurement_jacobian(x)
        return gradients


class ModelDist(StateModel):
    """
    Distance filter for an array facing the source and translating along its axis.

    ``y = sign * b * dd / sqrt(dd^2 + D^2)`` with the cumulative translation
    ``dd`` as a known input. ``sign`` flips the measurement convention.
    """

    name = "distance"
    state_labels = ("distance_m",)

    def __init__(
        self,
        b: float,
        sign: float = 1.0,
        min_distance: float = EkfConstants.MIN_DISTANCE_M,
    ) -> None:
        super().__init__(b)
        if sign not in (1.0, -1.0):
            raise ValidationError("Measurement sign must be +1 or -1")
        self.sign = sign
        self.min_distance = min_distance

    def _delta(self, u: float | None) -> float:
        if u is None:
            raise ValidationError("Distance model needs the cumulative translation as input")
        return u

    def f(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return np.zeros(1)

    def h(self, x: np.ndarray, u: float | None = None) -> float:
        delta = self._delta(u)
        return self.sign * self.b * delta / math.hypot(delta, x[0])

    def measurement_jacobian(self, x: np.ndarray, u: float | None = None) -> np.ndarray:
        return np.array([self.sign * modeldist_jacobian(x[0], self._delta(u), self.b)])

    def lie_gradients(self, x: np.ndarray, rows: int, u: float | None = None) -> np.ndarray:
        gradients = np.zeros((rows, 1))
        gradients[0] = self.measurement_jacobian(x, u)
        return gradients

    def validate_state(self, x: np.ndarray, u: float | None = None) -> None:
        super().validate_state(x, u)
        if math.hypot(self._delta(u), x[0]) == 0.0:
            raise ValidationError("Distance model undefined at D = 0 with no translation")

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, self.min_distance)

    def input_at(self, series: ItdSeries, index: int) -> float:
        return float(series.offset[index])

    def pose_at(self, series: ItdSeries, index: int) -> float:
        return float(series.offset[index])


def model3d_jacobians(x: np.ndarray, b: float) -> np.ndarray:
    """
    Measurement Jacobian of the 3D model, ``[-b sin(theta) sin(psi), b cos(theta) cos(psi)]``.

    The process Jacobian is identically zero because the drift does not depend
    on the state.

    Example:
        >>> model3d_jacobians(np.radians([45.0, 45.0]), 0.18)
        array([-0.09,  0.09])
    """
    if b <= 0:
        raise ValidationError(f"Baseline must be positive, got {b}")
    theta, psi = float(x[0]), float(x[1])
    return np.array(
        [-b * math.sin(theta) * math.sin(psi), b * math.cos(theta) * math.cos(psi)]
    )


def modeldist_jacobian(D: float, delta_d: float, b: float) -> float:
    """``dy/dD = -b dd D / (dd^2 + D^2)^(3/2)``; never positive for positive arguments."""
    if D <= 0:
        raise ValidationError(f"Distance must be positive, got {D}")
    if delta_d < 0:
        raise ValidationError(f"Translation must be non-negative, got {delta_d}")
    return -b * delta_d * D / (delta_d**2 + D**2) ** 1.5


def ekf_step(
    state: EkfState,
    model: StateModel,
    cfg: EkfConfig,
    measurement: float | None,
    u: float | None = None,
    pose: float = math.nan,
) -> EkfState:
    """
    One predict (N substeps) and update cycle.

    A missing measurement (None or NaN) skips the update so the filter only
    predicts through frames that carried no signal.

    Args:
        state: Estimate before the cycle
        model: Process and measurement model
        cfg: Noise and discretization settings
        measurement: Path difference in meters, or None
        u: Known model input at the measurement time
        pose: Heading or offset recorded with the history entry

    Returns:
        Estimate after the cycle, with one more history record; ``state`` is not modified

    Raises:
        NumericalError: If the state or covariance becomes non-finite
    """
    n = model.dim
    if state.x_hat.shape != (n,) or state.P.shape != (n, n):
        raise ValidationError(f"State dimensions do not match model {model.name}")

    x = state.x_hat.astype(float, copy=True)
    P = state.P.astype(float, copy=True)
    Q = cfg.Q
    dt = cfg.sample_period / cfg.substeps
    for _ in range(cfg.substeps):
        A = model.process_jacobian(x, u)
        x = x + dt * model.f(x, u)
        P = P + dt * (A @ P + P @ A.T + Q)

    innovation = math.nan
    if measurement is not None and math.isfinite(measurement):
        C = model.measurement_jacobian(x, u).reshape(1, n)
        innovation = measurement - model.h(x, u)
        S = cfg.sensor_noise + (C @ P @ C.T).item()
        K = (P @ C.T) / S
        x = x + K[:, 0] * innovation
        I_KC = np.eye(n) - K @ C
        # Joseph form keeps P symmetric positive semidefinite
        P = I_KC @ P @ I_KC.T + cfg.sensor_noise * (K @ K.T)

    P = 0.5 * (P + P.T)
    x = model.normalize(x)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
        raise NumericalError(
            f"{model.name} filter diverged at step {state.step}: x={x}, P diagonal={np.diag(P)}"
        )

    record = EkfRecord(
        step=state.step,
        pose=pose,
        measurement=math.nan if measurement is None else float(measurement),
        innovation=float(innovation),
        state=tuple(float(v) for v in x),
        covariance_diag=tuple(float(v) for v in np.diag(P)),
    )
    return EkfState(x_hat=x, P=P, step=state.step + 1, history=[*state.history, record])


def run_filter(model: StateModel, cfg: EkfConfig, series: ItdSeries) -> EkfState:
    """
    Filter a whole series, one cycle per sample; NaN samples are predicted through.

    Raises:
        NumericalError: If the filter diverges
    """
    state = EkfState.initial(cfg)
    for index in range(len(series)):
        value = float(series.d_measured[index])
        state = ekf_step(
            state,
            model,
            cfg,
            None if math.isnan(value) else value,
            u=model.input_at(series, index),
            pose=model.pose_at(series, index),
        )
    logger.debug(f"{model.name} filter finished after {state.step} steps: x={state.x_hat}")
    return state


def orientation_ekf_config(
    model: Model2D | Model3D,
    settings: OrientationFilterSettings,
    series: ItdSeries,
) -> EkfConfig:
    """
    Initial estimate and noise for an orientation filter over ``series``.

    With the ``spectrum`` guess the filter starts from the rotation-frequency fit
    of the series: azimuth from its phase and elevation from ``arccos(A / b)``.
    The azimuth guess is expressed as ``psi = phi0 - beta0`` and advanced by one
    period backwards, so the first prediction lands on the first sample.
    """
    period = series.sample_period
    if settings.initial_guess == "spectrum":
        amplitude, azimuth = rotation_fit(series)
        elevation = math.acos(min(1.0, amplitude / series.baseline))
    else:
        azimuth = math.radians(settings.initial_azimuth_deg)
        elevation = math.radians(settings.initial_elevation_deg)
    psi0 = azimuth - float(series.beta[0]) + model.omega * period
    angle_var = math.radians(settings.initial_angle_std_deg) ** 2
    q = settings.process_sigma**2
    if isinstance(model, Model3D):
        initial_state = [elevation, psi0]
    else:
        initial_state = [psi0]
    n = len(initial_state)
    return EkfConfig(
        process_noise=[q] * n,
        sensor_noise=settings.sensor_sigma**2,
        substeps=settings.substeps,
        sample_period=period,
        initial_state=initial_state,
        initial_covariance=np.eye(n) * angle_var,
    )


def distance_ekf_config(settings: DistanceFilterSettings, series: ItdSeries) -> EkfConfig:
    """Initial estimate and noise for the distance filter over ``series``."""
    return EkfConfig(
        process_noise=[settings.process_sigma**2],
        sensor_noise=settings.sensor_sigma**2,
        substeps=settings.substeps,
        sample_period=series.sample_period,
        initial_state=[settings.initial_distance_m],
        initial_covariance=[[settings.initial_distance_std_m**2]],
    )


def history_frame(state: EkfState, model: StateModel) -> pd.DataFrame:
    """
    Per-step history as a DataFrame with unit-annotated columns.

    Columns: step, beta_rad or offset_m, measurement_m, innovation_m, one column
    per state and one ``var_*`` column per covariance diagonal entry.
    """
    pose_column = "offset_m" if isinstance(model, ModelDist) else "beta_rad"
    variance_labels = [f"var_{label}2" for label in model.state_labels]
    records = [
        {
            "step": r.step,
            pose_column: r.pose,
            "measurement_m": r.measurement,
            "innovation_m": r.innovation,
            **dict(zip(model.state_labels, r.state, strict=True)),
            **dict(zip(variance_labels, r.covariance_diag, strict=True)),
        }
        for r in state.history
    ]
    columns = ["step", pose_column, "measurement_m", "innovation_m"]
    return pd.DataFrame.from_records(
        records, columns=[*columns, *model.state_labels, *variance_labels]
    )
