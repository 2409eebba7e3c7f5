"""Extended Kalman filter schemas."""

from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class EkfConfig(BaseModel):
    """Noise model, discretization and initialization of one filter run."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    process_noise: np.ndarray  # Q, per-state variances on the diagonal
    sensor_noise: float = Field(..., gt=0)  # R
    substeps: int = Field(..., ge=1)  # N
    sample_period: float = Field(..., gt=0)  # T_out
    initial_state: np.ndarray
    initial_covariance: np.ndarray

    @field_validator("process_noise", "initial_state", mode="before")
    @classmethod
    def coerce_vector(cls, v: Any) -> np.ndarray:
        return np.atleast_1d(np.asarray(v, dtype=float))

    @field_validator("initial_covariance", mode="before")
    @classmethod
    def coerce_matrix(cls, v: Any) -> np.ndarray:
        return np.atleast_2d(np.asarray(v, dtype=float))

    @model_validator(mode="after")
    def validate_shapes(self) -> "EkfConfig":
        """Validate dimensions agree and Q, P0 are symmetric positive semidefinite."""
        n = self.initial_state.size
        if self.process_noise.shape != (n,):
            raise ValueError("process_noise must hold one variance per state")
        if self.initial_covariance.shape != (n, n):
            raise ValueError("initial_covariance must be n x n")
        if np.any(self.process_noise < 0):
            raise ValueError("Process noise variances must be non-negative")
        P = self.initial_covariance
        if not np.allclose(P, P.T):
            raise ValueError("initial_covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(P)) < -1e-12:
            raise ValueError("initial_covariance must be positive semidefinite")
        return self

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.process_noise)


@dataclass(frozen=True, slots=True)
class EkfRecord:
    """One predict+update cycle as written to the history CSV."""

    step: int
    pose: float  # beta (rad) for orientation runs, offset (m) for distance runs
    measurement: float  # NaN when the frame carried no signal
    innovation: float
    state: tuple[float, ...]
    covariance_diag: tuple[float, ...]


class EkfState(BaseModel):
    """Current estimate and covariance of one filter run.

    Every step returns a new state whose ``history`` extends the previous one
    by a record; earlier states keep their own list.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    x_hat: np.ndarray
    P: np.ndarray
    step: int = 0
    history: list[EkfRecord] = Field(default_factory=list)

    @classmethod
    def initial(cls, config: EkfConfig) -> "EkfState":
        return cls(x_hat=config.initial_state.copy(), P=config.initial_covariance.copy())
