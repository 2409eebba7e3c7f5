"""Cross-correlation delay estimation schemas."""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.constants import GccConstants, SignalConstants

Weighting = Literal["none", "phat", "auto"]
Subsample = Literal["off", "parabolic"]


class GccConfig(BaseModel):
    """Generalized cross-correlation settings.

    ``max_lag_s`` of None means ``MAX_LAG_MARGIN * b / c0`` for the array in use.
    ``auto`` weighting applies PHAT to spectrally coloured frames only.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    weighting: Weighting = "auto"
    max_lag_s: float | None = Field(None, gt=0)
    subsample: Subsample = "off"
    energy_floor: float = Field(SignalConstants.ENERGY_FLOOR, ge=0)
    max_lag_margin: float = Field(GccConstants.MAX_LAG_MARGIN, ge=1)


class CrossCorrelation(BaseModel):
    """Correlation over integer lags; positive lag means channel 2 lags channel 1."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    lags: np.ndarray
    values: np.ndarray
    sample_rate_hz: int = Field(..., gt=0)
    weighting: Literal["none", "phat"]
