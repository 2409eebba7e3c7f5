"""Nonlinear observability analysis by stacked Lie-derivative gradients.

A model is locally observable at a state when the matrix whose rows are the
gradients of ``L_f^k h`` for ``k = 0 .. rows-1`` has full column rank.
"""

import itertools
import logging
import math
from collections.abc import Callable

import numpy as np
import pandas as pd

from app.core.constants import ObservabilityConstants
from app.core.exceptions import ValidationError
from app.schemas.observability import ObservabilityCell, ObservabilityReport
from app.schemas.run_config import ModelId, ObservabilitySettings
from app.services.estimation_service import (
    AzimuthSubsystem,
    ElevationSubsystem,
    Model2D,
    Model3D,
    ModelDist,
    StateModel,
)

logger = logging.getLogger(__name__)


def _numeric_gradient(
    fn: Callable[[np.ndarray], float], x: np.ndarray, step: float
) -> np.ndarray:
    gradient = np.empty(x.size)
    for i in range(x.size):
        offset = np.zeros(x.size)
        offset[i] = step
        gradient[i] = (fn(x + offset) - fn(x - offset)) / (2.0 * step)
    return gradient


def numeric_lie_gradients(
    model: StateModel,
    x: np.ndarray,
    rows: int,
    u: float | None = None,
    step: float = ObservabilityConstants.LIE_STEP,
) -> np.ndarray:
    """Gradients of successive Lie derivatives by nested central differences."""

    def lie(order: int) -> Callable[[np.ndarray], float]:
        if order == 0:
            return lambda z: model.h(z, u)
        previous = lie(order - 1)
        return lambda z: float(_numeric_gradient(previous, z, step) @ model.f(z, u))

    return np.vstack([_numeric_gradient(lie(k), x, step) for k in range(rows)])


def lie_observability_matrix(
    model: StateModel,
    x: np.ndarray,
    rows: int,
    u: float | None = None,
    method: str = "analytic",
) -> np.ndarray:
    """
    Stack the gradients of ``L_f^k h`` for ``k < rows``.

    Args:
        model: State model
        x: Evaluation state
        rows: Number of Lie derivatives, at least the state dimension
        u: Known model input (the translation for the distance model)
        method: "analytic" uses closed-form rows when the model has them;
            "numeric" always differentiates numerically

    Returns:
        Matrix of shape (rows, state dimension)

    Raises:
        ValidationError: If rows is below the state dimension or the model is
            undefined at ``x``
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if rows < model.dim:
        raise ValidationError(f"Need at least {model.dim} rows, got {rows}")
    model.validate_state(x, u)
    if method == "analytic":
        gradients = model.lie_gradients(x, rows, u)
        if gradients is not None:
            return gradients
    return numeric_lie_gradients(model, x, rows, u)


def det_omega_3d(theta: float, psi: float, b: float, omega: float) -> float:
    """Determinant of the first two rows of the 3D matrix: ``-b^2 omega sin(theta) cos(theta)``."""
    return -(b**2) * omega * math.sin(theta) * math.cos(theta)


def rank_diagnostics(
    matrix: np.ndarray, scale: float, tolerance: float
) -> tuple[int, float, float]:
    """
    Numeric rank with singular values judged against ``tolerance * max(sigma_max, scale)``.

    The model scale keeps an all-but-vanishing matrix from counting as full rank.

    Returns:
        Tuple of (rank, sigma_min, sigma_max)
    """
    sigma = np.linalg.svd(matrix, compute_uv=False)
    sigma_max = float(sigma.max()) if sigma.size else 0.0
    sigma_min = float(sigma.min()) if sigma.size == matrix.shape[1] else 0.0
    cutoff = tolerance * max(sigma_max, scale)
    return int(np.sum(sigma > cutoff)), sigma_min, sigma_max


def _cells(
    model_id: ModelId, settings: ObservabilitySettings, b: float, omega: float
) -> list[tuple[dict[str, float], StateModel, np.ndarray, float | None]]:
    elevations = [math.radians(e) for e in settings.elevations_deg]
    psis = [math.radians(p) for p in settings.psis_deg]
    cells: list[tuple[dict[str, float], StateModel, np.ndarray, float | None]] = []
    if model_id == "2d":
        model: StateModel = Model2D(b, omega)
        for psi in psis:
            cells.append(({"psi_deg": math.degrees(psi)}, model, np.array([psi]), None))
    elif model_id == "3d":
        model = Model3D(b, omega)
        for theta, psi in itertools.product(elevations, psis):
            coordinates = {"theta_deg": math.degrees(theta), "psi_deg": math.degrees(psi)}
            cells.append((coordinates, model, np.array([theta, psi]), None))
    elif model_id == "azimuth":
        for theta, psi in itertools.product(elevations, psis):
            coordinates = {"theta_deg": math.degrees(theta), "psi_deg": math.degrees(psi)}
            cells.append((coordinates, AzimuthSubsystem(b, omega, theta), np.array([psi]), None))
    elif model_id == "elevation":
        for theta, psi in itertools.product(elevations, psis):
            coordinates = {"theta_deg": math.degrees(theta), "psi_deg": math.degrees(psi)}
            cells.append((coordinates, ElevationSubsystem(b, psi), np.array([theta]), None))
    else:
        model = ModelDist(b)
        for distance, offset in itertools.product(settings.distances_m, settings.offsets_m):
            coordinates = {"distance_m": distance, "offset_m": offset}
            cells.append((coordinates, model, np.array([distance]), offset))
    return cells


def singularity_sweep(
    model_id: ModelId,
    settings: ObservabilitySettings,
    b: float,
    omega: float,
) -> ObservabilityReport:
    """
    Evaluate observability rank over a state grid and flag singular cells.

    States where the model is undefined count as singular with rank 0.

    Args:
        model_id: Which model to sweep
        settings: Grid and tolerance
        b: Baseline in meters
        omega: Rotation rate in rad/s

    Returns:
        Report with one cell per grid point
    """
    cells = _cells(model_id, settings, b, omega)
    dimension = cells[0][1].dim if cells else 1
    rows = settings.rows or dimension
    results = []
    for coordinates, model, x, u in cells:
        try:
            matrix = lie_observability_matrix(model, x, rows, u)
        except ValidationError:
            results.append(
                ObservabilityCell(
                    coordinates=coordinates, rank=0, sigma_min=0.0, sigma_max=0.0, singular=True
                )
            )
            continue
        rank, sigma_min, sigma_max = rank_diagnostics(matrix, model.scale, settings.tolerance)
        results.append(
            ObservabilityCell(
                coordinates=coordinates,
                rank=rank,
                sigma_min=sigma_min,
                sigma_max=sigma_max,
                singular=rank < model.dim,
            )
        )
    report = ObservabilityReport(
        model=model_id,
        state_dimension=dimension,
        rows=rows,
        tolerance=settings.tolerance,
        cells=results,
    )
    logger.info(f"Observability sweep of {model_id}: {report.singular_count}/{len(results)} singular")
    return report


def report_frame(report: ObservabilityReport) -> pd.DataFrame:
    """Grid as a DataFrame: coordinate columns, rank, sigma_min, sigma_max, singular."""
    return pd.DataFrame.from_records(
        [
            {
                **cell.coordinates,
                "rank": cell.rank,
                "sigma_min": cell.sigma_min,
                "sigma_max": cell.sigma_max,
                "singular": cell.singular,
            }
            for cell in report.cells
        ]
    )
