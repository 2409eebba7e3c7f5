"""Complete localization: orientation decision flow, facing, translation and distance.

The orientation flow is:

1. If the rotation-frequency amplitude of the ITD series is below
   ``d_threshold``, the source is overhead: elevation 90 deg, azimuth undefined.
2. Otherwise the series is filtered by the 2D and 3D models and the RMSE
   between their azimuth tracks is computed over the trailing revolutions.
3. Below ``rmse_threshold`` the source is near the horizon: elevation comes
   from the calibration curve, azimuth from the 2D filter.
4. Otherwise both angles come from the 3D filter.

Distance localization faces the array toward the source, optionally refines
the facing with quadrature measurements, translates the array step by step and
filters the resulting series with the distance model.
"""

import logging
import math
from collections.abc import Callable

import numpy as np

from app.core.exceptions import (
    ConfigurationError,
    NonConvergenceError,
    ValidationError,
)
from app.schemas.acoustics import ItdSeries, SeriesKind
from app.schemas.detectors import RmseCalibrationCurve
from app.schemas.geometry import ArrayPose, SourceTruth
from app.schemas.pipeline import (
    Branch,
    DistanceEstimate,
    FacingResult,
    LocalizationVerdict,
    OrientationDiagnostics,
    OrientationTraces,
)
from app.schemas.run_config import RunConfig
from app.services.acoustics_service import ideal_itd_series, synthesize_pair
from app.services.detector_service import (
    azimuth_rmse,
    detect_ninety_deg,
    elevation_from_rmse,
    fit_rmse_curve,
    itd_amplitude_spectrum,
    rotation_peak,
)
from app.services.estimation_service import (
    EkfState,
    Model2D,
    Model3D,
    ModelDist,
    distance_ekf_config,
    orientation_ekf_config,
    run_filter,
)
from app.services.geometry_service import (
    canonical_orientation,
    far_field_path_difference,
    wrap_angle,
    wrap_angles,
)
from app.services.itd_service import (
    estimate_itd,
    frame_has_signal,
    itd_to_path_difference,
    resolve_max_lag,
    series_from_recording,
)

logger = logging.getLogger(__name__)

StaticMeasurement = Callable[[float, int], float]


def derive_seed(*keys: int) -> int:
    """Deterministic child seed independent of scheduling order; negative keys stay distinct."""
    return int(np.random.SeedSequence([int(k) % 2**32 for k in keys]).generate_state(1)[0])


def circular_mean(angles: np.ndarray) -> float:
    return float(np.angle(np.mean(np.exp(1j * np.asarray(angles)))))


def circular_std_deg(angles: np.ndarray) -> float:
    resultant = float(np.abs(np.mean(np.exp(1j * np.asarray(angles)))))
    return math.degrees(math.sqrt(max(-2.0 * math.log(max(resultant, 1e-300)), 0.0)))


class SimulatedScene:
    """
    Measurement source for one simulated source location.

    Produces the rotation series, the translation series for a commanded
    heading, and averaged static measurements, in either ideal-ITD or audio mode.
    Every measurement draws from its own seed derived from ``seed``.
    """

    def __init__(self, config: RunConfig, source: SourceTruth, seed: int) -> None:
        self.config = config
        self.source = source
        self.seed = seed
        self._static_count = 0

    @property
    def baseline(self) -> float:
        return self.config.array.baseline_m

    def rotation_series(self) -> ItdSeries:
        schedule = self.config.array.rotation_schedule()
        seed = derive_seed(self.seed, 1)
        if self.config.mode == "ideal_itd":
            return ideal_itd_series(
                self.source, schedule, self.baseline, self.config.noise.orientation_sigma_m, seed
            )
        poses = [ArrayPose(beta=float(b), baseline=self.baseline) for b in schedule.betas()]
        return self._audio_series(poses, "rotation", schedule.sample_period, schedule.omega, seed)

    def translation_series(self, beta: float) -> ItdSeries:
        plan = self.config.array.translation_plan(beta)
        seed = derive_seed(self.seed, 2)
        if self.config.mode == "ideal_itd":
            return ideal_itd_series(
                self.source, plan, self.baseline, self.config.noise.distance_sigma_m, seed
            )
        poses = [
            ArrayPose(beta=beta, offset=float(o), baseline=self.baseline) for o in plan.offsets()
        ]
        return self._audio_series(poses, "translation", plan.sample_period, 0.0, seed)

    def measure_static(self, beta: float, count: int) -> float:
        """Mean path difference over ``count`` static measurements at heading ``beta``."""
        self._static_count += 1
        seed = derive_seed(self.seed, 3, self._static_count)
        pose = ArrayPose(beta=beta, baseline=self.baseline)
        if self.config.mode == "ideal_itd":
            rng = np.random.default_rng(seed)
            clean = far_field_path_difference(self.source, pose)
            sigma = self.config.noise.distance_sigma_m
            return float(np.mean(clean + rng.normal(0.0, sigma, count))) if sigma else clean
        period = self.config.array.rotation_schedule().sample_period
        recording = synthesize_pair(
            self.config.room, self.source, [pose] * count, period, self.config.signal, seed
        )
        c0 = self.config.room.sound_speed_m_s
        max_lag = resolve_max_lag(self.config.gcc, self.baseline, c0)
        values = []
        for index in range(count):
            frame1, frame2 = recording.frame(index)
            if frame_has_signal(frame1, frame2, self.config.gcc):
                t_hat = estimate_itd(
                    frame1, frame2, self.config.gcc, recording.sample_rate_hz, max_lag
                )
                values.append(itd_to_path_difference(t_hat, c0))
        return float(np.mean(values)) if values else 0.0

    def _audio_series(
        self,
        poses: list[ArrayPose],
        kind: SeriesKind,
        period: float,
        omega: float,
        seed: int,
    ) -> ItdSeries:
        recording = synthesize_pair(
            self.config.room, self.source, poses, period, self.config.signal, seed
        )
        return series_from_recording(
            recording,
            poses,
            self.config.gcc,
            self.config.room.sound_speed_m_s,
            kind,
            period,
            omega,
        )


def orientation_tracks(
    config: RunConfig, series: ItdSeries
) -> tuple[OrientationTraces, EkfState, EkfState]:
    """
    Run both orientation filters and convert their states to azimuth tracks.

    The 3D state is folded onto elevation in [0, 90] deg sample by sample.
    """
    if series.kind != "rotation":
        raise ValidationError("Orientation localization needs a rotation series")
    settings = config.ekf.orientation
    model2d = Model2D(series.baseline, series.omega)
    model3d = Model3D(series.baseline, series.omega)
    state2d = run_filter(model2d, orientation_ekf_config(model2d, settings, series), series)
    state3d = run_filter(model3d, orientation_ekf_config(model3d, settings, series), series)

    psi2d = np.array([r.state[0] for r in state2d.history])
    azimuth2d = wrap_angles(psi2d + series.beta)
    folded = [canonical_orientation(r.state[0], r.state[1]) for r in state3d.history]
    elevation3d = np.array([theta for theta, _ in folded])
    azimuth3d = wrap_angles(np.array([psi for _, psi in folded]) + series.beta)
    traces = OrientationTraces(
        beta_deg=np.degrees(series.beta),
        azimuth_2d_deg=np.degrees(azimuth2d),
        azimuth_3d_deg=np.degrees(azimuth3d),
        elevation_3d_deg=np.degrees(elevation3d),
        history_2d=state2d.history,
        history_3d=state3d.history,
    )
    return traces, state2d, state3d


def _samples_per_revolution(series: ItdSeries) -> int:
    return max(1, int(round(2.0 * math.pi / (series.omega * series.sample_period))))


def trailing_rmse(config: RunConfig, series: ItdSeries, traces: OrientationTraces) -> float:
    """RMSE between the 2D and 3D azimuth tracks over the trailing revolutions."""
    assert traces.azimuth_2d_deg is not None and traces.azimuth_3d_deg is not None
    window = min(len(series), config.pipeline.rmse_revolutions * _samples_per_revolution(series))
    return azimuth_rmse(
        np.radians(traces.azimuth_2d_deg[-window:]), np.radians(traces.azimuth_3d_deg[-window:])
    )


def localize_orientation(
    config: RunConfig,
    series: ItdSeries,
    curve: RmseCalibrationCurve | None = None,
) -> LocalizationVerdict:
    """
    Decide the source orientation from one complete rotation series.

    Args:
        config: Run configuration (filters, thresholds, pipeline settings)
        series: Rotation series of at least one revolution
        curve: Calibration curve for the near-horizon branch

    Returns:
        Verdict with the branch taken, estimates and diagnostics

    Raises:
        ConfigurationError: If the near-horizon branch fires without a curve
    """
    thresholds = config.thresholds.resolve(series.baseline, curve)
    spectrum = itd_amplitude_spectrum(series)
    peak = rotation_peak(spectrum, series.omega)
    absent = int(series.absent.sum())

    if detect_ninety_deg(spectrum, thresholds, series.omega):
        logger.info(f"Rotation amplitude {peak:.4f} m below {thresholds.d_threshold:.4f} m: overhead")
        return LocalizationVerdict(
            branch="ninety_deg",
            azimuth_deg=None,
            elevation_deg=90.0,
            diagnostics=OrientationDiagnostics(
                amplitude_peak_m=peak, d_threshold_m=thresholds.d_threshold, absent_frames=absent
            ),
            traces=OrientationTraces(beta_deg=np.degrees(series.beta)),
        )

    traces, _, _ = orientation_tracks(config, series)
    assert traces.azimuth_2d_deg is not None
    assert traces.azimuth_3d_deg is not None and traces.elevation_3d_deg is not None
    rmse = trailing_rmse(config, series, traces)
    last = _samples_per_revolution(series)
    diagnostics = OrientationDiagnostics(
        amplitude_peak_m=peak,
        d_threshold_m=thresholds.d_threshold,
        rmse_deg=rmse,
        rmse_threshold_deg=thresholds.rmse_threshold,
        absent_frames=absent,
    )

    if rmse < thresholds.rmse_threshold:
        if curve is None:
            raise ConfigurationError(
                f"RMSE {rmse:.2f} deg is below {thresholds.rmse_threshold:.2f} deg but no "
                "calibration curve is loaded; run the 'calibrate' command first"
            )
        lookup = elevation_from_rmse(curve, rmse)
        azimuth_track = np.radians(traces.azimuth_2d_deg[-last:])
        branch: Branch = "curve_fit"
        elevation = lookup.elevation_deg
        diagnostics.curve_clamped = lookup.clamped
    else:
        azimuth_track = np.radians(traces.azimuth_3d_deg[-last:])
        branch = "full_3d"
        elevation = float(np.mean(traces.elevation_3d_deg[-last:]))
        diagnostics.elevation_spread_deg = float(np.std(traces.elevation_3d_deg[-last:]))

    spread = circular_std_deg(azimuth_track)
    diagnostics.azimuth_spread_deg = spread
    diagnostics.converged = spread < config.pipeline.convergence_gate_deg
    azimuth = math.degrees(wrap_angle(circular_mean(azimuth_track)))
    logger.info(
        f"Branch {branch}: azimuth {azimuth:.2f} deg, elevation {elevation:.2f} deg, "
        f"RMSE {rmse:.3f} deg"
    )
    return LocalizationVerdict(
        branch=branch,
        azimuth_deg=azimuth,
        elevation_deg=elevation,
        diagnostics=diagnostics,
        traces=traces,
    )


def face_source(verdict: LocalizationVerdict, bypass: bool = True) -> FacingResult:
    """
    Heading that puts the source broadside (``psi = 0``).

    An overhead source has no azimuth; with ``bypass`` the current heading is
    kept since every heading is perpendicular to it.
    """
    if verdict.azimuth_deg is None:
        if not bypass:
            raise ValidationError("Azimuth is undefined and the overhead bypass is disabled")
        return FacingResult(beta=0.0, bypass=True)
    return FacingResult(beta=math.radians(verdict.azimuth_deg))


def regulate_facing(
    measure: StaticMeasurement, beta: float, samples: int, iterations: int
) -> tuple[float, float]:
    """
    Refine a heading with quadrature measurements.

    At heading ``beta`` the mean path difference is ``A sin(psi)`` and at
    ``beta + 90 deg`` it is ``-A cos(psi)``, so the residual is
    ``atan2(d0, -d90)``.

    Args:
        measure: Mean path difference at a heading over a number of samples
        beta: Starting heading in radians
        samples: Samples averaged per measurement
        iterations: Correction rounds

    Returns:
        Tuple of (corrected heading, residual psi measured at it in degrees)
    """

    def residual(heading: float) -> float:
        d0 = measure(heading, samples)
        d90 = measure(heading + math.pi / 2, samples)
        return math.atan2(d0, -d90)

    for _ in range(iterations):
        beta = wrap_angle(beta + residual(beta))
    return beta, math.degrees(residual(beta))


def band_entry(
    estimates: np.ndarray, variances: np.ndarray, truth: float
) -> int | None:
    """First index after which the truth stays inside the 3-sigma band."""
    inside = np.abs(estimates - truth) <= 3.0 * np.sqrt(np.maximum(variances, 0.0))
    if inside.size == 0 or not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    return int(outside[-1] + 1) if outside.size else 0


def localize_distance(
    config: RunConfig,
    orientation: LocalizationVerdict,
    scene: SimulatedScene,
) -> DistanceEstimate:
    """
    Face the source, translate the array and estimate the distance.

    Args:
        config: Run configuration
        orientation: Verdict of the orientation phase
        scene: Measurement source for the translation phase

    Returns:
        Final estimate with its 3-sigma band entry against the simulated truth

    Raises:
        NonConvergenceError: If the orientation did not converge, or the
            facing residual exceeds the orientation error bound
    """
    if not orientation.diagnostics.converged:
        raise NonConvergenceError(
            f"Azimuth spread {orientation.diagnostics.azimuth_spread_deg:.2f} deg exceeds the "
            f"{config.pipeline.convergence_gate_deg} deg gate; refusing distance phase"
        )
    facing = face_source(orientation, config.pipeline.ninety_deg_bypass)
    if config.pipeline.regulate_facing:
        beta, residual = regulate_facing(
            scene.measure_static,
            facing.beta,
            config.pipeline.regulation_samples,
            config.pipeline.regulation_iterations,
        )
        if not facing.bypass and abs(residual) > orientation.azimuth_bound_deg:
            raise NonConvergenceError(
                f"Facing residual {residual:.2f} deg exceeds the orientation bound "
                f"{orientation.azimuth_bound_deg:.2f} deg"
            )
        facing = FacingResult(beta=beta, residual_psi_deg=residual, bypass=facing.bypass)

    series = scene.translation_series(facing.beta)
    model = ModelDist(series.baseline)
    state = run_filter(model, distance_ekf_config(config.ekf.distance, series), series)
    estimates = np.array([r.state[0] for r in state.history])
    variances = np.array([r.covariance_diag[0] for r in state.history])
    entry = band_entry(estimates, variances, scene.source.distance)
    estimate = DistanceEstimate(
        distance_m=float(state.x_hat[0]),
        std_m=float(math.sqrt(state.P[0, 0])),
        band_entry_step=entry,
        band_entry_shift_m=float(series.offset[entry]) if entry is not None else None,
        facing=facing,
        history=state.history,
    )
    logger.info(
        f"Distance {estimate.distance_m:.3f} m (std {estimate.std_m:.3f} m), "
        f"band entry at shift {estimate.band_entry_shift_m} m"
    )
    return estimate


def calibrate(config: RunConfig) -> RmseCalibrationCurve:
    """
    Sweep elevations and azimuths in this environment and fit the RMSE curve.

    Each cell runs both orientation filters on a simulated rotation series; the
    RMSE is averaged over azimuths per elevation.
    """
    settings = config.calibration
    samples = []
    for i, elevation in enumerate(settings.elevations_deg):
        values = []
        for j, azimuth in enumerate(settings.azimuths_deg):
            source = SourceTruth.from_degrees(config.source.distance_m, elevation, azimuth)
            scene = SimulatedScene(config, source, derive_seed(config.seed, 100, i, j))
            series = scene.rotation_series()
            traces, _, _ = orientation_tracks(config, series)
            values.append(trailing_rmse(config, series, traces))
        samples.append((elevation, float(np.mean(values))))
        logger.info(f"Calibration elevation {elevation:g} deg: mean RMSE {samples[-1][1]:.3f} deg")
    return fit_rmse_curve(samples, settings.degree)
