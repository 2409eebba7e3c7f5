"""Reference constants for the simulated environment, array and filters.

These values are the defaults of every config field. Angles here are stored in
degrees where they surface in config documents and in radians where they are
only used internally; the suffix of each name says which.

Constants are organized into logical groups for easy navigation.
"""

import math


class RoomConstants:
    """Constants for the simulated rectangular room."""

    DIMENSIONS_M = (20.0, 20.0, 20.0)
    WALL_REFLECTION = 0.5
    FLOOR_REFLECTION = 0.5
    CEILING_REFLECTION = 0.5
    SOUND_SPEED_M_S = 345.0
    MAX_IMAGE_ORDER = 2


class SignalConstants:
    """Constants for source signal synthesis."""

    SAMPLE_RATE_HZ = 44_100
    TONE_FREQUENCY_HZ = 500.0
    FRACTIONAL_DELAY_TAPS = 32  # windowed-sinc kernel length
    ENERGY_FLOOR = 1e-12  # mean power below this is treated as silence


class ArrayConstants:
    """Constants for the rotating and translating microphone array."""

    BASELINE_M = 0.18
    HARDWARE_BASELINE_M = 0.3
    OMEGA_RAD_S = 2.0 * math.pi / 5.0  # one revolution every 5 s, clockwise
    REVOLUTIONS = 3
    ITD_CADENCE_DEG = 1.0  # rotation between successive ITD samples
    TRANSLATION_STEP_M = 0.0007
    TRANSLATION_STEPS = 200


class GccConstants:
    """Constants for cross-correlation delay estimation."""

    MAX_LAG_MARGIN = 1.25  # search window as a multiple of b / c0
    PHAT_FLATNESS_THRESHOLD = 0.3  # spectral flatness below this selects PHAT in auto mode


class EkfConstants:
    """Constants for the continuous-discrete extended Kalman filters."""

    # Orientation filters
    ORIENTATION_PROCESS_SIGMA = 0.01
    ORIENTATION_SENSOR_SIGMA = 0.01
    INITIAL_AZIMUTH_DEG = 5.0
    INITIAL_ELEVATION_DEG = 5.0
    INITIAL_ANGLE_STD_DEG = 10.0
    INITIAL_GUESS = "spectrum"  # or "fixed" for the angles above

    # Distance filter
    DISTANCE_PROCESS_SIGMA = 0.1
    DISTANCE_SENSOR_SIGMA = 0.001
    INITIAL_DISTANCE_M = 1.0
    INITIAL_DISTANCE_STD_M = 5.0
    MIN_DISTANCE_M = 0.05  # estimate floor, D must stay positive

    SUBSTEPS = 10


class DetectorConstants:
    """Constants for the two elevation singularity detectors."""

    D_THRESHOLD_M = 0.017  # for the reference baseline below
    D_THRESHOLD_BASELINE_M = 0.18
    RMSE_THRESHOLD_DEG = 1.9
    RMSE_THRESHOLD_ELEVATION_DEG = 15.0  # elevation whose curve value is the threshold
    BIN_SEARCH_RADIUS = 1
    CURVE_GRID_POINTS = 512  # dense grid for the monotone check and root bracketing

    # Calibration sweep
    CALIBRATION_ELEVATIONS_DEG = tuple(float(e) for e in range(0, 31, 2))
    CALIBRATION_AZIMUTHS_DEG = tuple(float(a) for a in range(0, 360, 45))
    CURVE_DEGREE = 3


class PipelineConstants:
    """Constants for orchestration of complete localization runs."""

    CONVERGENCE_GATE_DEG = 2.0  # last-revolution circular std
    RMSE_REVOLUTIONS = 1  # trailing revolutions compared by the RMSE test
    REGULATION_SAMPLES = 64  # averaged measurements per facing check
    REGULATION_ITERATIONS = 2
    ORIENTATION_NOISE_SIGMA_M = 0.01
    DISTANCE_NOISE_SIGMA_M = 1e-4


class ObservabilityConstants:
    """Constants for numeric observability analysis."""

    SINGULAR_TOLERANCE = 1e-8  # relative to the larger of sigma_max and model scale
    LIE_STEP = 1e-5
