"""Room acoustics simulation for the two-microphone array.

Produces either full audio (image-method reflections, fractional delays,
spherical spreading and sensor noise) or an "ideal ITD" series of noisy
path differences generated straight from the far-field model.
"""

import itertools
import logging
import math
from pathlib import Path

import numpy as np
import soundfile as sf
from scipy import signal as sps

from app.core.constants import SignalConstants
from app.core.exceptions import NotFoundError, ValidationError
from app.schemas.acoustics import ImageSource, ItdSeries, RoomConfig, SignalConfig, StereoRecording
from app.schemas.geometry import ArrayPose, RotationSchedule, SourceTruth, TranslationPlan
from app.services.geometry_service import (
    array_axis,
    microphone_positions,
    source_position,
)

logger = logging.getLogger(__name__)


def _inside(room: RoomConfig, point: np.ndarray) -> bool:
    dims = np.asarray(room.dimensions_m)
    return bool(np.all(point > 0) and np.all(point < dims))


def image_sources(
    room: RoomConfig,
    src: np.ndarray,
    receiver: np.ndarray,
    order: int,
) -> list[ImageSource]:
    """
    Enumerate mirror images of a source up to a reflection order.

    Images along one axis sit at ``(1 - 2q) s + 2 n L`` for integer ``n`` and
    ``q`` in {0, 1}; such an image has ``|n - q|`` reflections off the low wall
    and ``|n|`` off the high wall.

    Args:
        room: Room geometry and reflection coefficients
        src: Source position in room coordinates
        receiver: Receiver position in room coordinates
        order: Maximum total number of reflections

    Returns:
        Images sorted by order, then by distance; order 0 is the direct path

    Raises:
        ValidationError: If the source or receiver is outside the room or the
            order exceeds the room's configured maximum
    """
    src = np.asarray(src, dtype=float)
    receiver = np.asarray(receiver, dtype=float)
    if not _inside(room, src):
        raise ValidationError(f"Source {src.tolist()} is outside the room")
    if not _inside(room, receiver):
        raise ValidationError(f"Receiver {receiver.tolist()} is outside the room")
    if not 0 <= order <= room.max_image_order:
        raise ValidationError(
            f"Image order {order} outside [0, {room.max_image_order}]"
        )

    coefficients = [
        (room.wall_reflection, room.wall_reflection),
        (room.wall_reflection, room.wall_reflection),
        (room.floor_reflection, room.ceiling_reflection),
    ]
    per_axis: list[list[tuple[float, int, float]]] = []
    for axis in range(3):
        length = room.dimensions_m[axis]
        low, high = coefficients[axis]
        options = []
        for n in range(-order, order + 1):
            for q in (0, 1):
                low_hits, high_hits = abs(n - q), abs(n)
                if low_hits + high_hits > order:
                    continue
                coordinate = (1 - 2 * q) * src[axis] + 2 * n * length
                options.append((coordinate, low_hits + high_hits, low**low_hits * high**high_hits))
        per_axis.append(options)

    images = []
    for (x, ox, gx), (y, oy, gy), (z, oz, gz) in itertools.product(*per_axis):
        total = ox + oy + oz
        if total > order:
            continue
        position = np.array([x, y, z])
        images.append(
            ImageSource(
                position=(x, y, z),
                order=total,
                reflection_gain=gx * gy * gz,
                distance=float(np.linalg.norm(position - receiver)),
            )
        )
    images.sort(key=lambda image: (image.order, image.distance))
    return images


def fractional_delay_kernel(
    fraction: float,
    method: str = "sinc",
    taps: int = SignalConstants.FRACTIONAL_DELAY_TAPS,
) -> tuple[np.ndarray, int]:
    """
    FIR kernel delaying by ``center + fraction`` samples.

    Args:
        fraction: Sub-sample delay in [0, 1)
        method: "sinc" for a Hann-windowed sinc, "linear" for two-tap interpolation
        taps: Kernel length of the sinc method

    Returns:
        Tuple of (kernel, integer center delay of the kernel)
    """
    if method == "linear":
        return np.array([1.0 - fraction, fraction]), 0
    center = taps // 2 - 1
    t = np.arange(taps) - center - fraction
    window = np.where(np.abs(t) < taps / 2, 0.5 * (1.0 + np.cos(2.0 * np.pi * t / taps)), 0.0)
    kernel = np.sinc(t) * window
    return kernel / kernel.sum(), center


def load_source_audio(path: Path, sample_rate: int) -> np.ndarray:
    """
    Read a mono source clip, resampled to ``sample_rate`` and scaled to unit RMS.

    Multi-channel files are mixed down. Any format readable by libsndfile works,
    including 16-bit PCM and float WAV.
    """
    if not path.exists():
        raise NotFoundError(f"Speech file not found: {path}")
    data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    audio = data.mean(axis=1)
    if rate != sample_rate:
        g = math.gcd(int(rate), int(sample_rate))
        audio = sps.resample_poly(audio, sample_rate // g, int(rate) // g)
        logger.debug(f"Resampled {path.name} from {rate} Hz to {sample_rate} Hz")
    rms = float(np.sqrt(np.mean(audio**2))) if audio.size else 0.0
    if rms == 0.0:
        raise ValidationError(f"Speech file {path} is silent")
    return audio / rms


def source_waveform(config: SignalConfig, length: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-power source signal of the configured kind."""
    if config.source_kind == "white_noise":
        return rng.standard_normal(length)
    if config.source_kind == "tone":
        t = np.arange(length) / config.sample_rate_hz
        return math.sqrt(2.0) * np.sin(2.0 * np.pi * config.tone_frequency_hz * t)
    assert config.speech_file is not None
    clip = load_source_audio(config.speech_file, config.sample_rate_hz)
    return np.resize(clip, length)


def synthesize_pair(
    room: RoomConfig,
    src: SourceTruth,
    poses: list[ArrayPose],
    sample_period: float,
    sig: SignalConfig,
    seed: int,
) -> StereoRecording:
    """
    Synthesize both microphone channels along an array trajectory.

    The trajectory holds one pose per ITD analysis frame; microphones are frozen
    at that pose for the whole frame. Each channel sums the gain-scaled,
    fractionally delayed source over all images, plus white Gaussian noise.

    Args:
        room: Room geometry, reflections and speed of sound
        src: Source location relative to the robot center
        poses: Array pose for every frame
        sample_period: Frame duration in seconds
        sig: Source signal and sensor noise settings
        seed: Seed for source and noise draws

    Returns:
        Recording whose frames line up with ``poses``

    Raises:
        ValidationError: If the trajectory is empty, frames are shorter than
            one waveform sample, or the source leaves the room
    """
    if not poses:
        raise ValidationError("Trajectory must contain at least one pose")
    frame_exact = sig.sample_rate_hz * sample_period
    frame_length = int(round(frame_exact))
    if frame_length < 1:
        raise ValidationError(
            f"Trajectory period {sample_period} s is shorter than one sample at "
            f"{sig.sample_rate_hz} Hz"
        )

    fs = sig.sample_rate_hz
    c0 = room.sound_speed_m_s
    center = room.center
    source_abs = center + source_position(src)
    if not _inside(room, source_abs):
        raise ValidationError(f"Source at {source_abs.tolist()} is outside the room")

    rng = np.random.default_rng(seed)
    total = frame_length * len(poses)
    max_path = float(np.linalg.norm(room.dimensions_m)) * (2 * room.max_image_order + 1)
    taps = SignalConstants.FRACTIONAL_DELAY_TAPS
    preroll = int(math.ceil(max_path / c0 * fs)) + taps + 1
    source = source_waveform(sig, preroll + total + taps, rng)

    channels = np.zeros((2, total))
    for index, pose in enumerate(poses):
        start = index * frame_length
        for mic, position in enumerate(microphone_positions(pose)):
            receiver = center + position
            for image in image_sources(room, source_abs, receiver, room.max_image_order):
                delay = image.distance / c0 * fs
                whole = int(math.floor(delay))
                kernel, kernel_center = fractional_delay_kernel(
                    delay - whole, sig.fractional_delay, taps
                )
                first = preroll + start - whole + kernel_center - (kernel.size - 1)
                segment = source[first : first + frame_length + kernel.size - 1]
                channels[mic, start : start + frame_length] += image.gain * np.convolve(
                    segment, kernel, mode="valid"
                )

    noise_sigma = sig.noise_sigma
    if sig.snr_db is not None:
        power = float(np.mean(channels**2))
        noise_sigma = math.sqrt(power / 10.0 ** (sig.snr_db / 10.0))
    if noise_sigma > 0:
        channels += rng.normal(0.0, noise_sigma, channels.shape)

    logger.debug(
        f"Synthesized {len(poses)} frames of {frame_length} samples "
        f"(order {room.max_image_order}, noise sigma {noise_sigma:.3g})"
    )
    return StereoRecording(channels=channels, sample_rate_hz=fs, frame_length=frame_length)


def ideal_itd_series(
    src: SourceTruth,
    schedule: RotationSchedule | TranslationPlan,
    b: float,
    noise_sigma: float,
    seed: int,
    beta_start: float = 0.0,
) -> ItdSeries:
    """
    Noisy path differences straight from the far-field model.

    Rotation schedules sample ``b cos(theta) sin(phi - beta_k)``; translation
    plans sample the exact far-field geometry at the commanded heading, so a
    facing error shows up in the measurements.

    Args:
        src: True source location
        schedule: Rotation schedule or translation plan
        b: Baseline in meters
        noise_sigma: Additive Gaussian noise std in meters
        seed: Noise seed
        beta_start: Heading of the first rotation sample

    Returns:
        Series with one sample per schedule step
    """
    if noise_sigma < 0:
        raise ValidationError(f"Noise sigma must be non-negative, got {noise_sigma}")
    if b <= 0:
        raise ValidationError(f"Baseline must be positive, got {b}")
    rng = np.random.default_rng(seed)

    if isinstance(schedule, RotationSchedule):
        beta = schedule.betas(beta_start)
        if beta.size == 0:
            raise ValidationError("Rotation schedule is empty")
        offset = np.zeros_like(beta)
        clean = b * math.cos(src.elevation) * np.sin(src.azimuth - beta)
        kind = "rotation"
        omega = schedule.omega
    else:
        offset = schedule.offsets()
        beta = np.full_like(offset, schedule.beta)
        axis = array_axis(schedule.beta)
        relative = source_position(src)[None, :] + offset[:, None] * axis[None, :]
        clean = b * (relative @ axis) / np.linalg.norm(relative, axis=1)
        kind = "translation"
        omega = 0.0

    measured = clean + rng.normal(0.0, noise_sigma, clean.shape) if noise_sigma > 0 else clean
    return ItdSeries(
        kind=kind,
        beta=beta,
        offset=offset,
        d_measured=measured,
        baseline=b,
        sample_period=schedule.sample_period,
        omega=omega,
    )


def endfire_delay_samples(b: float, c0: float, sample_rate: int) -> float:
    """Largest possible inter-microphone delay in samples."""
    return b / c0 * sample_rate


def write_recording(path: Path, recording: StereoRecording) -> None:
    """Persist a two-channel recording as float WAV for offline inspection."""
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), recording.channels.T, recording.sample_rate_hz, subtype="FLOAT")

