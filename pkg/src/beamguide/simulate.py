"""Deterministic synthetic scenes: dry sources, anechoic RIRs, SIR-controlled mixing."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .errors import ConfigError, DimensionError
from .signal import MultichannelWaveform, Provenance, SourceImageSet, mix_images

SOUND_SPEED = 343.0
RIR_TAPS = 64
FFT_CONVOLVE_MIN_TAPS = 1024


@dataclass
class Geometry:
    mic_positions: np.ndarray  # (C, 3) metres
    source_positions: np.ndarray  # (S, 3) metres
    sound_speed: float = SOUND_SPEED

    def __post_init__(self):
        self.mic_positions = np.atleast_2d(np.asarray(self.mic_positions, float))
        self.source_positions = np.atleast_2d(np.asarray(self.source_positions, float))

    def distance(self, source_index: int, mic_index: int) -> float:
        return float(np.linalg.norm(self.source_positions[source_index] - self.mic_positions[mic_index]))


def default_geometry(num_sources: int = 2, num_mics: int = 4, spacing: float = 0.05,
                     distance: float = 1.5) -> Geometry:
    """Linear array along x, sources spread over azimuths 45..135 degrees."""
    center = np.array([2.0, 2.0, 1.5])
    offsets = (np.arange(num_mics) - (num_mics - 1) / 2) * spacing
    mics = center + np.stack([offsets, np.zeros(num_mics), np.zeros(num_mics)], axis=1)
    angles = np.deg2rad(np.linspace(45.0, 135.0, num_sources)) if num_sources > 1 else np.array([np.pi / 2])
    sources = center + distance * np.stack([np.cos(angles), np.sin(angles), np.zeros(num_sources)], axis=1)
    return Geometry(mics, sources)


def fractional_delay_kernel(delay: float, taps: int = RIR_TAPS) -> tuple[int, np.ndarray]:
    """Hann-windowed sinc centred on ``delay``; returns (first index, kernel)."""
    half = taps // 2
    start = int(np.floor(delay)) - (half - 1)
    idx = np.arange(start, start + taps)
    offset = idx - delay
    window = 0.5 * (1.0 + np.cos(np.pi * offset / half))
    return start, np.sinc(offset) * window


def generate_anechoic_rir(geometry: Geometry, source_index: int, mic_index: int,
                          sample_rate: int = 8000, taps: int = RIR_TAPS) -> np.ndarray:
    """Direct-path impulse response: fractional delay ``d / c`` with ``1 / d`` gain.

    Kernel taps that would fall before time zero (delays under ``taps / 2``
    samples) are dropped, so such short distances are only approximate.
    """
    dist = geometry.distance(source_index, mic_index)
    if dist <= 0.0:
        raise ConfigError(f"source {source_index} coincides with mic {mic_index}")
    delay = dist / geometry.sound_speed * sample_rate
    start, kernel = fractional_delay_kernel(delay, taps)
    rir = np.zeros(start + taps)
    keep = slice(max(0, -start), taps)
    rir[max(start, 0):] = kernel[keep]
    return rir / dist


def convolve(dry: np.ndarray, rir: np.ndarray, length: int | None = None) -> np.ndarray:
    """Linear convolution truncated to ``length`` (default: len(dry))."""
    length = dry.size if length is None else length
    if rir.size < FFT_CONVOLVE_MIN_TAPS:
        out = np.convolve(dry, rir)
    else:
        out = scipy.signal.fftconvolve(dry, rir)
    if out.size < length:
        out = np.pad(out, (0, length - out.size))
    return out[:length]


def noise_burst(num_samples: int, rng: np.random.Generator, sample_rate: int = 8000,
                band=(100.0, 3400.0), tilt_hz: float | None = 500.0,
                burst_range=(0.15, 0.5), gap_range=(0.05, 0.25)) -> np.ndarray:
    """Band-limited Gaussian noise gated into bursts with raised-cosine edges.

    ``tilt_hz`` adds a second-order low-pass roll-off so that, as with speech,
    most energy sits at low frequencies and neighbouring microphones stay
    correlated over a few samples of delay.
    """
    sos = scipy.signal.butter(6, band, btype="bandpass", fs=sample_rate, output="sos")
    noise = scipy.signal.sosfiltfilt(sos, rng.standard_normal(num_samples))
    if tilt_hz is not None:
        noise = scipy.signal.sosfilt(scipy.signal.butter(2, tilt_hz, fs=sample_rate, output="sos"), noise)
    envelope = np.zeros(num_samples)
    pos = int(rng.uniform(*gap_range) * sample_rate)
    ramp = int(0.01 * sample_rate)
    while pos < num_samples:
        length = int(rng.uniform(*burst_range) * sample_rate)
        seg = np.ones(length)
        edge = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        seg[:ramp] *= edge
        seg[-ramp:] *= edge[::-1]
        stop = min(pos + length, num_samples)
        envelope[pos:stop] = seg[: stop - pos] * rng.uniform(0.5, 1.0)
        pos = stop + int(rng.uniform(*gap_range) * sample_rate)
    return noise * envelope


def multitone(num_samples: int, rng: np.random.Generator, sample_rate: int = 8000,
              num_tones: int = 8, band=(100.0, 3400.0)) -> np.ndarray:
    t = np.arange(num_samples) / sample_rate
    freqs = rng.uniform(*band, size=num_tones)
    phases = rng.uniform(0, 2 * np.pi, size=num_tones)
    amps = rng.uniform(0.3, 1.0, size=num_tones)
    return (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None])).sum(axis=0)


def make_dry_sources(num_sources: int, num_samples: int, seed: int = 0, sample_rate: int = 8000,
                     kind: str = "noise_burst") -> np.ndarray:
    rng = np.random.default_rng(seed)
    gen = {"noise_burst": noise_burst, "multitone": multitone}.get(kind)
    if gen is None:
        raise ConfigError(f"unknown dry signal kind {kind!r}")
    dry = np.stack([gen(num_samples, rng, sample_rate) for _ in range(num_sources)])
    return 0.1 * dry / np.sqrt(np.mean(dry**2, axis=1, keepdims=True))


@dataclass
class SceneSpec:
    """Everything needed to render one mixture.

    ``rirs`` (``S x C`` arrays) take precedence over ``geometry``.  ``sir_db``
    may be a scalar, one value per interferer, or ``None`` to draw each from
    ``sir_range`` with ``seed``.
    """

    sources: list
    rirs: list | None = None
    geometry: Geometry | None = None
    sir_db: float | list | None = None
    sir_range: tuple = (-5.0, 5.0)
    seed: int = 0
    sample_rate: int = 8000
    noise_snr_db: float | None = None

    def resolved_sir(self) -> np.ndarray:
        num_interf = len(self.sources) - 1
        if self.sir_db is None:
            rng = np.random.default_rng([self.seed, 1])
            sir = rng.uniform(*self.sir_range, size=num_interf)
        else:
            sir = np.broadcast_to(np.asarray(self.sir_db, float), (num_interf,)).copy()
        lo, hi = min(self.sir_range), max(self.sir_range)
        if np.any((sir < lo) | (sir > hi)):
            raise ConfigError(f"SIR {sir.tolist()} outside declared range [{lo}, {hi}]")
        return sir


def render_scene(spec: SceneSpec) -> tuple[MultichannelWaveform, SourceImageSet]:
    """Convolve, scale interferers to the SIR on channel 1, and mix."""
    if len(spec.sources) == 0:
        raise ConfigError("scene has no sources")
    dry = [np.asarray(s, float).ravel() for s in spec.sources]
    num_samples = max(d.size for d in dry)
    dry = [np.pad(d, (0, num_samples - d.size)) for d in dry]
    num_src = len(dry)
    if spec.rirs is not None:
        rirs = spec.rirs
        if len(rirs) != num_src:
            raise DimensionError(f"{len(rirs)} RIR sets for {num_src} sources")
        num_ch = len(rirs[0])
        for s, row in enumerate(rirs):
            if len(row) != num_ch:
                raise DimensionError(f"source {s} has {len(row)} RIRs, expected {num_ch}", source_index=s)
    elif spec.geometry is not None:
        geo = spec.geometry
        if geo.source_positions.shape[0] != num_src:
            raise DimensionError(f"geometry has {geo.source_positions.shape[0]} sources, scene has {num_src}")
        num_ch = geo.mic_positions.shape[0]
        rirs = [[generate_anechoic_rir(geo, s, c, spec.sample_rate) for c in range(num_ch)]
                for s in range(num_src)]
    else:
        raise ConfigError("scene needs either RIRs or a geometry")

    images = np.stack([[convolve(dry[s], np.asarray(rirs[s][c], float), num_samples)
                        for c in range(num_ch)] for s in range(num_src)])
    sir = spec.resolved_sir()
    ref_power = np.sum(images[0, 0] ** 2)
    for s in range(1, num_src):
        power = np.sum(images[s, 0] ** 2)
        if power > 0 and ref_power > 0:
            images[s] *= np.sqrt(ref_power / (power * 10.0 ** (sir[s - 1] / 10.0)))
    truth = SourceImageSet(images, spec.sample_rate, Provenance.TRUTH)
    mixture = mix_images(truth)
    if spec.noise_snr_db is not None:
        rng = np.random.default_rng([spec.seed, 2])
        noise = rng.standard_normal(mixture.samples.shape)
        scale = np.sqrt(np.mean(mixture.samples[0] ** 2) / 10.0 ** (spec.noise_snr_db / 10.0))
        mixture = MultichannelWaveform(mixture.samples + scale * noise, spec.sample_rate)
    return mixture, truth


def default_scene(seed: int = 0, num_sources: int = 2, num_mics: int = 4, duration: float = 4.0,
                  sample_rate: int = 8000, sir_db: float | None = 0.0,
                  kind: str = "noise_burst") -> SceneSpec:
    num_samples = int(round(duration * sample_rate))
    return SceneSpec(
        sources=list(make_dry_sources(num_sources, num_samples, seed, sample_rate, kind)),
        geometry=default_geometry(num_sources, num_mics),
        sir_db=sir_db,
        seed=seed,
        sample_rate=sample_rate,
    )
