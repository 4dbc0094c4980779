"""Square-root Hann STFT with exact overlap-add reconstruction.

The input is padded with ``frame_len - hop`` zeros at the head and enough zeros
at the tail that every sample is covered by ``frame_len // hop`` frames.  The
synthesis divides by the accumulated squared window per sample, so edges
reconstruct as exactly as the steady-state region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .signal import MultichannelWaveform


@dataclass(frozen=True)
class StftConfig:
    frame_len: int = 4096
    hop: int = 1024
    fft_size: int | None = None
    window: str = "sqrt_hann_periodic"

    def __post_init__(self):
        if self.fft_size is None:
            object.__setattr__(self, "fft_size", self.frame_len)
        self.validate()

    def validate(self):
        if self.window != "sqrt_hann_periodic":
            raise ConfigError(f"unsupported window {self.window!r}")
        if self.frame_len < 2 or self.hop < 1:
            raise ConfigError(f"frame_len={self.frame_len}, hop={self.hop} out of range")
        if self.frame_len % self.hop:
            raise ConfigError(f"hop {self.hop} must divide frame_len {self.frame_len}")
        if self.fft_size < self.frame_len:
            raise ConfigError(f"fft_size {self.fft_size} smaller than frame_len {self.frame_len}")
        # a single frame per sample leaves zeros of the window uncovered
        if self.frame_len // self.hop < 2:
            raise ConfigError("overlap-add needs at least 2 frames per sample")

    @classmethod
    def from_ms(cls, frame_ms: float, hop_ms: float, sample_rate: int) -> "StftConfig":
        frame = frame_ms * sample_rate / 1000.0
        hop = hop_ms * sample_rate / 1000.0
        if not (float(frame).is_integer() and float(hop).is_integer()):
            raise ConfigError(
                f"{frame_ms} ms / {hop_ms} ms at {sample_rate} Hz is not an integer number of samples"
            )
        return cls(int(frame), int(hop))

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def head_pad(self) -> int:
        return self.frame_len - self.hop

    def num_frames(self, num_samples: int) -> int:
        return math.ceil((num_samples + self.head_pad) / self.hop)

    def padded_len(self, num_samples: int) -> int:
        return (self.num_frames(num_samples) - 1) * self.hop + self.frame_len

    def window_array(self) -> np.ndarray:
        n = np.arange(self.frame_len)
        return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.frame_len))


@dataclass(frozen=True, eq=False)
class ComplexSpectrogram:
    """One-sided spectra, shape ``(C, T, F)``."""

    bins: np.ndarray
    config: StftConfig
    original_len: int
    sample_rate: int = 8000

    @property
    def num_channels(self) -> int:
        return self.bins.shape[0]

    @property
    def num_frames(self) -> int:
        return self.bins.shape[1]

    @property
    def num_bins(self) -> int:
        return self.bins.shape[2]


def frame_signal(samples: np.ndarray, config: StftConfig) -> np.ndarray:
    """Split ``(..., N)`` samples into padded frames ``(..., T, frame_len)``."""
    n = samples.shape[-1]
    total = config.padded_len(n)
    pad = [(0, 0)] * (samples.ndim - 1) + [(config.head_pad, total - n - config.head_pad)]
    padded = np.pad(samples, pad)
    view = np.lib.stride_tricks.sliding_window_view(padded, config.frame_len, axis=-1)
    return view[..., :: config.hop, :]


def analyze_frames(frames: np.ndarray, config: StftConfig) -> np.ndarray:
    """Window and transform time frames ``(..., frame_len)`` to ``(..., F)``."""
    return np.fft.rfft(frames * config.window_array(), n=config.fft_size, axis=-1)


def synthesize_frames(spectra: np.ndarray, config: StftConfig) -> np.ndarray:
    """Inverse transform ``(..., F)`` spectra and apply the synthesis window."""
    frames = np.fft.irfft(spectra, n=config.fft_size, axis=-1)[..., : config.frame_len]
    return frames * config.window_array()


def analyze(wave: MultichannelWaveform, config: StftConfig | None = None) -> ComplexSpectrogram:
    config = config or StftConfig()
    config.validate()
    if wave.num_samples < 1:
        raise DimensionError("cannot analyze an empty waveform")
    bins = analyze_frames(frame_signal(wave.samples, config), config)
    return ComplexSpectrogram(bins, config, wave.num_samples, wave.sample_rate)


def overlap_add(frames: np.ndarray, config: StftConfig, num_samples: int) -> np.ndarray:
    """Overlap-add windowed frames ``(..., T, frame_len)`` and normalize per sample."""
    num_frames = frames.shape[-2]
    total = (num_frames - 1) * config.hop + config.frame_len
    out = np.zeros(frames.shape[:-2] + (total,))
    norm = np.zeros(total)
    win_sq = config.window_array() ** 2
    for t in range(num_frames):
        sl = slice(t * config.hop, t * config.hop + config.frame_len)
        out[..., sl] += frames[..., t, :]
        norm[sl] += win_sq
    start = config.head_pad
    norm = norm[start : start + num_samples]
    if np.any(norm <= 0.0):
        raise ConfigError("window/hop leave samples without synthesis coverage")
    return out[..., start : start + num_samples] / norm


def synthesize(spec: ComplexSpectrogram) -> MultichannelWaveform:
    config = spec.config
    config.validate()
    frames = synthesize_frames(spec.bins, config)
    return MultichannelWaveform(overlap_add(frames, config, spec.original_len), spec.sample_rate)
