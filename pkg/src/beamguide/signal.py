"""Audio containers and the additive image model ``y_c = sum_s x_{s,c}``."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError

DEFAULT_SAMPLE_RATE = 8000


class Provenance(str, enum.Enum):
    ESTIMATED = "estimated"
    BEAMFORMED = "beamformed"
    TRUTH = "truth"


@dataclass(frozen=True)
class StageTag:
    """(stage, iteration) pair; stage 1 uses iteration 0, stage 2 counts from 1."""

    stage: int = 1
    iteration: int = 0

    def __post_init__(self):
        if self.stage < 1 or self.iteration < 0:
            raise ConfigError(f"invalid stage tag ({self.stage}, {self.iteration})")

    @property
    def key(self) -> str:
        return f"stage{self.stage}_iter{self.iteration}"

    @classmethod
    def from_key(cls, key: str) -> "StageTag":
        try:
            stage, iteration = key.split("_")
            return cls(int(stage.removeprefix("stage")), int(iteration.removeprefix("iter")))
        except ValueError as exc:
            raise ConfigError(f"malformed stage key {key!r}") from exc


def _as_float_array(samples, ndim):
    arr = np.array(samples, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d sample array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MultichannelWaveform:
    """``C x N`` float64 samples plus a sample rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim == 1:
            samples = samples[None, :]
        object.__setattr__(self, "samples", _as_float_array(samples, 2))
        if self.samples.shape[0] < 1:
            raise DimensionError("waveform needs at least one channel")
        if not self.sample_rate > 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return self.num_samples


@dataclass(frozen=True, eq=False)
class SourceImageSet:
    """``S x C x N`` image waveforms of S sources at C microphones."""

    images: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE
    provenance: Provenance = Provenance.ESTIMATED
    stage_tag: StageTag = field(default_factory=StageTag)

    def __post_init__(self):
        object.__setattr__(self, "images", _as_float_array(self.images, 3))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if self.images.shape[0] < 1:
            raise DimensionError("image set needs at least one source")
        if self.images.shape[1] < 1:
            raise DimensionError("image set needs at least one channel")
        if not self.sample_rate > 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")

    @classmethod
    def from_waveforms(cls, waves, provenance=Provenance.ESTIMATED, stage_tag=None):
        """Stack per-source waveforms, reporting the first inconsistent source."""
        waves = list(waves)
        if not waves:
            raise DimensionError("image set needs at least one source")
        first = waves[0]
        for s, w in enumerate(waves):
            if w.samples.shape != first.samples.shape:
                raise DimensionError(
                    f"source {s} has shape {w.samples.shape}, expected {first.samples.shape}",
                    source_index=s,
                )
            if w.sample_rate != first.sample_rate:
                raise DimensionError(
                    f"source {s} has sample rate {w.sample_rate}, expected {first.sample_rate}",
                    source_index=s,
                )
        return cls(
            np.stack([w.samples for w in waves]),
            first.sample_rate,
            provenance,
            stage_tag or StageTag(),
        )

    @property
    def num_sources(self) -> int:
        return self.images.shape[0]

    @property
    def num_channels(self) -> int:
        return self.images.shape[1]

    @property
    def num_samples(self) -> int:
        return self.images.shape[2]

    def source(self, s: int) -> MultichannelWaveform:
        return MultichannelWaveform(self.images[s], self.sample_rate)

    def __len__(self):
        return self.num_sources

    def __iter__(self):
        return (self.source(s) for s in range(self.num_sources))

    def replace(self, images=None, provenance=None, stage_tag=None) -> "SourceImageSet":
        return SourceImageSet(
            self.images if images is None else images,
            self.sample_rate,
            self.provenance if provenance is None else provenance,
            self.stage_tag if stage_tag is None else stage_tag,
        )


def mix_images(images: SourceImageSet) -> MultichannelWaveform:
    """Sum source images into the microphone mixture."""
    return MultichannelWaveform(images.images.sum(axis=0), images.sample_rate)


def residual(mixture: MultichannelWaveform, image) -> MultichannelWaveform:
    """Elementwise ``mixture - image``; ``image`` is one source's C-channel waveform."""
    other = image.samples if isinstance(image, MultichannelWaveform) else np.asarray(image, float)
    if other.ndim == 1:
        other = other[None, :]
    if other.shape != mixture.samples.shape:
        raise DimensionError(f"image shape {other.shape} does not match mixture {mixture.samples.shape}")
    if isinstance(image, MultichannelWaveform) and image.sample_rate != mixture.sample_rate:
        raise DimensionError("sample rates differ")
    return MultichannelWaveform(mixture.samples - other, mixture.sample_rate)
