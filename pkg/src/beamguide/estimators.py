"""Source-estimation stage: oracle, file-backed and guidance-passthrough estimators.

Every estimator maps a mixture (plus, from stage 2 on, the previous beamformed
images) to ``S x C`` image estimates.  Any trained separation network can be
plugged in through the ``external`` kind by writing its outputs to files
listed in a manifest.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import stft as _stft
from .errors import ConfigError, DimensionError, EstimatorError
from .signal import MultichannelWaveform, Provenance, SourceImageSet, StageTag


class EstimatorKind(str, enum.Enum):
    ORACLE_SIGNAL = "oracle_signal"
    ORACLE_IRM = "oracle_irm"
    EXTERNAL = "external"
    GUIDED_PASSTHROUGH = "guided_passthrough"

    @classmethod
    def parse(cls, name: str) -> "EstimatorKind":
        try:
            return cls(name.replace("-", "_"))
        except ValueError as exc:
            raise ConfigError(f"unknown estimator {name!r}") from exc


# kinds whose output for samples [a, b) needs nothing after sample b
CAUSAL_KINDS = frozenset({EstimatorKind.ORACLE_SIGNAL, EstimatorKind.EXTERNAL,
                          EstimatorKind.GUIDED_PASSTHROUGH})


@dataclass
class EstimatorSpec:
    kind: EstimatorKind
    truth: SourceImageSet | None = None
    external: dict[str, SourceImageSet] = field(default_factory=dict)
    irm_exponent: float = 2.0

    def __post_init__(self):
        self.kind = EstimatorKind(self.kind)
        if self.kind in (EstimatorKind.ORACLE_SIGNAL, EstimatorKind.ORACLE_IRM) and self.truth is None:
            raise EstimatorError(f"{self.kind.value} estimator requires ground-truth images")
        if self.kind is EstimatorKind.EXTERNAL and not self.external:
            raise EstimatorError("external estimator has no manifest entries")

    @property
    def causal(self) -> bool:
        return self.kind in CAUSAL_KINDS


def _check_guidance(spec, guidance, stage_tag):
    if stage_tag.stage == 1 and guidance is not None:
        raise EstimatorError("stage 1 takes no guidance")
    if stage_tag.stage > 1 and guidance is None:
        raise EstimatorError(f"stage {stage_tag.stage} requires guidance images")


def _check_dims(images: np.ndarray, mixture: MultichannelWaveform, what: str):
    if images.shape[1:] != mixture.samples.shape:
        raise DimensionError(f"{what} images {images.shape} do not match mixture {mixture.samples.shape}")


def ideal_ratio_mask(truth_spec: np.ndarray, exponent: float = 2.0) -> np.ndarray:
    """``|X_s|^p / sum_s' |X_s'|^p`` for ``(S, C, T, F)`` spectra; 0 where all sources vanish."""
    mag = np.abs(truth_spec) ** exponent
    total = mag.sum(axis=0, keepdims=True)
    return np.divide(mag, total, out=np.zeros_like(mag), where=total > 0)


def _external_entry(spec, stage_tag):
    try:
        return spec.external[stage_tag.key]
    except KeyError:
        raise EstimatorError(f"manifest has no external estimate for {stage_tag.key}") from None


def estimate(spec: EstimatorSpec, mixture: MultichannelWaveform, guidance: SourceImageSet | None = None,
             stage_tag: StageTag | None = None, config: _stft.StftConfig | None = None) -> SourceImageSet:
    """Run the estimator for one stage/iteration and return images tagged ``estimated``."""
    stage_tag = stage_tag or StageTag()
    _check_guidance(spec, guidance, stage_tag)
    kind = spec.kind
    if kind is EstimatorKind.ORACLE_SIGNAL:
        images = spec.truth.images
    elif kind is EstimatorKind.ORACLE_IRM:
        config = config or _stft.StftConfig()
        _check_dims(spec.truth.images, mixture, "truth")
        mix_spec = _stft.analyze(mixture, config)
        truth_spec = _stft.analyze_frames(_stft.frame_signal(spec.truth.images, config), config)
        masked = ideal_ratio_mask(truth_spec, spec.irm_exponent) * mix_spec.bins[None]
        frames = _stft.synthesize_frames(masked, config)
        images = _stft.overlap_add(frames, config, mixture.num_samples)
    elif kind is EstimatorKind.EXTERNAL:
        images = _external_entry(spec, stage_tag).images
    else:
        images = guidance.images
    _check_dims(images, mixture, kind.value)
    return SourceImageSet(images, mixture.sample_rate, Provenance.ESTIMATED, stage_tag)


def estimate_block(spec: EstimatorSpec, start: int, stop: int, guidance: SourceImageSet | None = None,
                   stage_tag: StageTag | None = None) -> np.ndarray:
    """Frame-synchronous output for samples ``[start, stop)``, zero beyond the source end.

    Only causal kinds are accepted; nothing after ``stop`` is read.
    """
    stage_tag = stage_tag or StageTag()
    if not spec.causal:
        raise ConfigError(f"{spec.kind.value} estimator cannot run frame-synchronously")
    _check_guidance(spec, guidance, stage_tag)
    if spec.kind is EstimatorKind.ORACLE_SIGNAL:
        source = spec.truth.images
    elif spec.kind is EstimatorKind.EXTERNAL:
        source = _external_entry(spec, stage_tag).images
    else:
        source = guidance.images
    block = source[..., start:min(stop, source.shape[-1])]
    if block.shape[-1] < stop - start:
        block = np.pad(block, [(0, 0), (0, 0), (0, stop - start - block.shape[-1])])
    return block
