"""Estimator -> permutation -> SCM -> MVDR chains, iterated and streamed.

Stage 1 is a single pass on the mixture.  Each stage-2 iteration reruns the
chain with the previous beamformed images as guidance.  Guidance images are
ordered source-major then channel, ``[x_{1,1..C}, x_{2,1..C}, ...]``, which is
the layout of ``SourceImageSet.images`` flattened over its first two axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import stft as _stft
from .errors import BeamGuideError, ConfigError, DimensionError
from .estimators import EstimatorSpec, estimate, estimate_block
from .linalg import DEFAULT_LOADING
from .mvdr import causal_mvdr_frame, mimmo_beamform
from .permute import CausalAligner, PermutationMap, apply_orders, batch_align
from .scm import ScmField, batch_scms, causal_scm_update
from .signal import MultichannelWaveform, Provenance, SourceImageSet, StageTag


@dataclass
class PipelineConfig:
    estimator_stage1: EstimatorSpec
    estimator_stage2: EstimatorSpec | None = None
    stft: _stft.StftConfig = field(default_factory=_stft.StftConfig)
    iterations: int = 4
    loading: float = DEFAULT_LOADING
    reference_channel: int = 1
    mode: str = "batch"

    def validate(self):
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.iterations > 0 and self.estimator_stage2 is None:
            raise ConfigError("iterations > 0 need a stage-2 estimator")
        if self.mode not in ("batch", "causal"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.loading < 0:
            raise ConfigError(f"loading must be >= 0, got {self.loading}")
        if self.mode == "causal":
            for spec in (self.estimator_stage1, self.estimator_stage2 if self.iterations else None):
                if spec is not None and not spec.causal:
                    raise ConfigError(f"{spec.kind.value} estimator is not usable in causal mode")
        self.stft.validate()


@dataclass
class TraceEntry:
    stage_tag: StageTag
    zhat: SourceImageSet
    xhat: SourceImageSet
    permutations: PermutationMap
    scm_summary: dict


@dataclass
class StageTrace:
    entries: list[TraceEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def find(self, stage: int, iteration: int) -> TraceEntry:
        for entry in self.entries:
            if (entry.stage_tag.stage, entry.stage_tag.iteration) == (stage, iteration):
                return entry
        raise KeyError((stage, iteration))


def _annotate(exc: BeamGuideError, tag: StageTag) -> BeamGuideError:
    new = type(exc).__new__(type(exc))
    new.__dict__.update(exc.__dict__)
    new.args = (f"[{tag.key}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
    return new


def scm_summary(scms: ScmField) -> dict:
    """Condition numbers of the interference SCMs, per source."""
    cond = np.linalg.cond(scms.interfer)
    cond = np.where(np.isfinite(cond), cond, np.inf)
    return {
        "frames": int(scms.frames_seen),
        "interfer_cond_median": [float(np.median(c)) for c in cond],
        "interfer_cond_max": [float(np.max(c)) for c in cond],
    }


def _stage_tags(iterations: int):
    yield StageTag(1, 0)
    for k in range(1, iterations + 1):
        yield StageTag(2, k)


def run_stage(estimator: EstimatorSpec, mixture: MultichannelWaveform, guidance: SourceImageSet | None = None,
              stage_tag: StageTag | None = None, stft_config: _stft.StftConfig | None = None,
              loading: float = DEFAULT_LOADING) -> tuple[SourceImageSet, TraceEntry]:
    """One estimator -> align -> SCM -> MIMMO beamformer pass."""
    tag = stage_tag or StageTag(1 if guidance is None else 2, 0 if guidance is None else 1)
    config = stft_config or _stft.StftConfig()
    try:
        zhat = estimate(estimator, mixture, guidance, tag, config)
        aligned, pmap = batch_align(zhat)
        mix_spec = _stft.analyze(mixture, config)
        src_spec = _stft.analyze_frames(_stft.frame_signal(aligned.images, config), config)
        scms = batch_scms(mix_spec, src_spec)
        xhat = mimmo_beamform(scms, mix_spec, loading, tag)
    except BeamGuideError as exc:
        raise _annotate(exc, tag) from exc
    return xhat, TraceEntry(tag, aligned, xhat, pmap, scm_summary(scms))


def run_iterative(config: PipelineConfig, mixture: MultichannelWaveform) -> tuple[SourceImageSet, StageTrace]:
    """Stage 1, then ``config.iterations`` guided stage-2 passes; returns the last beamformed set."""
    config.validate()
    if config.mode == "causal":
        return run_causal_stream(config, mixture)
    trace = StageTrace()
    xhat = None
    for tag in _stage_tags(config.iterations):
        spec = config.estimator_stage1 if tag.stage == 1 else config.estimator_stage2
        xhat, entry = run_stage(spec, mixture, xhat, tag, config.stft, config.loading)
        trace.entries.append(entry)
    return xhat, trace


class CausalSession:
    """Frame-by-frame separation of one stream with running SCMs.

    Feed the mixture ``hop`` samples at a time with ``push``; each call returns
    the output samples that no later frame can change, shape ``(S, R, k)``
    for the ``R`` reference channels.  Output sample ``m`` becomes final once
    the input block holding sample ``m + frame_len - hop`` has been pushed.
    ``flush`` emits the remainder after the last block.
    """

    def __init__(self, estimator: EstimatorSpec, num_sources: int, num_channels: int,
                 stft_config: _stft.StftConfig | None = None, loading: float = DEFAULT_LOADING,
                 ref_channels=None, guidance: SourceImageSet | None = None,
                 stage_tag: StageTag | None = None):
        self.config = stft_config or _stft.StftConfig()
        self.config.validate()
        if not estimator.causal:
            raise ConfigError(f"{estimator.kind.value} estimator is not usable in causal mode")
        self.estimator = estimator
        self.guidance = guidance
        self.stage_tag = stage_tag or StageTag()
        self.loading = loading
        self.num_sources = num_sources
        self.num_channels = num_channels
        self.ref_channels = list(ref_channels or range(1, num_channels + 1))
        frame, hop = self.config.frame_len, self.config.hop
        self.scms = ScmField.zeros(num_sources, self.config.num_bins, num_channels)
        self.aligner = CausalAligner(num_sources, num_channels)
        self._mix = np.zeros((num_channels, frame))
        self._est = np.zeros((num_sources, num_channels, frame))
        self._out = np.zeros((num_sources, len(self.ref_channels), frame))
        self._norm = np.zeros(frame)
        self._win_sq = self.config.window_array() ** 2
        self.frames_done = 0
        self.received = 0
        self._input_closed = False
        self._skip = self.config.head_pad  # leading output positions before sample 0
        self._emitted = 0
        self._hop = hop

    def _roll_in(self, buf, block):
        hop = self._hop
        buf[..., :-hop] = buf[..., hop:]
        buf[..., -hop:] = block

    def _process_frame(self, mix_block, est_block, real_samples):
        self._roll_in(self._mix, mix_block)
        self._roll_in(self._est, est_block)
        if real_samples:
            self.aligner.update(est_block[..., :real_samples])
        else:
            self.aligner.pmap.history.append(list(self.aligner.pmap.perms))
        aligned = apply_orders(self._est, self.aligner.pmap.perms)
        mix_spec = _stft.analyze_frames(self._mix, self.config)
        src_spec = _stft.analyze_frames(aligned, self.config)
        causal_scm_update(self.scms, mix_spec, src_spec)
        out_spec = causal_mvdr_frame(self.scms, mix_spec, self.ref_channels, self.loading)
        self._out += _stft.synthesize_frames(out_spec, self.config)
        self._norm += self._win_sq
        self.frames_done += 1
        return self._emit()

    def _emit(self):
        hop = self._hop
        done = self._out[..., :hop] / np.where(self._norm[:hop] > 0, self._norm[:hop], 1.0)
        self._out[..., :-hop] = self._out[..., hop:]
        self._out[..., -hop:] = 0.0
        self._norm[:-hop] = self._norm[hop:]
        self._norm[-hop:] = 0.0
        skip = min(self._skip, hop)
        self._skip -= skip
        done = done[..., skip:]
        if self._input_closed:
            done = done[..., : max(0, self.received - self._emitted)]
        self._emitted += done.shape[-1]
        return done

    def push(self, block, index: int | None = None) -> np.ndarray:
        """Consume the next ``(C, k)`` block, ``k <= hop``; only the last block may be short."""
        if index is not None and index != self.frames_done:
            raise ConfigError(f"frame {index} delivered out of order (expected {self.frames_done})")
        if self._input_closed:
            raise ConfigError("stream already ended with a short block or flush")
        block = np.asarray(block, dtype=np.float64)
        hop = self._hop
        if block.ndim != 2 or block.shape[0] != self.num_channels or not 0 < block.shape[1] <= hop:
            raise DimensionError(f"block shape {block.shape} must be ({self.num_channels}, 1..{hop})")
        k = block.shape[1]
        est = estimate_block(self.estimator, self.received, self.received + k, self.guidance, self.stage_tag)
        if est.shape[:2] != (self.num_sources, self.num_channels):
            raise DimensionError(f"estimator block {est.shape} does not match session")
        self.received += k
        if k < hop:
            self._input_closed = True
            block = np.pad(block, [(0, 0), (0, hop - k)])
            est = np.pad(est, [(0, 0), (0, 0), (0, hop - k)])
        return self._process_frame(block, est, k)

    def flush(self) -> np.ndarray:
        """Run the trailing frames on silence and return every remaining output sample."""
        self._input_closed = True
        hop = self._hop
        chunks = []
        total = self.config.num_frames(self.received)
        while self.frames_done < total:
            chunks.append(self._process_frame(np.zeros((self.num_channels, hop)),
                                              np.zeros((self.num_sources, self.num_channels, hop)), 0))
        if not chunks:
            return np.zeros((self.num_sources, len(self.ref_channels), 0))
        return np.concatenate(chunks, axis=-1)

    def raw_estimates(self) -> np.ndarray:
        return self.aligner.signals


def stream_blocks(mixture: MultichannelWaveform, hop: int):
    n = mixture.num_samples
    for start in range(0, n, hop):
        yield mixture.samples[:, start:start + hop]


def run_causal_pass(estimator: EstimatorSpec, mixture: MultichannelWaveform, num_sources: int,
                    stft_config: _stft.StftConfig | None = None, loading: float = DEFAULT_LOADING,
                    ref_channels=None, guidance: SourceImageSet | None = None,
                    stage_tag: StageTag | None = None) -> tuple[np.ndarray, CausalSession]:
    """Stream a whole mixture through one session; returns ``(S, R, N)`` output and the session."""
    session = CausalSession(estimator, num_sources, mixture.num_channels, stft_config, loading,
                            ref_channels, guidance, stage_tag)
    chunks = [session.push(block) for block in stream_blocks(mixture, session.config.hop)]
    chunks.append(session.flush())
    return np.concatenate(chunks, axis=-1), session


def _num_sources(spec: EstimatorSpec, guidance: SourceImageSet | None) -> int:
    if spec.truth is not None:
        return spec.truth.num_sources
    if spec.external:
        return next(iter(spec.external.values())).num_sources
    if guidance is not None:
        return guidance.num_sources
    raise ConfigError("cannot infer the number of sources")


def run_causal_stream(config: PipelineConfig, mixture: MultichannelWaveform) -> tuple[SourceImageSet, StageTrace]:
    """Causal counterpart of ``run_iterative``.

    Every pass is a full causal stream.  A stage-2 pass takes the previous
    pass output as time-aligned guidance, so each refinement pass adds
    ``frame_len - hop`` samples of latency on top of the first.
    """
    config.validate()
    trace = StageTrace()
    xhat = None
    for tag in _stage_tags(config.iterations):
        spec = config.estimator_stage1 if tag.stage == 1 else config.estimator_stage2
        try:
            out, session = run_causal_pass(spec, mixture, _num_sources(spec, xhat), config.stft,
                                           config.loading, None, xhat, tag)
        except BeamGuideError as exc:
            raise _annotate(exc, tag) from exc
        xhat = SourceImageSet(out, mixture.sample_rate, Provenance.BEAMFORMED, tag)
        raw = session.raw_estimates()[..., : mixture.num_samples]
        zhat = SourceImageSet(apply_orders(raw, session.aligner.pmap.perms), mixture.sample_rate,
                              Provenance.ESTIMATED, tag)
        trace.entries.append(TraceEntry(tag, zhat, xhat, session.aligner.pmap, scm_summary(session.scms)))
    return xhat, trace


def run(config: PipelineConfig, mixture: MultichannelWaveform) -> tuple[SourceImageSet, StageTrace]:
    config.validate()
    if config.mode == "causal":
        return run_causal_stream(config, mixture)
    return run_iterative(config, mixture)
