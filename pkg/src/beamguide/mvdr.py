"""Souden MVDR weights from SCM pairs, and their application to mixture spectra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stft as _stft
from .errors import ConfigError, DimensionError, NumericalError
from .linalg import DEFAULT_LOADING, one_hot, regularized_inverse, trace
from .scm import ScmField
from .signal import Provenance, SourceImageSet, StageTag

TRACE_FALLBACK = 1e-12


@dataclass(frozen=True, eq=False)
class BeamformerWeights:
    w: np.ndarray  # (S, F, C)
    reference_channel: int  # 1-based


def _souden_numerator(scms: ScmField, loading: float) -> np.ndarray:
    if not (np.all(np.isfinite(scms.target)) and np.all(np.isfinite(scms.interfer))):
        raise NumericalError("SCMs contain non-finite values")
    return regularized_inverse(scms.interfer, loading) @ scms.target


def _weights_for_ref(numer: np.ndarray, ref: int) -> BeamformerWeights:
    u = one_hot(ref, numer.shape[-1])
    tr = trace(numer)
    degenerate = np.abs(tr) < TRACE_FALLBACK
    safe_tr = np.where(degenerate, 1.0, tr)
    w = numer[..., :, ref - 1] / safe_tr[..., None]
    w = np.where(degenerate[..., None], u, w)
    if not np.all(np.isfinite(w)):
        raise NumericalError("beamformer weights are not finite")
    return BeamformerWeights(w, ref)


def souden_weights(scms: ScmField, ref: int = 1, loading: float = DEFAULT_LOADING) -> BeamformerWeights:
    """``w = (Phi_I^-1 Phi_T / tr(Phi_I^-1 Phi_T)) u_ref`` per source and bin.

    Bins whose trace magnitude falls below ``TRACE_FALLBACK`` pass the reference
    channel through unchanged.
    """
    one_hot(ref, scms.num_channels)
    return _weights_for_ref(_souden_numerator(scms, loading), ref)


def souden_weights_all(scms: ScmField, refs=None, loading: float = DEFAULT_LOADING) -> list[BeamformerWeights]:
    """Weights for several reference channels sharing one inverse; same values as ``souden_weights``."""
    refs = range(1, scms.num_channels + 1) if refs is None else refs
    for ref in refs:
        one_hot(ref, scms.num_channels)
    numer = _souden_numerator(scms, loading)
    return [_weights_for_ref(numer, ref) for ref in refs]


def beamform_apply(weights: BeamformerWeights, mixture_spec) -> np.ndarray:
    """``out[s, t, f] = w[s, f]^H Y[:, t, f]``; returns ``(S, T, F)``."""
    mix = mixture_spec.bins if isinstance(mixture_spec, _stft.ComplexSpectrogram) else np.asarray(mixture_spec)
    if weights.w.shape[1:] != (mix.shape[2], mix.shape[0]):
        raise DimensionError(f"weights {weights.w.shape} do not fit mixture spectra {mix.shape}")
    return np.einsum("sfc,ctf->stf", np.conj(weights.w), mix)


def beamform_reference(scms: ScmField, mixture_spec: _stft.ComplexSpectrogram, ref: int,
                       loading: float = DEFAULT_LOADING) -> np.ndarray:
    """Single-reference path: weights, filtering and synthesis.  Returns ``(S, N)``."""
    out = beamform_apply(souden_weights(scms, ref, loading), mixture_spec)
    frames = _stft.synthesize_frames(out, mixture_spec.config)
    return _stft.overlap_add(frames, mixture_spec.config, mixture_spec.original_len)


def mimmo_beamform(scms: ScmField, mixture_spec: _stft.ComplexSpectrogram,
                   loading: float = DEFAULT_LOADING, stage_tag: StageTag | None = None) -> SourceImageSet:
    """Beamform every source towards every microphone in turn."""
    if scms.num_channels != mixture_spec.num_channels or scms.num_bins != mixture_spec.num_bins:
        raise DimensionError("SCM field does not match mixture spectra")
    per_ref = [beamform_reference(scms, mixture_spec, c, loading)
               for c in range(1, mixture_spec.num_channels + 1)]
    return SourceImageSet(np.stack(per_ref, axis=1), mixture_spec.sample_rate,
                          Provenance.BEAMFORMED, stage_tag or StageTag())


def causal_mvdr_frame(state_scms: ScmField, mixture_frame, ref=1,
                      loading: float = DEFAULT_LOADING) -> np.ndarray:
    """Filter one ``(C, F)`` mixture frame with weights from the running SCMs.

    ``ref`` is one channel (result ``(S, F)``) or a sequence of channels
    (result ``(S, R, F)``).
    """
    if state_scms.frames_seen < 1:
        raise ConfigError("causal MVDR needs at least one accumulated frame")
    mix = np.asarray(mixture_frame)
    if mix.shape != (state_scms.num_channels, state_scms.num_bins):
        raise DimensionError(f"frame {mix.shape} does not match SCM state")
    if np.isscalar(ref):
        weights = souden_weights(state_scms, ref, loading)
        return np.einsum("sfc,cf->sf", np.conj(weights.w), mix)
    out = [np.einsum("sfc,cf->sf", np.conj(w.w), mix) for w in souden_weights_all(state_scms, ref, loading)]
    return np.stack(out, axis=1)
