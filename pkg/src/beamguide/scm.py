"""Target/interference spatial correlation matrices, batch and recursive."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .linalg import hermitize
from .stft import ComplexSpectrogram


@dataclass(eq=False)
class ScmField:
    """Per-source, per-bin SCM pairs, each ``(S, F, C, C)``.

    A causal session mutates one of these in place through ``causal_scm_update``
    (which also returns it); batch results are never modified afterwards.
    """

    target: np.ndarray
    interfer: np.ndarray
    frames_seen: int

    @classmethod
    def zeros(cls, num_sources: int, num_bins: int, num_channels: int) -> "ScmField":
        shape = (num_sources, num_bins, num_channels, num_channels)
        return cls(np.zeros(shape, complex), np.zeros(shape, complex), 0)

    @property
    def num_sources(self) -> int:
        return self.target.shape[0]

    @property
    def num_bins(self) -> int:
        return self.target.shape[1]

    @property
    def num_channels(self) -> int:
        return self.target.shape[-1]

    def copy(self) -> "ScmField":
        return ScmField(self.target.copy(), self.interfer.copy(), self.frames_seen)

    def permuted(self, order) -> "ScmField":
        order = list(order)
        return ScmField(self.target[order], self.interfer[order], self.frames_seen)


def _stack_sources(mixture_spec, source_specs):
    mix = mixture_spec.bins if isinstance(mixture_spec, ComplexSpectrogram) else np.asarray(mixture_spec)
    srcs = []
    for s, spec in enumerate(source_specs):
        bins = spec.bins if isinstance(spec, ComplexSpectrogram) else np.asarray(spec)
        if bins.shape != mix.shape:
            raise DimensionError(
                f"source {s} spectrogram {bins.shape} does not match mixture {mix.shape}",
                source_index=s,
            )
        srcs.append(bins)
    if not srcs:
        raise DimensionError("need at least one source spectrogram")
    return mix, np.stack(srcs)


def batch_scms(mixture_spec, source_specs) -> ScmField:
    """Utterance averages of ``Z Z^H`` and ``(Y - Z)(Y - Z)^H`` per source and bin.

    ``mixture_spec`` is ``(C, T, F)``; ``source_specs`` is a sequence of S
    spectrograms of the same shape (or an ``(S, C, T, F)`` array).
    """
    mix, src = _stack_sources(mixture_spec, source_specs)
    num_frames = mix.shape[1]
    if num_frames == 0:
        raise DimensionError("no frames to average")
    res = mix[None] - src
    target = np.einsum("sctf,sdtf->sfcd", src, np.conj(src)) / num_frames
    interfer = np.einsum("sctf,sdtf->sfcd", res, np.conj(res)) / num_frames
    return ScmField(hermitize(target), hermitize(interfer), num_frames)


def causal_scm_update(state: ScmField, mixture_frame, source_frames) -> ScmField:
    """Growing-average update with one frame.

    ``mixture_frame`` is ``(C, F)``, ``source_frames`` is ``(S, C, F)``.  The
    state is updated in place and returned.
    """
    mix = np.asarray(mixture_frame, dtype=np.complex128)
    src = np.asarray(source_frames, dtype=np.complex128)
    expected = (state.num_sources, state.num_channels, state.num_bins)
    if src.shape != expected or mix.shape != expected[1:]:
        raise DimensionError(f"frame shapes {mix.shape}/{src.shape} do not match state {expected}")
    t = state.frames_seen + 1
    res = mix[None] - src
    cur_target = np.einsum("scf,sdf->sfcd", src, np.conj(src))
    cur_interfer = np.einsum("scf,sdf->sfcd", res, np.conj(res))
    decay = (t - 1) / t
    state.target = hermitize(decay * state.target + cur_target / t)
    state.interfer = hermitize(decay * state.interfer + cur_interfer / t)
    state.frames_seen = t
    return state
