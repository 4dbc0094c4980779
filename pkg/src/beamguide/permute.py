"""Channel-wise source ordering, aligned to the order on channel 1.

Permutations are 0-based tuples: ``perm[s]`` is the index of the raw estimate
on channel ``c`` that becomes source ``s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .metrics import best_permutation, snr
from .signal import SourceImageSet

MAX_SOURCES = 6


@dataclass
class PermutationMap:
    perms: list[tuple[int, ...]]  # one per channel, perms[0] is identity
    history: list[list[tuple[int, ...]]] = field(default_factory=list)  # causal: per frame

    @property
    def num_channels(self) -> int:
        return len(self.perms)

    def is_identity(self) -> bool:
        return all(p == tuple(range(len(p))) for p in self.perms)


def _check_sources(num_sources, limit):
    if num_sources < 1:
        raise DimensionError("need at least one source")
    if num_sources > limit:
        raise ConfigError(
            f"{num_sources} sources exceed the exhaustive permutation limit {limit}; "
            "assignment solvers for larger S are not provided"
        )


def snr_matrix(reference: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """``out[s, k] = SNR(candidates[k], reference[s])`` for ``(S, N)`` inputs."""
    num = reference.shape[0]
    return np.array([[snr(candidates[k], reference[s]) for k in range(num)] for s in range(num)])


def channel_orders(images: np.ndarray, limit: int = MAX_SOURCES) -> list[tuple[int, ...]]:
    """Per-channel orders for an ``(S, C, N)`` array, using channel 1 as reference."""
    num_src, num_ch = images.shape[:2]
    _check_sources(num_src, limit)
    ident = tuple(range(num_src))
    orders = [ident]
    for c in range(1, num_ch):
        orders.append(best_permutation(snr_matrix(images[:, 0], images[:, c])))
    return orders


def apply_orders(images: np.ndarray, orders) -> np.ndarray:
    out = np.empty_like(images)
    for c, perm in enumerate(orders):
        out[:, c] = images[list(perm), c]
    return out


def batch_align(images: SourceImageSet, limit: int = MAX_SOURCES) -> tuple[SourceImageSet, PermutationMap]:
    """Reorder sources on every channel to match channel 1 (SNR similarity, exhaustive search)."""
    orders = channel_orders(images.images, limit)
    pmap = PermutationMap(orders)
    if pmap.is_identity():
        return images, pmap
    return images.replace(images=apply_orders(images.images, orders)), pmap


class CausalAligner:
    """Frame-by-frame ordering from all samples received so far.

    Keeps the raw (unordered) estimates; each call to ``update`` appends the
    newest samples and re-solves the order on the cumulative prefix.
    """

    def __init__(self, num_sources: int, num_channels: int, limit: int = MAX_SOURCES):
        _check_sources(num_sources, limit)
        self.num_sources = num_sources
        self.num_channels = num_channels
        self._chunks: list[np.ndarray] = []
        self.received = 0
        self.pmap = PermutationMap([tuple(range(num_sources))] * num_channels)

    @property
    def signals(self) -> np.ndarray:
        if not self._chunks:
            return np.zeros((self.num_sources, self.num_channels, 0))
        if len(self._chunks) > 1:
            self._chunks = [np.concatenate(self._chunks, axis=-1)]
        return self._chunks[0]

    def update(self, new_samples: np.ndarray) -> PermutationMap:
        return causal_align_frame(self, new_samples)


def causal_align_frame(state: CausalAligner, new_frames: np.ndarray) -> PermutationMap:
    """Append ``(S, C, k)`` new samples and recompute every channel's order on the prefix."""
    new = np.asarray(new_frames, dtype=np.float64)
    if new.shape[:2] != (state.num_sources, state.num_channels):
        raise DimensionError(f"frame block {new.shape} does not match ({state.num_sources}, {state.num_channels}, k)")
    state._chunks.append(new)
    state.received += new.shape[-1]
    orders = channel_orders(state.signals)
    state.pmap.perms = orders
    state.pmap.history.append(orders)
    return state.pmap
