"""SNR and BSS-Eval SDR, plus best-permutation reports over source image sets."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateSignalError, DimensionError
from .signal import SourceImageSet

CLAMP_DB = 100.0
DEFAULT_TAPS = 512
MAX_PERMUTATION_SOURCES = 6


def _check_pair(estimate, reference):
    est = np.asarray(estimate, dtype=np.float64).ravel()
    ref = np.asarray(reference, dtype=np.float64).ravel()
    if est.shape != ref.shape:
        raise DimensionError(f"length mismatch: estimate {est.shape} vs reference {ref.shape}")
    return est, ref


def ratio_db(num: float, den: float) -> tuple[float, bool]:
    """``10 log10(num / den)`` clamped to +-100 dB; second item flags the clamp."""
    if den <= 0.0:
        return (CLAMP_DB, True) if num > 0.0 else (0.0, True)
    if num <= 0.0:
        return -CLAMP_DB, True
    value = 10.0 * np.log10(num / den)
    if value > CLAMP_DB:
        return CLAMP_DB, True
    if value < -CLAMP_DB:
        return -CLAMP_DB, True
    return float(value), False


def snr_clamped(estimate, reference) -> tuple[float, bool]:
    est, ref = _check_pair(estimate, reference)
    ref_energy = float(ref @ ref)
    if ref_energy == 0.0:
        return 0.0, True
    err = ref - est
    return ratio_db(ref_energy, float(err @ err))


def snr(estimate, reference) -> float:
    """Reference power over error power in dB; a silent reference scores 0 dB."""
    return snr_clamped(estimate, reference)[0]


def _autocorr(x: np.ndarray, lags: int, nfft: int) -> np.ndarray:
    spec = np.fft.rfft(x, nfft)
    return np.fft.irfft(np.abs(spec) ** 2, nfft)[:lags]


def _xcorr(ref: np.ndarray, est: np.ndarray, lags: int, nfft: int) -> np.ndarray:
    # out[k] = sum_n ref[n] est[n + k]
    return np.fft.irfft(np.conj(np.fft.rfft(ref, nfft)) * np.fft.rfft(est, nfft), nfft)[:lags]


def distortion_filter(estimate, reference, taps: int = DEFAULT_TAPS) -> np.ndarray:
    """Least-squares FIR mapping ``reference`` onto ``estimate`` (Toeplitz normal equations)."""
    est, ref = _check_pair(estimate, reference)
    if taps < 1:
        raise ValueError(f"taps must be >= 1, got {taps}")
    if est.size <= taps:
        raise DimensionError(f"signal length {est.size} must exceed taps={taps}")
    if not np.any(ref):
        raise DegenerateSignalError("reference signal is all zero")
    nfft = 1 << int(np.ceil(np.log2(est.size + taps - 1)))
    r = _autocorr(ref, taps, nfft)
    b = _xcorr(ref, est, taps, nfft)
    gram = scipy.linalg.toeplitz(r)
    gram[np.diag_indices(taps)] += 1e-10 * r[0]
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), b)


def bsseval_sdr_clamped(estimate, reference, taps: int = DEFAULT_TAPS) -> tuple[float, bool]:
    est, ref = _check_pair(estimate, reference)
    coef = distortion_filter(est, ref, taps)
    s_target = np.convolve(ref, coef)
    err = np.concatenate([est, np.zeros(taps - 1)]) - s_target
    return ratio_db(float(s_target @ s_target), float(err @ err))


def bsseval_sdr(estimate, reference, taps: int = DEFAULT_TAPS) -> float:
    """SDR after projecting ``estimate`` on the span of ``reference`` delayed by 0..taps-1."""
    return bsseval_sdr_clamped(estimate, reference, taps)[0]


def best_permutation(score: np.ndarray) -> tuple[int, ...]:
    """Permutation ``p`` maximizing ``sum_s score[s, p[s]]``; ties keep the first in lexicographic order."""
    num = score.shape[0]
    if num > MAX_PERMUTATION_SOURCES:
        raise ValueError(
            f"{num} sources exceed the exhaustive-search limit of {MAX_PERMUTATION_SOURCES}"
        )
    best, best_val = None, -np.inf
    rows = np.arange(num)
    for perm in itertools.permutations(range(num)):
        val = score[rows, list(perm)].sum()
        if val > best_val:
            best, best_val = perm, val
    return best


@dataclass
class MetricReport:
    """Scores of ``S`` estimates at each reference channel.

    ``sdr_db[s, k]`` scores estimate ``s`` against truth source
    ``permutation[k][s]`` at channel ``ref_channels[k]`` (1-based).
    """

    ref_channels: list[int]
    sdr_db: np.ndarray
    snr_db: np.ndarray
    permutation: list[tuple[int, ...]]
    sdr_clamped: np.ndarray
    snr_clamped: np.ndarray
    taps: int = DEFAULT_TAPS
    extra: dict = field(default_factory=dict)

    @property
    def mean_sdr(self) -> float:
        return float(np.mean(self.sdr_db))

    @property
    def mean_snr(self) -> float:
        return float(np.mean(self.snr_db))

    def to_dict(self) -> dict:
        return {
            "ref_channels": list(self.ref_channels),
            "taps": self.taps,
            "sdr_db": self.sdr_db.tolist(),
            "snr_db": self.snr_db.tolist(),
            "sdr_clamped": self.sdr_clamped.tolist(),
            "snr_clamped": self.snr_clamped.tolist(),
            "permutation": [list(p) for p in self.permutation],
            "mean_sdr_db": self.mean_sdr,
            "mean_snr_db": self.mean_snr,
        }


def report(output: SourceImageSet, truth: SourceImageSet, ref_channel=1,
           taps: int = DEFAULT_TAPS) -> MetricReport:
    """Score ``output`` against ``truth`` under the source permutation maximizing mean SDR."""
    if output.images.shape != truth.images.shape:
        raise DimensionError(f"output {output.images.shape} vs truth {truth.images.shape}")
    refs = [ref_channel] if np.isscalar(ref_channel) else list(ref_channel)
    num_src = output.num_sources
    sdr = np.zeros((num_src, len(refs)))
    snr_ = np.zeros_like(sdr)
    sdr_flag = np.zeros(sdr.shape, bool)
    snr_flag = np.zeros(sdr.shape, bool)
    perms = []
    for k, ref in enumerate(refs):
        if not 1 <= ref <= output.num_channels:
            raise DimensionError(f"reference channel {ref} outside [1, {output.num_channels}]")
        est = output.images[:, ref - 1]
        tru = truth.images[:, ref - 1]
        pair = [[bsseval_sdr_clamped(est[i], tru[j], taps) for j in range(num_src)]
                for i in range(num_src)]
        perm = best_permutation(np.array([[p[0] for p in row] for row in pair]))
        perms.append(perm)
        for s, j in enumerate(perm):
            sdr[s, k], sdr_flag[s, k] = pair[s][j]
            snr_[s, k], snr_flag[s, k] = snr_clamped(est[s], tru[j])
    return MetricReport(refs, sdr, snr_, perms, sdr_flag, snr_flag, taps)


def mixture_sdr(mixture, truth: SourceImageSet, ref_channel: int = 1, taps: int = DEFAULT_TAPS) -> np.ndarray:
    """SDR of the unprocessed mixture against each source image at ``ref_channel``."""
    mix = mixture.samples if hasattr(mixture, "samples") else np.asarray(mixture)
    return np.array([bsseval_sdr(mix[ref_channel - 1], truth.images[s, ref_channel - 1], taps)
                     for s in range(truth.num_sources)])
