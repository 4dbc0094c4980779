"""Small complex Hermitian kernels, vectorized over leading axes ``(..., C, C)``."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError, DimensionError, NumericalError

DEFAULT_LOADING = 1e-6
LOADING_FLOOR = 1e-10


def hermitize(m: np.ndarray) -> np.ndarray:
    """Keep the upper triangle and mirror its conjugate into the lower one."""
    m = np.array(m, dtype=np.complex128)
    dim = m.shape[-1]
    lower = np.tril_indices(dim, -1)
    m[..., lower[0], lower[1]] = np.conj(m[..., lower[1], lower[0]])
    diag = np.arange(dim)
    m[..., diag, diag] = m[..., diag, diag].real
    return m


def outer(v: np.ndarray) -> np.ndarray:
    """``v v^H`` for ``(..., C)`` vectors, exactly Hermitian."""
    v = np.asarray(v, dtype=np.complex128)
    return hermitize(v[..., :, None] * np.conj(v[..., None, :]))


def outer_product_accumulate(acc: np.ndarray, v: np.ndarray, weight: float = 1.0) -> np.ndarray:
    acc = np.asarray(acc, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if acc.shape[-2:] != (v.shape[-1], v.shape[-1]) or acc.shape[:-2] != v.shape[:-1]:
        raise DimensionError(f"accumulator {acc.shape} incompatible with vector {v.shape}")
    if not np.isfinite(weight):
        raise ConfigError(f"weight must be finite, got {weight}")
    return hermitize(acc + weight * (v[..., :, None] * np.conj(v[..., None, :])))


def trace(m: np.ndarray) -> np.ndarray:
    return np.trace(m, axis1=-2, axis2=-1)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    m, v = np.asarray(m), np.asarray(v)
    if m.shape[-1] != v.shape[-1]:
        raise DimensionError(f"cannot multiply {m.shape} by vector {v.shape}")
    return np.einsum("...ij,...j->...i", m, v)


def one_hot(channel: int, num_channels: int) -> np.ndarray:
    """Reference selector; ``channel`` is 1-based."""
    if not 1 <= channel <= num_channels:
        raise ConfigError(f"channel {channel} outside [1, {num_channels}]")
    u = np.zeros(num_channels)
    u[channel - 1] = 1.0
    return u


def loading_amount(m: np.ndarray, loading: float) -> np.ndarray:
    mean_diag = trace(m).real / m.shape[-1]
    return loading * np.maximum(mean_diag, LOADING_FLOOR)


def regularized_inverse(m: np.ndarray, loading: float = DEFAULT_LOADING) -> np.ndarray:
    """Inverse of ``m + eps*I`` with ``eps = loading * max(trace(m)/C, 1e-10)``.

    Solved through a Cholesky factor; the result is re-hermitized.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.shape[-1] != m.shape[-2]:
        raise DimensionError(f"expected square matrices, got {m.shape}")
    if loading < 0:
        raise ConfigError(f"loading must be >= 0, got {loading}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("matrix has non-finite entries")
    dim = m.shape[-1]
    eye = np.eye(dim)
    loaded = m + loading_amount(m, loading)[..., None, None] * eye
    try:
        chol = np.linalg.cholesky(loaded)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is not positive definite after loading") from exc
    chol_inv = np.linalg.solve(chol, np.broadcast_to(eye, chol.shape))
    return hermitize(np.conj(np.swapaxes(chol_inv, -1, -2)) @ chol_inv)
