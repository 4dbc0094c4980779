import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from beamguide import linalg
from beamguide.errors import ConfigError, DimensionError, NumericalError

from conftest import random_complex, random_psd


def naive_matmul(a, b):
    n = a.shape[0]
    out = np.zeros((n, n), complex)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                out[i, j] += a[i, k] * b[k, j]
    return out


def test_outer_accumulate_closed_form():
    out = linalg.outer_product_accumulate(np.zeros((2, 2)), np.array([1, 1j]), 1.0)
    assert_array_equal(out, [[1, -1j], [1j, 1]])


def test_zero_vector_leaves_accumulator(rng):
    acc = random_psd(rng, 3)
    out = linalg.outer_product_accumulate(acc, np.zeros(3), 0.5)
    assert_allclose(out, acc, atol=1e-15)


def test_constant_vector_average(rng):
    v = random_complex(rng, 4)
    t = 37
    acc = np.zeros((4, 4), complex)
    for _ in range(t):
        acc = linalg.outer_product_accumulate(acc, v, 1.0 / t)
    assert np.linalg.norm(acc - np.outer(v, v.conj())) <= 1e-12 * max(1.0, np.linalg.norm(v) ** 2)


def test_accumulate_is_exactly_hermitian(rng):
    acc = np.zeros((4, 4), complex)
    for _ in range(10):
        acc = linalg.outer_product_accumulate(acc, random_complex(rng, 4), rng.uniform(0.1, 3))
    assert_array_equal(acc, acc.conj().T)


def test_accumulate_rejects_bad_input():
    with pytest.raises(DimensionError):
        linalg.outer_product_accumulate(np.zeros((3, 3)), np.ones(2))
    with pytest.raises(ConfigError):
        linalg.outer_product_accumulate(np.zeros((2, 2)), np.ones(2), np.inf)


def test_inverse_of_identity_without_loading():
    assert_allclose(linalg.regularized_inverse(np.eye(4), 0.0), np.eye(4), atol=1e-15)


def test_rank_deficient_inverse_is_finite():
    m = np.array([[1.0, 0.0], [0.0, 0.0]])
    inv = linalg.regularized_inverse(m, 1e-6)
    eps = 1e-6 * 0.5
    assert np.all(np.isfinite(inv))
    assert np.max(np.abs((m + eps * np.eye(2)) @ inv - np.eye(2))) <= 1e-6


def test_random_psd_multiply_back(rng):
    m = random_psd(rng, 4)
    eps = 1e-6 * np.trace(m).real / 4
    inv = linalg.regularized_inverse(m)
    assert np.linalg.norm(inv @ (m + eps * np.eye(4)) - np.eye(4)) <= 1e-8


def test_zero_matrix_uses_floor():
    inv = linalg.regularized_inverse(np.zeros((3, 3)), 1e-6)
    assert_allclose(inv, np.eye(3) / (1e-6 * 1e-10), rtol=1e-12)


def test_inverse_rejects_non_finite():
    m = np.eye(2)
    m[0, 1] = np.nan
    with pytest.raises(NumericalError):
        linalg.regularized_inverse(m)


def test_trace_and_one_hot():
    assert linalg.trace(np.eye(4)) == 4
    assert_array_equal(linalg.one_hot(1, 4), [1.0, 0.0, 0.0, 0.0])
    assert_array_equal(linalg.one_hot(4, 4), [0.0, 0.0, 0.0, 1.0])
    for bad in (0, 5):
        with pytest.raises(ConfigError):
            linalg.one_hot(bad, 4)


def test_matmul_matches_triple_loop(rng):
    a, b = random_complex(rng, 4, 4), random_complex(rng, 4, 4)
    assert np.max(np.abs(linalg.matmul(a, b) - naive_matmul(a, b))) <= 1e-13


def test_matvec_and_dimension_errors(rng):
    m, v = random_complex(rng, 3, 3), random_complex(rng, 3)
    oracle = np.array([sum(m[i, k] * v[k] for k in range(3)) for i in range(3)])
    assert_allclose(linalg.matvec(m, v), oracle, atol=1e-14)
    with pytest.raises(DimensionError):
        linalg.matmul(np.eye(3), np.eye(2))
    with pytest.raises(DimensionError):
        linalg.matvec(np.eye(3), np.ones(2))


def test_batched_inverse_matches_per_matrix(rng):
    stack = np.stack([random_psd(rng, 4) for _ in range(5)])
    batched = linalg.regularized_inverse(stack)
    for k in range(5):
        assert_allclose(batched[k], linalg.regularized_inverse(stack[k]), rtol=1e-12, atol=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.sampled_from([1e-8, 1e-6, 1e-3]))
def test_inverse_hermitian_and_positive(dim, seed, loading):
    rng = np.random.default_rng(seed)
    m = random_psd(rng, dim, rank=rng.integers(1, dim + 3))
    inv = linalg.regularized_inverse(m, loading)
    assert np.max(np.abs(inv - inv.conj().T)) <= 1e-12 * max(1.0, np.max(np.abs(inv)))
    for _ in range(5):
        v = random_complex(rng, dim)
        assert (v.conj() @ inv @ v).real > 0
