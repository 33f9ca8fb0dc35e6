import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qpolar import errors
from qpolar.transform import bit_reversal_perm, inverse_transform, transform, transform_matrix

from _oracles import kron_matrix, recursive_transform


def test_small_examples():
    assert transform([2, 2], 3).tolist() == [1, 2]
    x = np.array([1, 2, 3, 4])
    assert transform(x, 5).tolist() == [10 % 5, 7 % 5, 6 % 5, 4]
    assert transform(np.zeros(8, dtype=int), 3).tolist() == [0] * 8
    assert inverse_transform([1, 2], 3).tolist() == [(1 - 2) % 3, 2]
    assert inverse_transform(np.zeros(4, dtype=int), 2).tolist() == [0] * 4


def test_matrix_examples():
    assert transform_matrix(0, 3).tolist() == [[1]]
    assert transform_matrix(1, 3).tolist() == [[1, 1], [0, 1]]
    assert transform_matrix(2, 3).tolist() == [[1, 1, 1, 1], [0, 0, 1, 1], [0, 1, 0, 1], [0, 0, 0, 1]]
    assert bit_reversal_perm(1).tolist() == [0, 1]
    assert bit_reversal_perm(2).tolist() == [0, 2, 1, 3]
    for n in range(6):
        p = bit_reversal_perm(n)
        assert np.array_equal(p[p], np.arange(1 << n))


@pytest.mark.parametrize("q", [2, 3, 5])
@pytest.mark.parametrize("n", [0, 1, 2])
def test_exhaustive_against_oracles(q, n):
    M = kron_matrix(n)
    X = np.array(list(itertools.product(range(q), repeat=1 << n)))
    U = transform(X, q)
    assert np.array_equal(U, X @ M.T % q)
    assert np.array_equal(U, np.array([recursive_transform(x, q) for x in X]))
    assert np.array_equal(transform_matrix(n, q), M % q)


def test_errors():
    with pytest.raises(errors.PolarError):
        transform([0, 1, 2], 3)
    with pytest.raises(errors.PolarError):
        transform([0, 3], 3)
    with pytest.raises(errors.PolarError):
        transform(np.array([0.0, 1.0]), 3)
    with pytest.raises(errors.PolarError):
        transform_matrix(11, 2)


@given(st.integers(2, 7), st.integers(0, 16), st.integers(0, 2**32 - 1))
def test_inverse_round_trip(q, n, seed):
    x = np.random.default_rng(seed).integers(0, q, 1 << n)
    assert np.array_equal(inverse_transform(transform(x, q), q), x)
    assert np.array_equal(transform(inverse_transform(x, q), q), x)


@given(st.integers(2, 7), st.integers(0, 8), st.integers(0, 2**32 - 1))
def test_linearity_and_matrix(q, n, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.integers(0, q, (2, 1 << n))
    assert np.array_equal(transform((x + y) % q, q), (transform(x, q) + transform(y, q)) % q)
    if n <= 6:
        assert np.array_equal(transform(x, q), transform_matrix(n, q) @ x % q)


def test_batched_matches_rows():
    rng = np.random.default_rng(4)
    X = rng.integers(0, 3, (5, 7, 16))
    U = transform(X, 3)
    assert np.array_equal(U[2, 3], transform(X[2, 3], 3))
