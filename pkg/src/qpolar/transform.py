"""The polarizing map G_n over Z_q, its inverse, and the matrix reference form.

``transform`` follows the recursive definition directly: G_{k+1} applied to
(x_first, x_second) interleaves G_k(x_first) + G_k(x_second) (even output
slots) with G_k(x_second) (odd output slots). It runs bottom-up in n stages,
so a length-N word costs O(N log N) symbol operations. Leading axes of the
input are treated as a batch.
"""

from __future__ import annotations

import numpy as np

from .errors import PolarError

MAX_MATRIX_DEPTH = 10


def _depth(length: int) -> int:
    if length < 1 or length & (length - 1):
        raise PolarError(f"length {length} is not a power of two")
    return length.bit_length() - 1


def _as_symbols(x, q):
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.integer):
        raise PolarError("symbols must be integers")
    if x.size and (x.min() < 0 or x.max() >= q):
        raise PolarError(f"symbols must lie in [0, {q})")
    return x.astype(np.int64)


def transform(x, q: int) -> np.ndarray:
    """U = G_n x (mod q) for x of length 2**n along the last axis."""
    x = _as_symbols(x, q)
    N = x.shape[-1]
    _depth(N)
    lead = x.shape[:-1]
    v = x.reshape(lead + (N, 1))
    s = 1
    while s < N:
        v = v.reshape(lead + (N // (2 * s), 2, s))
        a, b = v[..., 0, :], v[..., 1, :]
        v = np.stack(((a + b) % q, b), axis=-1).reshape(lead + (N // (2 * s), 2 * s))
        s *= 2
    return v.reshape(lead + (N,))


def inverse_transform(u, q: int) -> np.ndarray:
    """x = G_n^{-1} u (mod q): the same butterfly run backwards with subtraction."""
    u = _as_symbols(u, q)
    N = u.shape[-1]
    _depth(N)
    lead = u.shape[:-1]
    v = u.reshape(lead + (1, N))
    s = N // 2
    while s >= 1:
        v = v.reshape(lead + (N // (2 * s), s, 2))
        even, odd = v[..., 0], v[..., 1]
        v = np.stack(((even - odd) % q, odd), axis=-2).reshape(lead + (N // s, s))
        s //= 2
    return v.reshape(lead + (N,))


def bit_reversal_perm(n: int) -> np.ndarray:
    """perm[i] = integer whose n-bit binary expansion is that of i reversed."""
    if n < 0:
        raise PolarError("depth must be nonnegative")
    idx = np.arange(1 << n)
    rev = np.zeros_like(idx)
    for b in range(n):
        rev |= ((idx >> b) & 1) << (n - 1 - b)
    return rev


def transform_matrix(n: int, q: int, max_depth: int = MAX_MATRIX_DEPTH) -> np.ndarray:
    """The 2^n x 2^n matrix B_n K^{(x)n} mod q, with K = [[1, 1], [0, 1]]."""
    if n < 0:
        raise PolarError("depth must be nonnegative")
    if n > max_depth:
        raise PolarError(f"matrix form limited to n <= {max_depth}")
    K = np.array([[1, 1], [0, 1]], dtype=np.int64)
    M = np.ones((1, 1), dtype=np.int64)
    for _ in range(n):
        M = np.kron(M, K)
    return M[bit_reversal_perm(n)] % q
