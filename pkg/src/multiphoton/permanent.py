"""Matrix permanents: a naive S_n oracle, a Gray-code Ryser evaluator, and the
Laplace block expansion.

per(A) = sum_sigma prod_alpha A[sigma(alpha), alpha].  The empty matrix has
permanent 1 (empty product), which the Laplace expansion relies on.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import SizeLimitError, ValidationError
from .symgroup import permutation_array

MAX_NAIVE_N = 9
MAX_RYSER_N = 24

try:  # optional JIT for large n; both paths sum in the same Gray-code order
    import numba as _nb
except ModuleNotFoundError:
    _nb = None


def _check_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if a.size and not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag))):
        raise ValidationError("matrix entries must be finite")
    return a


def permanent_naive(a: np.ndarray) -> complex:
    """Permanent by direct enumeration of S_n; the oracle for everything else.

    Capped at n <= 9 (n! terms).
    """
    a = _check_square(a)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n > MAX_NAIVE_N:
        raise SizeLimitError(f"permanent_naive capped at n <= {MAX_NAIVE_N}, got {n}")
    perms = permutation_array(n)
    cols = np.arange(n)
    return complex(np.sum(np.prod(a[perms, cols], axis=1)))


def _ryser_gray_py(a: np.ndarray) -> complex:
    n = a.shape[0]
    row_sums = np.zeros(n, dtype=complex)
    total = 0.0 + 0.0j
    prev_gray = 0
    size = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        flipped = (gray ^ prev_gray).bit_length() - 1
        if gray & (1 << flipped):
            row_sums += a[:, flipped]
            size += 1
        else:
            row_sums -= a[:, flipped]
            size -= 1
        prev_gray = gray
        term = np.prod(row_sums)
        if (n - size) % 2 == 0:
            total += term
        else:
            total -= term
    return complex(total)


if _nb is not None:

    @_nb.njit(cache=True)
    def _ryser_gray_jit(a):  # pragma: no cover - exercised via permanent_ryser
        n = a.shape[0]
        row_sums = np.zeros(n, dtype=np.complex128)
        total = 0.0 + 0.0j
        prev_gray = 0
        size = 0
        for k in range(1, 1 << n):
            gray = k ^ (k >> 1)
            diff = gray ^ prev_gray
            flipped = -1
            while diff:
                diff >>= 1
                flipped += 1
            if gray & (1 << flipped):
                for i in range(n):
                    row_sums[i] += a[i, flipped]
                size += 1
            else:
                for i in range(n):
                    row_sums[i] -= a[i, flipped]
                size -= 1
            prev_gray = gray
            term = 1.0 + 0.0j
            for i in range(n):
                term *= row_sums[i]
            if (n - size) % 2 == 0:
                total += term
            else:
                total -= term
        return total


def permanent_ryser(a: np.ndarray) -> complex:
    """Ryser inclusion-exclusion with Gray-code subset updates, O(2^n n).

    Matches permanent_naive to 1e-10 relative for n <= 9; capped at n <= 24.
    """
    a = _check_square(a)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n > MAX_RYSER_N:
        raise SizeLimitError(f"permanent_ryser capped at n <= {MAX_RYSER_N}, got {n}")
    if _nb is not None and n >= 12:
        return complex(_ryser_gray_jit(np.ascontiguousarray(a)))
    return _ryser_gray_py(a)


def permanent_ryser_batch(stack: np.ndarray) -> np.ndarray:
    """Permanents of a (B, n, n) stack, vectorized over the batch axis.

    Used by the probability engines for many small permanents; same
    Gray-code summation order as permanent_ryser.
    """
    stack = np.asarray(stack, dtype=complex)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValidationError(f"expected (B, n, n) stack, got shape {stack.shape}")
    b, n, _ = stack.shape
    if n == 0:
        return np.ones(b, dtype=complex)
    if n > 16:
        raise SizeLimitError("batched permanents capped at n <= 16")
    row_sums = np.zeros((b, n), dtype=complex)
    total = np.zeros(b, dtype=complex)
    prev_gray = 0
    size = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        flipped = (gray ^ prev_gray).bit_length() - 1
        if gray & (1 << flipped):
            row_sums += stack[:, :, flipped]
            size += 1
        else:
            row_sums -= stack[:, :, flipped]
            size -= 1
        prev_gray = gray
        term = np.prod(row_sums, axis=1)
        if (n - size) % 2 == 0:
            total += term
        else:
            total -= term
    return total


def permanent_laplace(a: np.ndarray, row_split: int) -> complex:
    """Laplace-style block expansion of the permanent.

    Splits rows into [0, k) and [k, n); sums per(top block on columns S)
    times per(bottom block on complementary columns) over all k-subsets S.
    """
    a = _check_square(a)
    n = a.shape[0]
    if not 1 <= row_split < n:
        raise ValidationError(f"row split must satisfy 1 <= k < n, got k={row_split}, n={n}")
    top, bottom = a[:row_split], a[row_split:]
    all_cols = frozenset(range(n))
    total = 0.0 + 0.0j
    for subset in itertools.combinations(range(n), row_split):
        rest = sorted(all_cols.difference(subset))
        total += _sub_permanent(top[:, list(subset)]) * _sub_permanent(bottom[:, rest])
    return total


def _sub_permanent(a: np.ndarray) -> complex:
    return permanent_naive(a) if a.shape[0] <= MAX_NAIVE_N else permanent_ryser(a)


def zero_threshold(a: np.ndarray) -> float:
    """Scale-aware tolerance under which a permanent counts as exactly zero:
    1e-12 times the product of column max-norms, floored at 1."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 1e-12
    scale = float(np.prod(np.max(np.abs(a), axis=0)))
    return 1e-12 * max(scale, 1.0)


def is_vanishing(value: complex, a: np.ndarray) -> bool:
    """True if ``value`` is below the scale-aware zero threshold of ``a``."""
    return abs(value) < zero_threshold(a)


def factorial(n: int) -> int:
    return math.factorial(n)
