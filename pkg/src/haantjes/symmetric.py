"""Elementary symmetric polynomials, minimal-polynomial coefficients and Vandermonde matrices.

The functions accept floats or Dual numbers, so the coefficients can be
differentiated with respect to the coordinates the eigenvalues depend on.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def elementary_symmetric(values: Sequence) -> list:
    """[sigma_0, sigma_1, ..., sigma_n] of ``values`` (sigma_0 = 1)."""
    sig = [1.0]
    for v in values:
        nxt = list(sig) + [0.0]
        for k in range(len(sig), 0, -1):
            nxt[k] = sig[k] + v * sig[k - 1] if k < len(sig) else v * sig[k - 1]
        sig = nxt
    return sig


def minimal_polynomial_coefficients(values: Sequence) -> list:
    """c_1..c_n with m(t) = t^n - c_1 t^(n-1) - ... - c_n, i.e. c_k = (-1)^(k+1) sigma_k."""
    sig = elementary_symmetric(values)
    return [sig[k] if k % 2 else -sig[k] for k in range(1, len(sig))]


def coefficient_derivatives(values: Sequence[float]) -> np.ndarray:
    """D[k-1, r] = dc_k / d(lambda_r), from sigma_k = sigma_k(rest) + lambda_r sigma_(k-1)(rest)."""
    n = len(values)
    D = np.zeros((n, n))
    for r in range(n):
        rest = elementary_symmetric([v for i, v in enumerate(values) if i != r])
        for k in range(1, n + 1):
            D[k - 1, r] = (1.0 if k % 2 else -1.0) * rest[k - 1]
    return D


def vandermonde(values: Sequence[float]) -> np.ndarray:
    """V[r, i] = lambda_r^i: cyclic-basis coordinates to eigenvalues on each block."""
    v = np.asarray(values, dtype=float)
    return v[:, None] ** np.arange(len(v))[None, :]


def reverse_vandermonde(values: Sequence[float]) -> np.ndarray:
    """Rows [lambda_i^(n-1), ..., lambda_i, 1]."""
    return vandermonde(values)[:, ::-1]


def node_products(values: Sequence[float]) -> np.ndarray:
    """prod_{r != j} (lambda_j - lambda_r) for every j."""
    v = np.asarray(values, dtype=float)
    diff = v[:, None] - v[None, :]
    np.fill_diagonal(diff, 1.0)
    return diff.prod(axis=1)


def reverse_vandermonde_inverse(values: Sequence[float]) -> np.ndarray:
    """Closed-form inverse W of the reverse Vandermonde matrix, W @ V_R = I.

    W[k, j] = (dc_(k+1)/d lambda_j) / prod_{r != j}(lambda_j - lambda_r):
    the derivative index labels the row.
    """
    return coefficient_derivatives(values) / node_products(values)[None, :]


def control_transition(c: Sequence[float]) -> np.ndarray:
    """Upper-triangular Toeplitz H_R: column k holds the cyclic coordinates of e_k."""
    n = len(c)
    H = np.eye(n)
    for k in range(n):
        for i in range(k):
            H[i, k] = -c[k - i - 1]
    return H
