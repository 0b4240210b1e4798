"""NumPy implementations of the hot kernel sums.

These mirror the compiled extension in ``_kernels.pyx``; the backend
module selects whichever is available.  All inputs are float64 and
C-contiguous; ``guard`` excludes pairs closer than that distance (their
contribution is defined to be zero, which the callers arrange via a
smooth cutoff that vanishes there).
"""

from __future__ import annotations

import numpy as np

_CHUNK = 4_000_000  # max pairwise entries held at once


def inv_dist_power_sum(X: np.ndarray, Y: np.ndarray, coeff: np.ndarray,
                       power: float, guard: float = 0.0) -> np.ndarray:
    """``out[i] = sum_j coeff[j] |X_i - Y_j|^{-power}`` with a distance guard."""
    m, n = len(X), len(Y)
    out = np.zeros(m)
    if n == 0:
        return out
    step = max(1, _CHUNK // max(n, 1))
    g2 = guard * guard
    for lo in range(0, m, step):
        hi = min(m, lo + step)
        d = X[lo:hi, None, :] - Y[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", d, d)
        with np.errstate(divide="ignore", over="ignore"):
            k = d2 ** (-0.5 * power)
        k[d2 <= g2] = 0.0
        out[lo:hi] = k @ coeff
    return out


def tk_component_sum(X: np.ndarray, Y: np.ndarray, coeff: np.ndarray,
                     k_index: int, power: float, guard: float = 0.0) -> np.ndarray:
    """``out[i] = sum_j coeff[j] (X_i - Y_j)_k |X_i - Y_j|^{-power}``."""
    m, n = len(X), len(Y)
    out = np.zeros(m)
    if n == 0:
        return out
    step = max(1, _CHUNK // max(n, 1))
    g2 = guard * guard
    for lo in range(0, m, step):
        hi = min(m, lo + step)
        d = X[lo:hi, None, :] - Y[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", d, d)
        with np.errstate(divide="ignore", over="ignore"):
            k = d2 ** (-0.5 * power)
        k[d2 <= g2] = 0.0
        out[lo:hi] = (k * d[:, :, k_index]) @ coeff
    return out


def inv_dist_power_matrix(X: np.ndarray, Y: np.ndarray, power: float,
                          guard: float = 0.0) -> np.ndarray:
    """Full kernel matrix ``|X_i - Y_j|^{-power}`` with guarded entries zeroed."""
    d = X[:, None, :] - Y[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", d, d)
    with np.errstate(divide="ignore", over="ignore"):
        k = d2 ** (-0.5 * power)
    k[d2 <= guard * guard] = 0.0
    return k
