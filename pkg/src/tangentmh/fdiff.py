"""Central finite-difference oracles for derivative checking.

Shipped as test utilities: independent of the analytic derivative code
paths they are used to check, and not part of the sampling API.
"""

from __future__ import annotations

import numpy as np

__all__ = ["fd_gradient", "fd_hessian_of_gradient", "fd_hessian_of_value"]


def _steps(x: np.ndarray, scale: float) -> np.ndarray:
    return scale * (1.0 + np.abs(x))


def fd_gradient(f, x, scale: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, scale)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
    return g


def fd_hessian_of_gradient(grad, x, scale: float = 1e-6) -> np.ndarray:
    """Hessian as central differences of a gradient function (symmetrized)."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, scale)
    H = np.empty((x.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        H[i] = (grad(x + e) - grad(x - e)) / (2.0 * h[i])
    return 0.5 * (H + H.T)


def fd_hessian_of_value(f, x, scale: float = 5e-4) -> np.ndarray:
    """Hessian from second central differences of the scalar value alone."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = _steps(x, scale)
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros_like(x)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros_like(x)
            ej[j] = h[j]
            H[i, j] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
            H[j, i] = H[i, j]
    return H
