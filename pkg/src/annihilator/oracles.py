"""Brute-force reference computations for tests.

Nothing here uses the adaptive quadrature: residuals come from a plain
midpoint rule and Jacobians from central differences.
"""

import numpy as np

from .partition import brute_force_partition

__all__ = ["riemann_residual", "fd_jacobian", "brute_force_partition"]

_CHUNK = 1 << 18


def riemann_residual(fset, phase, points=10**6):
    """Midpoint-rule values of integral f_j exp(i g) over the set's domain.

    ``phase`` may be ``None`` (g = 0) or any callable on [0, 1].
    """
    if points < 10**4:
        raise ValueError("use at least 10**4 points")
    a, b = fset.domain
    h = (b - a) / points
    total = np.zeros(fset.n, dtype=complex)
    for start in range(0, points, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, points))
        x = a + (idx + 0.5) * h
        vals = fset.evaluate(x).astype(complex)
        if phase is not None:
            vals = vals * np.exp(1j * np.asarray(phase(x)))[None, :]
        total += vals.sum(axis=1)
    return total * h


def fd_jacobian(Q, u, h=1e-5):
    """Central-difference Jacobian of the vector function ``Q`` at ``u``."""
    u = np.asarray(u, dtype=float)
    cols = []
    for k in range(u.size):
        e = np.zeros_like(u)
        e[k] = h
        cols.append((np.asarray(Q(u + e)) - np.asarray(Q(u - e))) / (2 * h))
    return np.stack(cols, axis=1) if cols else np.zeros((np.size(Q(u)), 0))
