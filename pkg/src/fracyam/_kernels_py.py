"""Pure-numpy versions of the hot loops; reference semantics for ``_kernels``."""

from __future__ import annotations

import numpy as np


def thomas_batched(lower, diag, upper, rhs):
    """Solve a batch of tridiagonal systems.

    All arguments have shape (B, m); ``lower[:, 0]`` and ``upper[:, -1]`` are
    ignored.  Rows are solved independently; no pivoting (the systems built
    by the extension solver are symmetric positive definite).
    """
    lower = np.asarray(lower, dtype=float)
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    B, m = rhs.shape
    cp = np.empty((B, m))
    dp = np.empty((B, m))
    cp[:, 0] = upper[:, 0] / diag[:, 0]
    dp[:, 0] = rhs[:, 0] / diag[:, 0]
    for j in range(1, m):
        den = diag[:, j] - lower[:, j] * cp[:, j - 1]
        cp[:, j] = upper[:, j] / den
        dp[:, j] = (rhs[:, j] - lower[:, j] * dp[:, j - 1]) / den
    x = np.empty((B, m))
    x[:, -1] = dp[:, -1]
    for j in range(m - 2, -1, -1):
        x[:, j] = dp[:, j] - cp[:, j] * x[:, j + 1]
    return x


def element_apply(U, coef, k00, k01, k11):
    """Apply a sum of 2x2 element matrices along the last axis.

    ``U`` has shape (P, m + 1), ``coef`` shape (P, m) (one scalar per column
    and element), ``k00, k01, k11`` shape (m,).  Returns y with
    y[:, e] += coef (k00 U_e + k01 U_{e+1}), y[:, e+1] += coef (k01 U_e + k11 U_{e+1}).
    """
    U = np.asarray(U, dtype=float)
    coef = np.asarray(coef, dtype=float)
    left = U[:, :-1]
    right = U[:, 1:]
    y = np.zeros_like(U)
    y[:, :-1] += coef * (k00 * left + k01 * right)
    y[:, 1:] += coef * (k01 * left + k11 * right)
    return y
