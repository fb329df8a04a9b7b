"""Fields that are polynomials in x̄ with coefficients living on an (r, x_N) grid.

A :class:`PolyField` stores F(x̄, x_N) = sum_a c_a(r, x_N) x̄^a, where each
c_a is sampled on the nodes of a quarter-plane rule.  Integrals over
R^n x (0, inf) then split exactly into sphere monomial moments times a
2-D quadrature, which is the structure of every integrand in the energy
expansions.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import sparse

from .wquad import sphere_monomial_integral

__all__ = ["PolyField", "integrate_product", "poly_to_fields"]


@lru_cache(maxsize=None)
def _moment(n: int, alpha: tuple) -> float:
    return sphere_monomial_integral(n, alpha)


def _combine(exps: np.ndarray, coef: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(exps) == 0:
        return exps, coef
    uniq, inv = np.unique(exps, axis=0, return_inverse=True)
    inv = inv.ravel()
    if len(uniq) == len(exps):
        out = np.empty_like(coef)
        out[inv] = coef
        return uniq, out
    S = sparse.csr_matrix((np.ones(len(inv)), (inv, np.arange(len(inv)))),
                          shape=(len(uniq), len(inv)))
    return uniq, np.asarray(S @ coef)


class PolyField:
    """Polynomial in x̄ (exponents ``exps``, shape (m, n)) with grid coefficients (m, G)."""

    __slots__ = ("n", "exps", "coef")

    def __init__(self, n: int, exps, coef):
        self.n = n
        self.exps = np.asarray(exps, dtype=np.int64).reshape(-1, n)
        coef = np.asarray(coef, dtype=float)
        self.coef = coef if coef.ndim == 2 else coef.reshape(len(self.exps), -1)

    @classmethod
    def scalar(cls, n: int, values) -> "PolyField":
        return cls(n, np.zeros((1, n), dtype=np.int64), np.asarray(values, float)[None, :])

    @classmethod
    def monomial(cls, n: int, alpha, values) -> "PolyField":
        return cls(n, np.asarray(alpha, dtype=np.int64)[None, :],
                   np.asarray(values, float)[None, :])

    @classmethod
    def quadratic_form(cls, A: np.ndarray, values) -> "PolyField":
        """x̄^T A x̄ times a grid function."""
        n = A.shape[0]
        exps, cs = [], []
        for i in range(n):
            for j in range(i, n):
                c = A[i, i] if i == j else A[i, j] + A[j, i]
                if c != 0.0:
                    e = np.zeros(n, dtype=np.int64)
                    e[i] += 1
                    e[j] += 1
                    exps.append(e)
                    cs.append(c)
        values = np.asarray(values, float)
        if not exps:
            return cls(n, np.zeros((0, n)), np.zeros((0, values.size)))
        return cls(n, np.array(exps), np.outer(cs, values))

    @classmethod
    def linear_form(cls, a: np.ndarray, values) -> "PolyField":
        """a . x̄ times a grid function."""
        n = len(a)
        idx = np.flatnonzero(a)
        values = np.asarray(values, float)
        return cls(n, np.eye(n, dtype=np.int64)[idx], np.outer(a[idx], values))

    @property
    def size(self) -> int:
        return self.coef.shape[1]

    def copy(self) -> "PolyField":
        return PolyField(self.n, self.exps.copy(), self.coef.copy())

    def _grid_scale(self, arr) -> "PolyField":
        return PolyField(self.n, self.exps, self.coef * np.asarray(arr, float))

    def __add__(self, other) -> "PolyField":
        if not isinstance(other, PolyField):
            other = PolyField.scalar(self.n, np.broadcast_to(other, (self.size,)))
        exps = np.concatenate([self.exps, other.exps])
        coef = np.concatenate([self.coef, other.coef])
        return PolyField(self.n, *_combine(exps, coef))

    __radd__ = __add__

    def __neg__(self) -> "PolyField":
        return PolyField(self.n, self.exps, -self.coef)

    def __sub__(self, other) -> "PolyField":
        return self + (-other if isinstance(other, PolyField) else -np.asarray(other))

    def __mul__(self, other) -> "PolyField":
        if not isinstance(other, PolyField):
            return self._grid_scale(other)
        m1, m2 = len(self.exps), len(other.exps)
        if m1 == 0 or m2 == 0:
            return PolyField(self.n, np.zeros((0, self.n)), np.zeros((0, self.size)))
        exps = (self.exps[:, None, :] + other.exps[None, :, :]).reshape(-1, self.n)
        coef = (self.coef[:, None, :] * other.coef[None, :, :]).reshape(m1 * m2, -1)
        return PolyField(self.n, *_combine(exps, coef))

    __rmul__ = __mul__

    def moments(self) -> np.ndarray:
        return np.array([_moment(self.n, tuple(int(v) for v in e)) for e in self.exps])

    def integrate(self, r: np.ndarray, w: np.ndarray) -> float:
        """sum_a moment(a) * sum_g c_a(g) r_g^{|a|} w_g."""
        if len(self.exps) == 0:
            return 0.0
        deg = self.exps.sum(axis=1)
        mom = self.moments()
        keep = mom != 0.0
        if not keep.any():
            return 0.0
        vals = (self.coef[keep] * r[None, :] ** deg[keep, None]) @ w
        return float(mom[keep] @ vals)


def integrate_product(F: PolyField, G: PolyField, r: np.ndarray, w: np.ndarray) -> float:
    """Integral of F * G without forming the product field."""
    if len(F.exps) == 0 or len(G.exps) == 0:
        return 0.0
    a = F.coef * r[None, :] ** F.exps.sum(axis=1)[:, None]
    b = G.coef * r[None, :] ** G.exps.sum(axis=1)[:, None]
    M = (a * w[None, :]) @ b.T
    n = F.n
    total = 0.0
    sums = F.exps[:, None, :] + G.exps[None, :, :]
    even = np.all(sums % 2 == 0, axis=2)
    ii, jj = np.nonzero(even)
    for i, j in zip(ii, jj):
        total += _moment(n, tuple(int(v) for v in sums[i, j])) * M[i, j]
    return float(total)


def poly_to_fields(poly: dict, n: int, xn: np.ndarray):
    """Convert {N-exponent: coefficient} into PolyField(s) on a grid with normal coordinate xn.

    Scalar coefficients give one PolyField; matrix coefficients give an
    n x n nested list of PolyFields (entries with no terms are ``None``).
    """
    N = n + 1
    keys = list(poly.keys())
    if not keys:
        return None
    first = np.asarray(poly[keys[0]])
    if first.ndim == 0:
        exps = np.array([k[:n] for k in keys], dtype=np.int64)
        coef = np.array([float(poly[k]) * xn ** k[N - 1] for k in keys])
        return PolyField(n, *_combine(exps, coef))
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            ks = [k for k in keys if poly[k][i, j] != 0.0]
            if not ks:
                continue
            exps = np.array([k[:n] for k in ks], dtype=np.int64)
            coef = np.array([poly[k][i, j] * xn ** k[N - 1] for k in ks])
            out[i][j] = PolyField(n, *_combine(exps, coef))
    return out
