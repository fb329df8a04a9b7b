"""Truncated Fermi-coordinate expansions of a model metric near a boundary point.

Polynomials in x = (x̄, x_N) are dictionaries mapping exponent tuples of
length N = n + 1 to coefficients (scalars for the volume density, n x n
matrices for the tangential block of the inverse metric).  The normal block
is exact in Fermi coordinates: ḡ^{NN} = 1 and ḡ^{iN} = 0.

Second-order terms follow the general expansion with second fundamental
form II.  Third- and fourth-order terms use the refined expansion that
requires II and its covariant derivatives to vanish at the point; asking
for order > 2 with II != 0 is rejected.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DomainError

__all__ = [
    "ModelMetric",
    "density_poly",
    "inverse_poly",
    "metric_density",
    "metric_inverse",
    "E_term",
    "poly_eval",
    "poly_dN_over_xN",
    "trace_free_ii",
    "normalized_ii_metric",
    "umbilic_rnnn_metric",
    "flat_weyl_metric",
]


_TENSOR_RANKS = {
    "II": 2,
    "H_i": 1,
    "R_ikjl": 4,
    "R_iNjN": 2,
    "gNk": 3,
    "R_ij_k": 3,
    "R_NN_i": 1,
    "R_NN_N": 0,
    "R_ij_kl": 4,
    "R_NN_ij": 2,
    "R_NN_Ni": 1,
    "R_NN_NN": 0,
    "R_ikjl_m": 5,
    "R_iNjN_k": 3,
    "R_iNjN_N": 2,
    "R_ikjl_mq": 6,
    "R_iNjN_kl": 4,
    "R_iNjN_kN": 3,
    "R_iNjN_NN": 2,
}


@dataclass(frozen=True)
class ModelMetric:
    """Expansion coefficients at a boundary point.

    Underscores stand for covariant (or, for ``gNk`` and ``H_i``, partial)
    derivatives: ``R_NN_N`` is R_{NN;N}, ``R_iNjN_kl`` is R_{iNjN;kl}.
    ``R_ikjl`` and its derivatives belong to the boundary metric; the others
    to the compactified metric.  R_NN is the trace of ``R_iNjN`` and the
    boundary Ricci tensor is the contraction of ``R_ikjl``.  Unset tensors
    are zero.
    """

    n: int
    truncation_order: int = 2
    chart_radius: float = 2.0
    H: float = 0.0
    II: np.ndarray | None = field(default=None, repr=False)
    H_i: np.ndarray | None = field(default=None, repr=False)
    R_ikjl: np.ndarray | None = field(default=None, repr=False)
    R_iNjN: np.ndarray | None = field(default=None, repr=False)
    gNk: np.ndarray | None = field(default=None, repr=False)
    R_ij_k: np.ndarray | None = field(default=None, repr=False)
    R_NN_i: np.ndarray | None = field(default=None, repr=False)
    R_NN_N: float = 0.0
    R_ij_kl: np.ndarray | None = field(default=None, repr=False)
    R_NN_ij: np.ndarray | None = field(default=None, repr=False)
    R_NN_Ni: np.ndarray | None = field(default=None, repr=False)
    R_NN_NN: float = 0.0
    R_ikjl_m: np.ndarray | None = field(default=None, repr=False)
    R_iNjN_k: np.ndarray | None = field(default=None, repr=False)
    R_iNjN_N: np.ndarray | None = field(default=None, repr=False)
    R_ikjl_mq: np.ndarray | None = field(default=None, repr=False)
    R_iNjN_kl: np.ndarray | None = field(default=None, repr=False)
    R_iNjN_kN: np.ndarray | None = field(default=None, repr=False)
    R_iNjN_NN: np.ndarray | None = field(default=None, repr=False)
    umbilic: bool = False

    def __post_init__(self) -> None:
        n = self.n
        if self.truncation_order not in (2, 3, 4):
            raise DomainError("truncation_order must be 2, 3 or 4")
        for name, rank in _TENSOR_RANKS.items():
            val = getattr(self, name)
            arr = np.zeros((n,) * rank) if val is None else np.asarray(val, dtype=float)
            if arr.shape != (n,) * rank:
                raise DomainError(f"{name} must have shape {(n,) * rank}, got {arr.shape}")
            if rank == 0:
                arr = float(arr)
            else:
                arr = arr.copy()
                arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        II = self.II
        if not np.allclose(II, II.T, atol=1e-13):
            raise DomainError("II must be symmetric")
        if abs(np.trace(II) / n - self.H) > 1e-12 * max(1.0, np.abs(II).max()):
            raise DomainError("H must equal tr(II)/n")
        if self.umbilic and not np.allclose(II, self.H * np.eye(n), atol=1e-13):
            raise DomainError("umbilic point requires II = H * identity")
        if not np.allclose(self.R_iNjN, self.R_iNjN.T, atol=1e-13):
            raise DomainError("R_iNjN must be symmetric")
        R = self.R_ikjl
        if np.any(R):
            ok = (np.allclose(R, -R.transpose(1, 0, 2, 3), atol=1e-12)
                  and np.allclose(R, -R.transpose(0, 1, 3, 2), atol=1e-12)
                  and np.allclose(R, R.transpose(2, 3, 0, 1), atol=1e-12)
                  and np.allclose(R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2), 0,
                                  atol=1e-12))
            if not ok:
                raise DomainError("R_ikjl violates the curvature symmetries")
        if self.truncation_order > 2 and np.any(II):
            raise DomainError("orders 3 and 4 are available only where II = 0")

    @property
    def N(self) -> int:
        return self.n + 1

    @property
    def R_NN(self) -> float:
        return float(np.trace(self.R_iNjN))

    @property
    def ricci(self) -> np.ndarray:
        return np.einsum("ikjk->ij", self.R_ikjl)

    @property
    def II_norm2(self) -> float:
        return float((self.II**2).sum())

    def replace(self, **kw) -> "ModelMetric":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kw)
        return ModelMetric(**vals)


# --------------------------------------------------------------------------
# polynomial helpers


def _exp(N: int, tangential: tuple, xn_power: int) -> tuple:
    e = [0] * N
    for i in tangential:
        e[i] += 1
    e[N - 1] += xn_power
    return tuple(e)


def _add(poly: dict, key: tuple, val) -> None:
    if np.all(np.asarray(val) == 0):
        return
    poly[key] = poly[key] + val if key in poly else val


def _add_tensor(poly: dict, N: int, tensor: np.ndarray, coef: float, xn_power: int,
                free: int = 0) -> None:
    """Add coef * T_{f..., k...} x_k ... x_N^p; the first ``free`` indices stay free."""
    n = N - 1
    rank = tensor.ndim - free
    if not np.any(tensor):
        return
    for idx in itertools.product(range(n), repeat=rank):
        sl = (slice(None),) * free + idx
        val = coef * tensor[sl]
        _add(poly, _exp(N, idx, xn_power), val)


def _degree(key: tuple) -> int:
    return sum(key)


def density_poly(mm: ModelMetric) -> dict:
    """sqrt|ḡ| as {exponent: coefficient}, truncated at mm.truncation_order."""
    n, N = mm.n, mm.N
    P: dict = {(0,) * N: 1.0}
    H = mm.H
    _add(P, _exp(N, (), 1), -n * H)
    _add(P, _exp(N, (), 2), 0.5 * (n * n * H * H - mm.II_norm2 - mm.R_NN))
    _add_tensor(P, N, mm.H_i, -n, 1)
    _add_tensor(P, N, mm.ricci, -1.0 / 6.0, 0)
    if mm.truncation_order >= 3:
        _add_tensor(P, N, mm.R_ij_k, -1.0 / 12.0, 0)
        _add_tensor(P, N, mm.R_NN_i, -0.5, 2)
        _add(P, _exp(N, (), 3), -mm.R_NN_N / 6.0)
    if mm.truncation_order >= 4:
        Rb = mm.R_ikjl
        quart = 0.5 * mm.R_ij_kl + np.einsum("miqj,mkql->ijkl", Rb, Rb) / 9.0
        _add_tensor(P, N, quart, -1.0 / 20.0, 0)
        _add_tensor(P, N, mm.R_NN_ij, -0.25, 2)
        _add_tensor(P, N, mm.R_NN_Ni, -1.0 / 6.0, 3)
        _add(P, _exp(N, (), 4), -(mm.R_NN_NN + 2.0 * (mm.R_iNjN**2).sum()) / 24.0)
    return P


def inverse_poly(mm: ModelMetric) -> dict:
    """Tangential block ḡ^{ij} as {exponent: n x n matrix}."""
    n, N = mm.n, mm.N
    G: dict = {(0,) * N: np.eye(n)}
    II = mm.II
    _add(G, _exp(N, (), 1), 2.0 * II)
    _add_tensor(G, N, mm.R_ikjl.transpose(0, 2, 1, 3), 1.0 / 3.0, 0, free=2)
    _add_tensor(G, N, mm.gNk, 1.0, 1, free=2)
    _add(G, _exp(N, (), 2), 3.0 * II @ II + mm.R_iNjN)
    if mm.truncation_order >= 3:
        _add_tensor(G, N, mm.R_ikjl_m.transpose(0, 2, 1, 3, 4), 1.0 / 6.0, 0, free=2)
        _add_tensor(G, N, mm.R_iNjN_k, 1.0, 2, free=2)
        _add(G, _exp(N, (), 3), mm.R_iNjN_N / 3.0)
    if mm.truncation_order >= 4:
        Rb = mm.R_ikjl
        quart = (mm.R_ikjl_mq.transpose(0, 2, 1, 3, 4, 5) / 20.0
                 + np.einsum("iksl,jmsq->ijklmq", Rb, Rb) / 15.0)
        _add_tensor(G, N, quart, 1.0, 0, free=2)
        X = np.einsum("iksl,sj->ijkl", Rb, mm.R_iNjN)
        sym = 0.5 * (X + X.transpose(1, 0, 2, 3))
        _add_tensor(G, N, 0.5 * mm.R_iNjN_kl + sym / 3.0, 1.0, 2, free=2)
        _add_tensor(G, N, mm.R_iNjN_kN, 1.0 / 3.0, 3, free=2)
        S = mm.R_iNjN
        _add(G, _exp(N, (), 4), (mm.R_iNjN_NN + 8.0 * S @ S) / 12.0)
    return G


def poly_eval(poly: dict, x: np.ndarray):
    """Evaluate a polynomial dictionary at points x of shape (..., N)."""
    x = np.asarray(x, dtype=float)
    out = None
    for key, c in poly.items():
        mono = np.prod(x ** np.asarray(key), axis=-1)
        term = np.multiply.outer(mono, c) if np.ndim(c) else mono * c
        out = term if out is None else out + term
    return out


def poly_dN_over_xN(poly: dict, N: int) -> dict:
    """x_N^{-1} d/dx_N of a polynomial; fails if a pure x̄ term survives."""
    out: dict = {}
    for key, c in poly.items():
        p = key[N - 1]
        if p == 0:
            continue
        if p == 1:
            if np.any(np.asarray(c) != 0):
                raise DomainError(
                    "d/dx_N of the density has an x_N-free part (H or dH nonzero); "
                    "the E term is not x_N^{1-2g}-bounded"
                )
            continue
        k = list(key)
        k[N - 1] = p - 2
        _add(out, tuple(k), p * c)
    return out


def _check_chart(mm: ModelMetric, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != mm.N:
        raise DomainError(f"points must have last axis of length {mm.N}")
    if np.any(np.linalg.norm(x, axis=-1) > mm.chart_radius):
        raise DomainError(f"point outside the chart radius {mm.chart_radius}")
    if np.any(x[..., -1] < 0):
        raise DomainError("points must satisfy x_N >= 0")
    return x


def metric_density(mm: ModelMetric, x) -> np.ndarray:
    x = _check_chart(mm, x)
    return poly_eval(density_poly(mm), x)


def metric_inverse(mm: ModelMetric, x) -> np.ndarray:
    """Full N x N inverse metric; the normal row and column are exact."""
    x = _check_chart(mm, x)
    tan = poly_eval(inverse_poly(mm), x)
    out = np.zeros(x.shape[:-1] + (mm.N, mm.N))
    out[..., : mm.n, : mm.n] = tan
    out[..., mm.n, mm.n] = 1.0
    return out


def E_term(mm: ModelMetric, gamma: float, x) -> np.ndarray:
    """-(n - 2g)/2 * (d_N sqrt|ḡ| / sqrt|ḡ|) * x_N^{-2g}."""
    x = _check_chart(mm, x)
    if np.any(x[..., -1] <= 0):
        raise DomainError("E is evaluated only for x_N > 0")
    P = density_poly(mm)
    dP: dict = {}
    N = mm.N
    for key, c in P.items():
        p = key[N - 1]
        if p:
            k = list(key)
            k[N - 1] = p - 1
            _add(dP, tuple(k), p * c)
    num = poly_eval(dP, x) if dP else np.zeros(x.shape[:-1])
    return -0.5 * (mm.n - 2 * gamma) * num / poly_eval(P, x) * x[..., -1] ** (-2 * gamma)


# --------------------------------------------------------------------------
# model metric families with known log coefficients


def trace_free_ii(n: int, norm2: float = 1.0, rotation: np.ndarray | None = None) -> np.ndarray:
    """diag(1, -1, 0, ...) scaled to squared norm ``norm2``, optionally rotated."""
    if n < 2:
        raise DomainError("a nonzero trace-free II needs n >= 2")
    d = np.zeros(n)
    d[0], d[1] = 1.0, -1.0
    II = np.diag(d) * math.sqrt(norm2 / 2.0)
    if rotation is not None:
        Q = np.asarray(rotation, dtype=float)
        II = Q @ II @ Q.T
    return II


def normalized_ii_metric(n: int, II, chart_radius: float = 2.0) -> ModelMetric:
    """Order-2 model at a non-umbilic point with H = 0, flat boundary Ricci and
    R_NN = (1 - 2n) / (2(n - 1)) |II|^2 spread isotropically over R_iNjN."""
    II = np.asarray(II, dtype=float)
    s = float((II**2).sum())
    rnn = (1.0 - 2.0 * n) / (2.0 * (n - 1.0)) * s
    return ModelMetric(n=n, truncation_order=2, chart_radius=chart_radius, H=0.0, II=II,
                       R_iNjN=rnn / n * np.eye(n))


def umbilic_rnnn_metric(n: int, rnn_n: float, chart_radius: float = 2.0) -> ModelMetric:
    """Order-3 umbilic model whose only nonzero datum is R_{NN;N} (with the
    isotropic R_{iNjN;N} = R_{NN;N} / n carrying the same trace)."""
    return ModelMetric(n=n, truncation_order=3, chart_radius=chart_radius, R_NN_N=rnn_n,
                       R_iNjN_N=rnn_n / n * np.eye(n), umbilic=True)


def flat_weyl_metric(n: int, S, q: float = 0.0, chart_radius: float = 2.0) -> ModelMetric:
    """Order-4 umbilic model with vanishing boundary curvature and trace-free
    R_iNjN = S, completed by the curvature relations of the normalised
    umbilic setting.

    ``q`` stands for R_{;NN}.  The fourth-order normal data are
    R_{NN;NN} = 3q/(2n) - 2|S|^2, R_{iNjN;NN} = R_{NN;NN} delta_ij / n and
    R_{iNjN;kl} = a (d_ik d_jl + d_il d_jk) + b d_ij d_kl with b = -2a/n, so
    that R_{NN;kl} = 0 and the double divergence matches.
    """
    S = np.asarray(S, dtype=float)
    if not np.allclose(S, S.T):
        raise DomainError("S must be symmetric")
    if abs(np.trace(S)) > 1e-12 * max(1.0, np.abs(S).max()):
        raise DomainError("S must be trace-free (R_NN = 0)")
    s2 = float((S**2).sum())
    rnnnn = 1.5 * q / n - 2.0 * s2
    a = ((3.0 - n) / (2.0 * n) * q - s2) / ((n + 2.0) * (n - 1.0))
    b = -2.0 * a / n
    d = np.eye(n)
    Rkl = (a * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
           + b * np.einsum("ij,kl->ijkl", d, d))
    return ModelMetric(n=n, truncation_order=4, chart_radius=chart_radius, R_iNjN=S,
                       R_NN_NN=rnnnn, R_iNjN_NN=rnnnn / n * d, R_iNjN_kl=Rkl, umbilic=True)
