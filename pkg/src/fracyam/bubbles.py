"""Standard bubbles, their extensions, and the correction fields.

A radial profile is any object with a ``derivs(r, xn)`` method returning
:class:`RadialDerivs` for the unit bubble extension W_{1,0}, where

* ``W``   = W(r, x_N)
* ``Wr``  = r^{-1} dW/dr
* ``WN``  = dW/dx_N
* ``Wrr`` = r^{-1} d(Wr)/dr
* ``WrN`` = d(Wr)/dx_N

All five are smooth up to r = 0, which is what lets the correction fields
and their gradients be written without removable singularities.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate as _spi

from .errors import DomainError
from .params import GammaParams, sphere_area

__all__ = [
    "Bubble",
    "RadialDerivs",
    "HalfBubbleProfile",
    "w_eval",
    "W_half_eval",
    "neumann_trace_half",
    "bubble_moment",
    "scaled_derivs",
    "psi1_eval",
    "psi2_eval",
    "psi_eval",
]


@dataclass(frozen=True)
class Bubble:
    params: GammaParams
    lam: float = 1.0
    sigma: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise DomainError(f"bubble scale must be positive, got {self.lam}")
        sig = np.zeros(self.params.n) if self.sigma is None else np.asarray(self.sigma, float)
        if sig.shape != (self.params.n,):
            raise DomainError(f"center must have shape ({self.params.n},)")
        object.__setattr__(self, "sigma", sig)


def _split(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n + 1:
        raise DomainError(f"points must have last axis of length {n + 1}")
    return x[..., :n], x[..., n]


def w_eval(b: Bubble, xbar) -> np.ndarray:
    """Trace bubble alpha (lam / (lam^2 + |x̄ - sigma|^2))^{(n - 2 gamma)/2}."""
    p = b.params
    xbar = np.asarray(xbar, dtype=float)
    d2 = ((xbar - b.sigma) ** 2).sum(axis=-1)
    return p.alpha * (b.lam / (b.lam**2 + d2)) ** p.decay


def _require_half(p: GammaParams) -> None:
    if p.gamma != 0.5:
        raise DomainError("closed-form extension exists only for gamma = 1/2; use extsolve.radial_profile")


def W_half_eval(b: Bubble, x) -> np.ndarray:
    """Closed-form extension of the bubble for gamma = 1/2."""
    p = b.params
    _require_half(p)
    xbar, xn = _split(x, p.n)
    if np.any(xn < 0):
        raise DomainError("points must lie in the closed half-space x_N >= 0")
    d2 = ((xbar - b.sigma) ** 2).sum(axis=-1)
    return p.alpha * (b.lam / ((b.lam + xn) ** 2 + d2)) ** ((p.n - 1) / 2.0)


def neumann_trace_half(b: Bubble, xbar) -> np.ndarray:
    """-kappa dW/dx_N at x_N = 0 from the differentiated closed form (gamma = 1/2)."""
    p = b.params
    _require_half(p)
    xbar = np.asarray(xbar, dtype=float)
    d2 = ((xbar - b.sigma) ** 2).sum(axis=-1)
    D = b.lam**2 + d2
    # d/dx_N of ((lam + x_N)^2 + d2)^{-(n-1)/2} at 0 is -(n-1) lam D^{-(n+1)/2}
    return p.kappa * p.alpha * (p.n - 1) * b.lam ** ((p.n + 1) / 2.0) * D ** (-(p.n + 1) / 2.0)


def bubble_moment(params: GammaParams, k: int) -> float:
    """int_{R^n} |x̄|^k w_{1,0}^{2*+1} dx̄ for k in {0, 2, 4}."""
    if k not in (0, 2, 4):
        raise DomainError(f"moment order must be 0, 2 or 4, got {k}")
    n = params.n
    if not k < n:
        raise DomainError(f"moment of order {k} diverges for n = {n}")
    # w^{2*+1} = alpha^{2n/(n-2g)} (1 + r^2)^{-n}; with r = tan(t) the radial
    # integrand becomes sin^{k+n-1} cos^{n-k-1}, smooth on [0, pi/2]
    f = lambda t: math.sin(t) ** (k + n - 1) * math.cos(t) ** (n - k - 1)
    val, _ = _spi.quad(f, 0.0, 0.5 * math.pi, epsabs=0.0, epsrel=1e-13, limit=200)
    power = 2.0 * n / (n - 2.0 * params.gamma)
    return sphere_area(n) * params.alpha**power * val


# --------------------------------------------------------------------------
# radial profiles


class RadialDerivs(NamedTuple):
    W: np.ndarray
    Wr: np.ndarray
    WN: np.ndarray
    Wrr: np.ndarray
    WrN: np.ndarray


class HalfBubbleProfile:
    """Closed-form W_{lam,0} and its derivatives for gamma = 1/2."""

    def __init__(self, params: GammaParams, lam: float = 1.0):
        _require_half(params)
        self.params = params
        self.lam = float(lam)

    def derivs(self, r, xn) -> RadialDerivs:
        r = np.asarray(r, dtype=float)
        xn = np.asarray(xn, dtype=float)
        q = (self.params.n - 1) / 2.0
        c = self.params.alpha * self.lam**q
        a = self.lam + xn
        D = a * a + r * r
        Dq = c * D ** (-q)
        Dq1 = Dq / D
        Dq2 = Dq1 / D
        return RadialDerivs(
            W=Dq,
            Wr=-2.0 * q * Dq1,
            WN=-2.0 * q * a * Dq1,
            Wrr=4.0 * q * (q + 1.0) * Dq2,
            WrN=4.0 * q * (q + 1.0) * a * Dq2,
        )


def scaled_derivs(profile, params: GammaParams, eps: float, r, xn) -> RadialDerivs:
    """Derivatives of W_{eps,0}(x) = eps^{-(n-2 gamma)/2} W_{1,0}(x / eps)."""
    d = profile.derivs(np.asarray(r) / eps, np.asarray(xn) / eps)
    s = eps ** (-params.decay)
    return RadialDerivs(
        W=s * d.W,
        Wr=s * eps**-2 * d.Wr,
        WN=s * eps**-1 * d.WN,
        Wrr=s * eps**-4 * d.Wrr,
        WrN=s * eps**-3 * d.WrN,
    )


def psi_eval(C: float, A, power: int, eps: float, x, profile, params: GammaParams) -> np.ndarray:
    """C * A_ij x_i x_j x_N^power r^{-1} dW_{eps,0}/dr at points x."""
    A = np.asarray(A, dtype=float)
    n = params.n
    if A.shape != (n, n) or not np.allclose(A, A.T, atol=1e-14, rtol=0):
        raise DomainError("coefficient matrix must be symmetric n x n")
    xbar, xn = _split(x, n)
    r = np.sqrt((xbar**2).sum(axis=-1))
    quad = np.einsum("...i,ij,...j->...", xbar, A, xbar)
    Wr = scaled_derivs(profile, params, eps, r, xn).Wr
    return C * quad * xn**power * Wr


def psi1_eval(C1: float, II, eps: float, x, profile, params: GammaParams) -> np.ndarray:
    """First correction field, quadratic in x̄ and linear in x_N."""
    II = np.asarray(II, dtype=float)
    if abs(np.trace(II)) > 1e-12 * max(1.0, np.abs(II).max()):
        warnings.warn("II is not trace-free: the mean curvature does not vanish at the point",
                      stacklevel=2)
    return psi_eval(C1, II, 1, eps, x, profile, params)


def psi2_eval(C2: float, RiNjN, eps: float, x, profile, params: GammaParams) -> np.ndarray:
    """Second correction field, quadratic in x̄ and in x_N."""
    return psi_eval(C2, RiNjN, 2, eps, x, profile, params)
