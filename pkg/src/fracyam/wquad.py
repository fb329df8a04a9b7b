"""Quadrature for integrals carrying the weight x_N^{1-2 gamma}.

Points of the half-space are arrays of shape ``(P, N)`` with the normal
coordinate last.  Every rule stores the weight x_N^{1-2 gamma} (and the
polar Jacobian where relevant) inside its weights, so ``integrate`` only
ever forms ``sum(w * f(x))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, NonFiniteError
from .params import sphere_area

__all__ = [
    "jacobi_rule",
    "normal_rule",
    "gauss_legendre",
    "sphere_rule",
    "sphere_monomial_integral",
    "angular_moment",
    "HalfBall",
    "Slab",
    "HalfSpace",
    "WeightedGrid",
    "make_grid",
    "integrate",
    "mc_integrate",
    "quarter_plane_rule",
]


# --------------------------------------------------------------------------
# one-dimensional Gauss rules


def _jacobi_recurrence(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Three-term recurrence of the monic Jacobi polynomials for (1-t)^a (1+t)^b."""
    k = np.arange(m, dtype=float)
    ab = a + b
    diag = np.empty(m)
    with np.errstate(invalid="ignore", divide="ignore"):
        diag[:] = (b * b - a * a) / ((2 * k + ab) * (2 * k + ab + 2))
    diag[0] = (b - a) / (ab + 2)

    kk = np.arange(1, m, dtype=float)
    s = 2 * kk + ab
    off2 = 4 * kk * (kk + a) * (kk + b) * (kk + ab) / (s * s * (s + 1) * (s - 1))
    # k = 1 has a removable 0/0 when a + b = -1; not reachable for our weights
    return diag, np.sqrt(off2)


@lru_cache(maxsize=256)
def _jacobi_rule_cached(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    diag, off = _jacobi_recurrence(m, a, b)
    J = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    t, V = np.linalg.eigh(J)
    mu0 = 2.0 ** (a + b + 1) * math.exp(
        math.lgamma(a + 1) + math.lgamma(b + 1) - math.lgamma(a + b + 2)
    )
    w = mu0 * V[0, :] ** 2
    t.flags.writeable = False
    w.flags.writeable = False
    return t, w


def jacobi_rule(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for weight (1-t)^a (1+t)^b on [-1, 1] (Golub-Welsch)."""
    if m < 1:
        raise DomainError("a Gauss rule needs at least one node")
    if a <= -1 or b <= -1:
        raise DomainError("Jacobi exponents must exceed -1")
    t, w = _jacobi_rule_cached(int(m), float(a), float(b))
    return t.copy(), w.copy()


def gauss_legendre(m: int, lo: float = -1.0, hi: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(m)
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


def normal_rule(m: int, gamma: float, T: float) -> tuple[np.ndarray, np.ndarray]:
    """m-point Gauss rule for  int_0^T x^{1-2 gamma} f(x) dx.

    Exact for polynomials f of degree <= 2m - 1.
    """
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    if T <= 0:
        raise DomainError("height T must be positive")
    b = 1.0 - 2.0 * gamma
    t, w = jacobi_rule(m, 0.0, b)
    # x = T (1 + t) / 2 turns (1 + t)^b dt into (2/T)^{b+1} x^b dx
    x = 0.5 * T * (1.0 + t)
    w = w * (0.5 * T) ** (b + 1.0)
    return x, w


# --------------------------------------------------------------------------
# spheres


def sphere_rule(n: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^{n-1} in R^n, exact for polynomials of degree <= ``degree``.

    Returns points of shape (P, n) and weights summing to |S^{n-1}|.
    """
    if n < 1:
        raise DomainError("sphere dimension must be >= 1")
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        k = degree + 1
        th = 2.0 * np.pi * (np.arange(k) + 0.5) / k
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(k, 2.0 * np.pi / k)
    # last coordinate t with weight (1 - t^2)^{(n-3)/2}, remainder on S^{n-2}
    m = degree // 2 + 1
    c = 0.5 * (n - 3)
    t, wt = jacobi_rule(m, c, c)
    sub, wsub = sphere_rule(n - 1, degree)
    s = np.sqrt(1.0 - t * t)
    pts = np.concatenate(
        [np.broadcast_to(s[:, None, None] * sub[None, :, :], (m, len(wsub), n - 1)),
         np.broadcast_to(t[:, None, None], (m, len(wsub), 1))],
        axis=2,
    ).reshape(-1, n)
    return pts, (wt[:, None] * wsub[None, :]).ravel()


def sphere_monomial_integral(n: int, alpha) -> float:
    """Exact  int_{S^{n-1}} x^alpha dsigma  for a multi-exponent alpha of length n."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != n:
        raise DomainError("multi-exponent length must equal n")
    if any(a % 2 for a in alpha):
        return 0.0
    lg = sum(math.lgamma((a + 1) / 2.0) for a in alpha) - math.lgamma((sum(alpha) + n) / 2.0)
    return 2.0 * math.exp(lg)


def angular_moment(n: int, multi_index) -> float:
    """Sphere integral of x_{i1} x_{i2} ... over S^{n-1}.

    ``multi_index`` lists coordinate indices (0-based), e.g. ``(0, 0, 1, 1)``
    for x_1^2 x_2^2.  Degree at most 4.
    """
    idx = tuple(int(i) for i in multi_index)
    if len(idx) > 4:
        raise DomainError(f"angular_moment supports degree <= 4, got {len(idx)}")
    if any(i < 0 or i >= n for i in idx):
        raise DomainError("coordinate index out of range")
    if len(idx) % 2:
        return 0.0
    area = sphere_area(n)
    if len(idx) == 0:
        return area
    if len(idx) == 2:
        return area / n if idx[0] == idx[1] else 0.0
    # degree 4: sum over the three pairings of the index set
    i, j, k, l = idx
    d = lambda p, q: 1.0 if p == q else 0.0
    pairings = d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(i, l) * d(j, k)
    return area * pairings / (n * (n + 2))


# --------------------------------------------------------------------------
# domains and grids


@dataclass(frozen=True)
class HalfBall:
    n: int
    gamma: float
    R: float = 1.0


@dataclass(frozen=True)
class Slab:
    """[-L/2, L/2]^n x (0, T)."""

    n: int
    gamma: float
    L: float
    T: float


@dataclass(frozen=True)
class HalfSpace:
    """All of R^N_+, compactified radially with the length scale ``scale``."""

    n: int
    gamma: float
    scale: float = 1.0


@dataclass(frozen=True)
class WeightedGrid:
    gamma: float
    domain: object
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.weights)


def _polar_angle_rule(n: int, gamma: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule for int_0^{pi/2} sin^{n-1}(phi) cos^{1-2g}(phi) h(phi) dphi.

    In theta = pi/2 - phi the singular factor behaves like theta^{1-2g}, which
    is absorbed by ``normal_rule``; what is left is smooth in theta.
    """
    th, w = normal_rule(m, gamma, 0.5 * np.pi)
    w = w * (np.sin(th) / th) ** (1.0 - 2.0 * gamma) * np.cos(th) ** (n - 1)
    return 0.5 * np.pi - th, w


def make_grid(domain, radial: int = 24, angular: int = 24, sphere_degree: int = 8,
              tangential: int = 16, normal: int = 16) -> WeightedGrid:
    """Tensor/polar rule on a half-ball, slab or compactified half-space."""
    if isinstance(domain, Slab):
        n, g = domain.n, domain.gamma
        xs, ws = gauss_legendre(tangential, -0.5 * domain.L, 0.5 * domain.L)
        xn, wn = normal_rule(normal, g, domain.T)
        grids = np.meshgrid(*([xs] * n), xn, indexing="ij")
        wgrids = np.meshgrid(*([ws] * n), wn, indexing="ij")
        pts = np.stack([gr.ravel() for gr in grids], axis=1)
        w = np.prod(np.stack([wg.ravel() for wg in wgrids], axis=1), axis=1)
        return WeightedGrid(g, domain, pts, w)

    if isinstance(domain, HalfBall):
        n, g = domain.n, domain.gamma
        b = n + 1.0 - 2.0 * g
        t, wr = jacobi_rule(radial, 0.0, b)
        rho = 0.5 * domain.R * (1.0 + t)
        wr = wr * (0.5 * domain.R) ** (b + 1.0)
    elif isinstance(domain, HalfSpace):
        n, g = domain.n, domain.gamma
        b = n + 1.0 - 2.0 * g
        # rho = scale * u / (1 - u), Gauss-Legendre in u on two panels
        u1, w1 = gauss_legendre(radial, 0.0, 0.5)
        u2, w2 = gauss_legendre(radial, 0.5, 1.0)
        u = np.concatenate([u1, u2])
        wu = np.concatenate([w1, w2])
        rho = domain.scale * u / (1.0 - u)
        wr = wu * domain.scale / (1.0 - u) ** 2 * rho**b
    else:
        raise DomainError(f"unsupported domain {domain!r}")

    phi, wphi = _polar_angle_rule(n, g, angular)
    om, wom = sphere_rule(n, sphere_degree)
    R_, P_, O_ = np.meshgrid(np.arange(len(rho)), np.arange(len(phi)), np.arange(len(wom)),
                             indexing="ij")
    R_, P_, O_ = R_.ravel(), P_.ravel(), O_.ravel()
    r = rho[R_] * np.sin(phi[P_])
    xn = rho[R_] * np.cos(phi[P_])
    pts = np.concatenate([r[:, None] * om[O_], xn[:, None]], axis=1)
    w = wr[R_] * wphi[P_] * wom[O_]
    return WeightedGrid(g, domain, pts, w)


def quarter_plane_rule(n: int, gamma: float, m: int, angular: int, R: float,
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rule on {r > 0, x_N > 0, r^2 + x_N^2 < R^2} for radial-in-x̄ integrands.

    Returns (r, x_N, w) with w containing r^{n-1} x_N^{1-2 gamma} and the
    polar Jacobian but not |S^{n-1}|.
    """
    b = n + 1.0 - 2.0 * gamma
    t, wr = jacobi_rule(m, 0.0, b)
    rho = 0.5 * R * (1.0 + t)
    wr = wr * (0.5 * R) ** (b + 1.0)
    phi, wphi = _polar_angle_rule(n, gamma, angular)
    r = np.outer(rho, np.sin(phi)).ravel()
    xn = np.outer(rho, np.cos(phi)).ravel()
    return r, xn, np.outer(wr, wphi).ravel()


def integrate(grid: WeightedGrid, f) -> float:
    """Weighted sum  sum_i w_i f(x_i)."""
    vals = np.asarray(f(grid.points), dtype=float)
    if vals.shape != grid.weights.shape:
        vals = np.broadcast_to(vals, grid.weights.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NonFiniteError(
            f"integrand is {vals[i]} at node {i}, x = {grid.points[i].tolist()}"
        )
    return float(np.dot(grid.weights, vals))


def _weighted_volume(domain) -> float:
    n, g = domain.n, domain.gamma
    if isinstance(domain, Slab):
        return domain.L**n * domain.T ** (2 - 2 * g) / (2 - 2 * g)
    if isinstance(domain, HalfBall):
        return (2 * domain.R) ** n * domain.R ** (2 - 2 * g) / (2 - 2 * g)
    raise DomainError(f"Monte Carlo needs a bounded domain, got {domain!r}")


def mc_integrate(f, domain, samples: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of  int f x_N^{1-2 gamma} dx  over a bounded domain.

    x_N is drawn with density proportional to x_N^{1-2 gamma}; tangential
    coordinates are uniform on the bounding box.  Points outside a half-ball
    contribute zero.
    """
    if samples < 1000:
        raise DomainError("mc_integrate needs at least 1000 samples")
    n, g = domain.n, domain.gamma
    rng = np.random.default_rng(seed)
    if isinstance(domain, Slab):
        xbar = rng.uniform(-0.5 * domain.L, 0.5 * domain.L, size=(samples, n))
        xn = domain.T * rng.random(samples) ** (1.0 / (2.0 - 2.0 * g))
        inside = np.ones(samples, dtype=bool)
    elif isinstance(domain, HalfBall):
        xbar = rng.uniform(-domain.R, domain.R, size=(samples, n))
        xn = domain.R * rng.random(samples) ** (1.0 / (2.0 - 2.0 * g))
        inside = (xbar**2).sum(axis=1) + xn**2 < domain.R**2
    else:
        raise DomainError(f"Monte Carlo needs a bounded domain, got {domain!r}")
    pts = np.concatenate([xbar, xn[:, None]], axis=1)
    vals = np.zeros(samples)
    vals[inside] = np.asarray(f(pts[inside]), dtype=float)
    if not np.all(np.isfinite(vals)):
        i = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonFiniteError(f"integrand is {vals[i]} at sample {i}, x = {pts[i].tolist()}")
    vol = _weighted_volume(domain)
    est = vol * vals.mean()
    se = vol * vals.std(ddof=1) / math.sqrt(samples)
    return float(est), float(se)
