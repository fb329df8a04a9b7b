"""Weighted extension problem on a flat torus times (0, T).

Discretisation
--------------
Tangential directions use a periodic grid with either spectral or
second-order finite-difference derivatives.  In the normal direction the
field is piecewise linear in s = x_N^{2 gamma}, so the two-term boundary
behaviour u + v x_N^{2 gamma} is represented exactly on the first element.
Element matrices come from the weighted energy

    int x_N^{1-2g} (|dU/dx_N|^2 + ...) dx_N = int 2g |dU/ds|^2 ds + ...,
    int x_N^{1-2g} U^2 dx_N = int s^{(1-2g)/g} U^2 ds / (2g),

integrated exactly on each element.  The top boundary x_N = T is
zero-flux, which keeps constants extension-invariant; every non-constant
mode still decays like exp(-|k| T) so the truncation error is controlled
by the choice of T.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special as _sp

from . import kernels
from .bubbles import RadialDerivs
from .errors import ConvergenceError, DomainError
from .params import GammaParams
from .wquad import gauss_legendre, jacobi_rule

__all__ = [
    "NormalGrid",
    "graded_normal_grid",
    "TorusExtensionProblem",
    "ExtensionField",
    "solve_extension",
    "solve_mode",
    "dtn_apply",
    "dtn_variational",
    "dtn_symbol",
    "flat_symbol",
    "discrete_energy",
    "HankelBubbleProfile",
    "radial_profile",
    "save_field",
    "load_field",
]


# --------------------------------------------------------------------------
# normal direction


@dataclass(frozen=True)
class NormalGrid:
    """Nodes 0 = x_0 < x_1 < ... < x_m = T and the element matrices in s."""

    gamma: float
    x: np.ndarray = field(repr=False)
    k00: np.ndarray = field(repr=False)
    k01: np.ndarray = field(repr=False)
    m00: np.ndarray = field(repr=False)
    m01: np.ndarray = field(repr=False)
    m11: np.ndarray = field(repr=False)

    @property
    def T(self) -> float:
        return float(self.x[-1])

    @property
    def m(self) -> int:
        """Number of elements."""
        return len(self.x) - 1

    @property
    def s(self) -> np.ndarray:
        return self.x ** (2.0 * self.gamma)

    def lumped(self) -> "NormalGrid":
        return NormalGrid(self.gamma, self.x, self.k00, self.k01,
                          self.m00 + self.m01, np.zeros_like(self.m01), self.m11 + self.m01)


def _element_mass(sa: np.ndarray, sb: np.ndarray, p: float):
    """int_{sa}^{sb} s^p phi_a phi_b ds for the two hat functions of each element."""
    h = sb - sa
    m00 = np.empty_like(h)
    m01 = np.empty_like(h)
    m11 = np.empty_like(h)

    first = sa == 0.0
    if first.any():
        b = sb[first]
        # int_0^b s^p (b-s)^2 / b^2 etc. via Beta integrals
        m00[first] = b ** (p + 1) * _sp.beta(p + 1, 3)
        m01[first] = b ** (p + 1) * _sp.beta(p + 2, 2)
        m11[first] = b ** (p + 1) / (p + 3)
    rest = ~first
    if rest.any():
        t, w = np.polynomial.legendre.leggauss(12)
        a = sa[rest][:, None]
        hh = h[rest][:, None]
        s = a + 0.5 * hh * (t + 1.0)
        ww = 0.5 * hh * w * s**p
        phi1 = 0.5 * (t + 1.0)
        phi0 = 1.0 - phi1
        m00[rest] = (ww * phi0 * phi0).sum(axis=1)
        m01[rest] = (ww * phi0 * phi1).sum(axis=1)
        m11[rest] = (ww * phi1 * phi1).sum(axis=1)
    return m00, m01, m11


def _build_normal(gamma: float, x: np.ndarray) -> NormalGrid:
    x = np.asarray(x, dtype=float)
    if x[0] != 0.0 or np.any(np.diff(x) <= 0):
        raise DomainError("normal nodes must start at 0 and increase strictly")
    s = x ** (2.0 * gamma)
    h = np.diff(s)
    k = 2.0 * gamma / h
    p = (1.0 - 2.0 * gamma) / gamma
    m00, m01, m11 = _element_mass(s[:-1], s[1:], p)
    c = 1.0 / (2.0 * gamma)
    return NormalGrid(gamma, x, k, -k, c * m00, c * m01, c * m11)


def graded_normal_grid(gamma: float, T: float, m: int = 200, first: float | None = None,
                       ) -> NormalGrid:
    """Geometrically graded nodes: 0 followed by m nodes from ``first`` to T."""
    if T <= 0 or m < 2:
        raise DomainError("need T > 0 and at least two elements")
    if first is None:
        first = T * 1e-8
    x = np.concatenate([[0.0], np.geomspace(first, T, m)])
    return _build_normal(float(gamma), x)


def _mode_matrix(ng: NormalGrid, k2: np.ndarray):
    """Tridiagonal bands of K + k^2 M on all nodes, one row per k^2 value."""
    k2 = np.asarray(k2, dtype=float)[:, None]
    m = ng.m
    diag = np.zeros((k2.shape[0], m + 1))
    diag[:, :-1] += ng.k00 + k2 * ng.m00
    diag[:, 1:] += ng.k00 + k2 * ng.m11
    off = np.broadcast_to(ng.k01 + k2 * ng.m01, (k2.shape[0], m)).copy()
    return diag, off


def solve_mode(ng: NormalGrid, k2) -> np.ndarray:
    """Discrete solutions theta(x_j) with theta(0) = 1 for each |k|^2 in ``k2``.

    Returns an array of shape (len(k2), m + 1).
    """
    k2 = np.atleast_1d(np.asarray(k2, dtype=float))
    diag, off = _mode_matrix(ng, k2)
    B, m = len(k2), ng.m
    lower = np.zeros((B, m))
    upper = np.zeros((B, m))
    lower[:, 1:] = off[:, 1:]
    upper[:, :-1] = off[:, 1:]
    rhs = np.zeros((B, m))
    rhs[:, 0] = -off[:, 0]
    theta = np.empty((B, m + 1))
    theta[:, 0] = 1.0
    theta[:, 1:] = kernels.thomas_batched(lower, diag[:, 1:], upper, rhs)
    return theta


def _mode_energy(ng: NormalGrid, k2, theta) -> np.ndarray:
    """Discrete energy theta^T (K + k^2 M) theta of each unit mode.

    At the discrete solution this equals the flux (K + k^2 M) theta at node 0,
    but as a sum of squares it is free of the cancellation between the large
    first-element stiffness terms.
    """
    k2 = np.atleast_1d(np.asarray(k2, dtype=float))
    a, b = theta[:, :-1], theta[:, 1:]
    stiff = (ng.k00 * (b - a) ** 2).sum(axis=1)
    mass = (ng.m00 * a * a + 2.0 * ng.m01 * a * b + ng.m11 * b * b).sum(axis=1)
    return stiff + k2 * mass


# --------------------------------------------------------------------------
# torus problem


@dataclass(frozen=True)
class TorusExtensionProblem:
    """Flat or variable-coefficient extension problem on T^n_L x (0, T).

    Coefficients, when given, are sampled per tangential node and per normal
    element: ``A_tan`` has shape (n, n, M, ..., M, m), ``A_NN`` and ``B``
    have shape (M, ..., M, m).  ``B`` multiplies x_N^{1-2 gamma} U^2.
    """

    params: GammaParams
    L: float
    M: int
    normal: NormalGrid
    tangential: str = "spectral"
    mass: str = "consistent"
    A_tan: np.ndarray | None = field(default=None, repr=False)
    A_NN: np.ndarray | None = field(default=None, repr=False)
    B: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.tangential not in ("spectral", "fd2"):
            raise DomainError("tangential must be 'spectral' or 'fd2'")
        if self.mass not in ("consistent", "lumped"):
            raise DomainError("mass must be 'consistent' or 'lumped'")
        if self.normal.gamma != self.params.gamma:
            raise DomainError("normal grid built for a different gamma")
        if self.mass == "lumped" and np.any(self.normal.m01 != 0):
            object.__setattr__(self, "normal", self.normal.lumped())
        shape = self.grid_shape + (self.normal.m,)
        n = self.params.n
        if self.A_tan is not None:
            A = np.asarray(self.A_tan, dtype=float)
            if A.shape != (n, n) + shape:
                raise DomainError(f"A_tan must have shape {(n, n) + shape}")
            if not np.allclose(A, np.swapaxes(A, 0, 1)):
                raise DomainError("A_tan must be symmetric")
            object.__setattr__(self, "A_tan", A)
        for name in ("A_NN", "B"):
            val = getattr(self, name)
            if val is not None:
                val = np.array(np.broadcast_to(np.asarray(val, dtype=float), shape))
                object.__setattr__(self, name, val)
        if self.A_NN is not None and np.any(self.A_NN <= 0):
            raise DomainError("A_NN must be positive")

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.M,) * self.params.n

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def cell(self) -> float:
        """Boundary measure of one tangential node."""
        return self.h ** self.params.n

    @property
    def volume(self) -> float:
        return self.L ** self.params.n

    @property
    def is_flat(self) -> bool:
        if self.A_tan is not None:
            eye = np.eye(self.params.n).reshape((self.params.n, self.params.n) + (1,) * (self.params.n + 1))
            if not np.allclose(self.A_tan, eye, atol=0, rtol=0):
                return False
        if self.A_NN is not None and not np.all(self.A_NN == 1.0):
            return False
        if self.B is not None and not np.all(self.B == 0.0):
            return False
        return True

    def coordinates(self) -> list[np.ndarray]:
        """Tangential node coordinates along one axis, repeated per axis."""
        return [np.arange(self.M) * self.h for _ in range(self.params.n)]

    def mesh(self) -> np.ndarray:
        """Array of shape (M, ..., M, n) of tangential node positions."""
        return np.stack(np.meshgrid(*self.coordinates(), indexing="ij"), axis=-1)

    def wavenumbers(self) -> list[np.ndarray]:
        k = 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.h)
        return [k] * self.params.n

    def k2(self) -> np.ndarray:
        """Symbol of -Delta on the tangential grid, shape grid_shape."""
        ks = np.meshgrid(*self.wavenumbers(), indexing="ij")
        if self.tangential == "spectral":
            return sum(k * k for k in ks)
        h = self.h
        return sum((2.0 / h * np.sin(0.5 * k * h)) ** 2 for k in ks)

    def derivative_symbols(self) -> list[np.ndarray]:
        ks = np.meshgrid(*self.wavenumbers(), indexing="ij")
        out = []
        for axis, k in enumerate(ks):
            if self.tangential == "spectral":
                d = 1j * k
                if self.M % 2 == 0:
                    # drop the Nyquist mode so the derivative stays real and skew
                    nyq = np.take(np.arange(self.M), [self.M // 2])
                    idx = [slice(None)] * self.params.n
                    idx[axis] = nyq
                    d = d.copy()
                    d[tuple(idx)] = 0.0
            else:
                d = (np.exp(1j * k * self.h) - 1.0) / self.h
            out.append(d)
        return out


@dataclass
class ExtensionField:
    """Discrete extension: ``values[..., j]`` is U at normal node j."""

    problem: TorusExtensionProblem
    values: np.ndarray
    iterations: int = 0
    residual: float = 0.0

    @property
    def trace(self) -> np.ndarray:
        return self.values[..., 0]


def _mode_table(problem: TorusExtensionProblem):
    k2 = problem.k2()
    uniq, inv = np.unique(np.round(k2, 12), return_inverse=True)
    theta = solve_mode(problem.normal, uniq)
    return k2, uniq, inv.reshape(k2.shape), theta


def _flat_solve(problem: TorusExtensionProblem, u: np.ndarray) -> np.ndarray:
    n = problem.params.n
    axes = tuple(range(n))
    _, _, inv, theta = _mode_table(problem)
    uh = np.fft.fftn(u, axes=axes)
    Uh = uh[..., None] * theta[inv]
    return np.fft.ifftn(Uh, axes=axes).real


# -- variable coefficients: matrix-free operator and flat preconditioner


def _tangential_derivs(problem, V):
    n = problem.params.n
    axes = tuple(range(n))
    Vh = np.fft.fftn(V, axes=axes)
    return [np.fft.ifftn(d[..., None] * Vh, axes=axes).real for d in problem.derivative_symbols()]


def _tangential_adjoint(problem, F):
    n = problem.params.n
    axes = tuple(range(n))
    out = 0.0
    for d, Fi in zip(problem.derivative_symbols(), F):
        out = out + np.fft.ifftn(np.conj(d)[..., None] * np.fft.fftn(Fi, axes=axes), axes=axes).real
    return out


def _apply_full(problem: TorusExtensionProblem, V: np.ndarray) -> np.ndarray:
    """Discrete operator K V for a field on all normal nodes (no boundary rows removed).

    The tangential part is split as -Delta (applied through its exact
    symbol, so the flat operator is diagonal per mode) plus the
    perturbation A - I written with first derivatives.
    """
    ng = problem.normal
    n = problem.params.n
    axes = tuple(range(n))
    P = int(np.prod(problem.grid_shape))
    m = ng.m
    ones = np.ones((P, m))
    lap = np.fft.ifftn(problem.k2()[..., None] * np.fft.fftn(V, axes=axes), axes=axes).real
    y = kernels.element_apply(lap.reshape(P, m + 1), ones, ng.m00, ng.m01, ng.m11
                              ).reshape(V.shape)
    if problem.A_tan is not None:
        G = _tangential_derivs(problem, V)
        F = []
        for i in range(n):
            acc = np.zeros(V.shape)
            for j in range(n):
                coef = problem.A_tan[i, j].reshape(P, m) - (1.0 if i == j else 0.0)
                if not coef.any():
                    continue
                acc += kernels.element_apply(G[j].reshape(P, m + 1), coef, ng.m00, ng.m01,
                                             ng.m11).reshape(V.shape)
            F.append(acc)
        y = y + _tangential_adjoint(problem, F)
    ann = ones if problem.A_NN is None else problem.A_NN.reshape(P, m)
    y = y + kernels.element_apply(V.reshape(P, m + 1), ann, ng.k00, ng.k01, ng.k00
                                  ).reshape(V.shape)
    if problem.B is not None:
        y = y + kernels.element_apply(V.reshape(P, m + 1), problem.B.reshape(P, m), ng.m00,
                                      ng.m01, ng.m11).reshape(V.shape)
    return y


def _flat_preconditioner(problem: TorusExtensionProblem):
    n = problem.params.n
    axes = tuple(range(n))
    ng = problem.normal
    k2 = problem.k2()
    diag, off = _mode_matrix(ng, k2.ravel())
    B, m = diag.shape[0], ng.m
    lower = np.zeros((B, m))
    upper = np.zeros((B, m))
    lower[:, 1:] = off[:, 1:]
    upper[:, :-1] = off[:, 1:]
    dg = diag[:, 1:]
    lower2 = np.concatenate([lower, lower])
    upper2 = np.concatenate([upper, upper])
    dg2 = np.concatenate([dg, dg])

    def apply(r: np.ndarray) -> np.ndarray:
        rh = np.fft.fftn(r, axes=axes).reshape(B, m)
        sol = kernels.thomas_batched(lower2, dg2, upper2, np.concatenate([rh.real, rh.imag]))
        zh = (sol[:B] + 1j * sol[B:]).reshape(r.shape)
        return np.fft.ifftn(zh, axes=axes).real

    return apply


def _pcg_solve(problem, u, tol, maxiter, x0=None):
    shape = problem.grid_shape + (problem.normal.m + 1,)
    V = np.zeros(shape)
    V[..., 0] = u
    b = -_apply_full(problem, V)[..., 1:]
    precond = _flat_preconditioner(problem)

    def A(x):
        V = np.zeros(shape)
        V[..., 1:] = x
        return _apply_full(problem, V)[..., 1:]

    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A(x)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        bnorm = 1.0
    z = precond(r)
    p = z.copy()
    rz = np.vdot(r, z).real
    it = 0
    res = np.linalg.norm(r) / bnorm
    while res > tol:
        if it >= maxiter:
            raise ConvergenceError(f"PCG did not converge in {maxiter} iterations (residual {res:.3e})")
        Ap = A(p)
        a = rz / np.vdot(p, Ap).real
        x += a * p
        r -= a * Ap
        res = np.linalg.norm(r) / bnorm
        z = precond(r)
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    V[..., 0] = u
    V[..., 1:] = x
    return V, it, res


def solve_extension(problem: TorusExtensionProblem, u, tol: float = 1e-10,
                    maxiter: int = 500) -> ExtensionField:
    """Minimise the discrete weighted energy among fields with trace ``u``."""
    u = np.asarray(u, dtype=float)
    if u.shape != problem.grid_shape:
        raise DomainError(f"boundary data must have shape {problem.grid_shape}")
    if not np.all(np.isfinite(u)):
        raise DomainError("boundary data must be finite")
    if problem.is_flat:
        return ExtensionField(problem, _flat_solve(problem, u))
    V, it, res = _pcg_solve(problem, u, tol, maxiter)
    return ExtensionField(problem, V, it, res)


def discrete_energy(problem: TorusExtensionProblem, U) -> float:
    """kappa * <U, K U> on the discrete measure: the weighted Dirichlet energy."""
    U = np.asarray(getattr(U, "values", U), dtype=float)
    return problem.params.kappa * problem.cell * float(np.vdot(U, _apply_full(problem, U)))


def dtn_apply(problem: TorusExtensionProblem, u, field: ExtensionField | None = None) -> np.ndarray:
    """Weighted Neumann derivative -kappa lim x_N^{1-2g} dU/dx_N.

    Uses U = u + v x_N^{2g} on the first two normal nodes, so that
    x_N^{1-2g} dU/dx_N -> 2 g v.
    """
    if field is None:
        field = solve_extension(problem, u)
    s1 = problem.normal.s[1]
    v = (field.values[..., 1] - field.values[..., 0]) / s1
    return -problem.params.kappa * 2.0 * problem.params.gamma * v


def dtn_variational(problem: TorusExtensionProblem, u, field: ExtensionField | None = None,
                    ) -> np.ndarray:
    """Energy-consistent Neumann derivative: kappa (K U) on the boundary layer.

    ``sum(u * dtn_variational(u)) * cell`` equals the discrete energy of the
    extension exactly, which makes it the gradient used by the minimiser.
    """
    u = np.asarray(u, dtype=float)
    if problem.is_flat:
        n = problem.params.n
        axes = tuple(range(n))
        k2, _, inv, theta = _mode_table(problem)
        sym = _mode_energy(problem.normal, np.unique(np.round(k2, 12)), theta)
        return problem.params.kappa * np.fft.ifftn(np.fft.fftn(u, axes=axes) * sym[inv],
                                                   axes=axes).real
    if field is None:
        field = solve_extension(problem, u)
    return problem.params.kappa * _apply_full(problem, field.values)[..., 0]


def flat_symbol(problem: TorusExtensionProblem) -> np.ndarray:
    """Per-mode multiplier of ``dtn_variational`` on a flat problem, shape grid_shape."""
    k2, uniq, inv, theta = _mode_table(problem)
    return problem.params.kappa * _mode_energy(problem.normal, uniq, theta)[inv]


def dtn_symbol(problem: TorusExtensionProblem, k, method: str = "ansatz") -> float:
    """Discrete Neumann derivative of the single mode with frequency vector k."""
    if not problem.is_flat:
        raise DomainError("dtn_symbol needs a flat problem")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    k2 = float(k @ k)
    theta = solve_mode(problem.normal, [k2])
    g = problem.params.gamma
    if method == "ansatz":
        v = (theta[0, 1] - theta[0, 0]) / problem.normal.s[1]
        return float(-problem.params.kappa * 2.0 * g * v)
    if method == "variational":
        return float(problem.params.kappa * _mode_energy(problem.normal, [k2], theta)[0])
    raise DomainError("method must be 'ansatz' or 'variational'")


# --------------------------------------------------------------------------
# bubble extension for general gamma


def _jnu(nu: float, z: np.ndarray) -> np.ndarray:
    """z^{-nu} J_nu(z), continuous at z = 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 1e-6
    c0 = 1.0 / (2.0**nu * math.gamma(nu + 1.0))
    out[small] = c0 * (1.0 - z[small] ** 2 / (4.0 * (nu + 1.0)))
    zz = z[~small]
    out[~small] = _sp.jv(nu, zz) * zz ** (-nu)
    return out


class HankelBubbleProfile:
    """Extension of the unit bubble for any gamma via its Hankel representation.

    The trace has the transform c xi^{a - n/2} K_gamma(xi) with a = (n-2g)/2,
    and each tangential frequency extends as Theta(xi x_N) with
    Theta(z) = 2^{1-g}/Gamma(g) z^g K_g(z), the decaying solution of the
    weighted mode equation with Theta(0) = 1.  Derivatives are exact
    transforms of differentiated Bessel kernels; the only approximation is
    the quadrature in xi.
    """

    def __init__(self, params: GammaParams, lam: float = 1.0, xi_max: float = 48.0,
                 nodes_per_panel: int = 10, chunk: int = 512):
        self.params = params
        self.lam = float(lam)
        self.xi_max = xi_max
        self.npp = nodes_per_panel
        self.chunk = chunk
        g = params.gamma
        n = params.n
        a = params.decay
        self._A = params.alpha * 2.0 ** (1.0 - a) / math.gamma(a)
        self._ctheta = 2.0 ** (1.0 - g) / math.gamma(g)
        self._nu = n / 2.0 - 1.0
        self._rules: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def _xi_rule(self, rmax: float):
        key = float(np.ceil(max(rmax, 1.0)))
        if key in self._rules:
            return self._rules[key]
        n, g = self.params.n, self.params.gamma
        # first panel [0, x0] absorbs xi^{n-2g-1}; then geometric, then uniform panels
        x0 = 1e-6
        t, w = jacobi_rule(self.npp, 0.0, n - 2.0 * g - 1.0)
        xs = [0.5 * x0 * (1 + t)]
        ws = [w * (0.5 * x0) ** (n - 2.0 * g) / (0.5 * x0 * (1 + t)) ** (n - 2.0 * g - 1.0)]
        edges = list(np.geomspace(x0, 1.0, 15))
        width = min(1.0, 1.0 / key)
        edges += list(np.arange(1.0 + width, self.xi_max + width, width))
        for lo, hi in zip(edges[:-1], edges[1:]):
            x, ww = gauss_legendre(self.npp, lo, hi)
            xs.append(x)
            ws.append(ww)
        rule = (np.concatenate(xs), np.concatenate(ws))
        self._rules[key] = rule
        return rule

    def _theta(self, z):
        z = np.asarray(z, dtype=float)
        out = np.ones_like(z)
        pos = z > 0
        zp = z[pos]
        out[pos] = self._ctheta * zp**self.params.gamma * _sp.kv(self.params.gamma, zp)
        return out

    def _dtheta(self, z):
        g = self.params.gamma
        return -self._ctheta * z**g * _sp.kv(1.0 - g, z)

    def _unit(self, r, xn, what):
        n, g = self.params.n, self.params.gamma
        r = np.asarray(r, dtype=float).ravel()
        xn = np.asarray(xn, dtype=float).ravel()
        xi, w = self._xi_rule(float(r.max(initial=0.0)))
        base = w * xi ** (n - g - 1.0) * _sp.kv(g, xi)
        out = {k: np.empty(r.shape) for k in what}
        nu = self._nu
        for lo in range(0, len(r), self.chunk):
            rr = r[lo:lo + self.chunk, None]
            tt = xn[lo:lo + self.chunk, None]
            z = xi[None, :] * tt
            th = self._theta(z)
            need_d = any(k in what for k in ("WN", "WrN"))
            dth = self._dtheta(z) if need_d else None
            j0 = _jnu(nu, rr * xi) if ("W" in what or "neumann" in what) else None
            j1 = _jnu(nu + 1, rr * xi) if any(k in what for k in ("Wr", "WrN")) else None
            j2 = _jnu(nu + 2, rr * xi) if "Wrr" in what else None
            sl = slice(lo, lo + self.chunk)
            if "W" in what:
                out["W"][sl] = (base * th * j0).sum(axis=1)
            if "WN" in what:
                out["WN"][sl] = (base * xi * dth * j0).sum(axis=1)
            if "Wr" in what:
                out["Wr"][sl] = -(base * xi**2 * th * j1).sum(axis=1)
            if "Wrr" in what:
                out["Wrr"][sl] = (base * xi**4 * th * j2).sum(axis=1)
            if "WrN" in what:
                out["WrN"][sl] = -(base * xi**3 * dth * j1).sum(axis=1)
            if "neumann" in what:
                out["neumann"][sl] = (base * xi ** (2.0 * g) * j0).sum(axis=1)
        return {k: self._A * v for k, v in out.items()}

    def derivs(self, r, xn) -> RadialDerivs:
        r = np.asarray(r, dtype=float)
        xn = np.asarray(xn, dtype=float)
        r, xn = np.broadcast_arrays(r, xn)
        if np.any(xn <= 0):
            raise DomainError("profile derivatives need x_N > 0")
        lam = self.lam
        d = self._unit(r / lam, xn / lam, ("W", "Wr", "WN", "Wrr", "WrN"))
        s = lam ** (-self.params.decay)
        shape = r.shape
        return RadialDerivs(
            W=s * d["W"].reshape(shape),
            Wr=s * lam**-2 * d["Wr"].reshape(shape),
            WN=s * lam**-1 * d["WN"].reshape(shape),
            Wrr=s * lam**-4 * d["Wrr"].reshape(shape),
            WrN=s * lam**-3 * d["WrN"].reshape(shape),
        )

    def W(self, r, xn) -> np.ndarray:
        r, xn = np.broadcast_arrays(np.asarray(r, float), np.asarray(xn, float))
        lam = self.lam
        val = self._unit(r / lam, xn / lam, ("W",))["W"]
        return lam ** (-self.params.decay) * val.reshape(r.shape)

    def neumann_trace(self, r) -> np.ndarray:
        """-kappa lim x_N^{1-2g} dW/dx_N at radius r on the boundary."""
        r = np.asarray(r, dtype=float)
        lam = self.lam
        val = self._unit(r / lam, np.zeros_like(r), ("neumann",))["neumann"]
        return lam ** (-(self.params.n + 2 * self.params.gamma) / 2.0) * val.reshape(r.shape)


def radial_profile(params: GammaParams, lam: float = 1.0) -> HankelBubbleProfile:
    """Evaluator for W_{lam,0} and its radial/normal derivatives, any gamma."""
    return HankelBubbleProfile(params, lam)


# --------------------------------------------------------------------------
# field files


def save_field(path, values, meta: dict | None = None) -> tuple[Path, Path]:
    """Write little-endian float64 data plus a JSON sidecar ``<path>.json``."""
    path = Path(path)
    arr = np.ascontiguousarray(values, dtype="<f8")
    path.write_bytes(arr.tobytes(order="C"))
    side = {"shape": list(arr.shape), "dtype": "float64", "byte_order": "little", "order": "C"}
    side.update(meta or {})
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return path, sidecar


def load_field(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    side = json.loads(path.with_name(path.name + ".json").read_text())
    if side.get("byte_order", "little") != "little" or side.get("dtype", "float64") != "float64":
        raise DomainError("only little-endian float64 fields are supported")
    data = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(side["shape"])
    return data.astype(float), side
