"""Energy expansions of cut-off bubbles under model metrics, by quadrature and fitting.

For each ε the test field χ(|x|/r2)(W_ε + C Ψ_ε) is integrated against the
truncated model metric.  Every integrand is a polynomial in x̄ times a
function of (|x̄|, x_N), so angular integrals are exact sphere moments and
only a 2-D integral over the quarter plane is numeric.  The energy is
quadratic in C,

    I(C) = I00 + 2 C I01 + C^2 I11,

so the three pieces are computed once and every C reuses them.  Each piece
is then fitted on a small basis in ε with log(r2/ε) terms.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bubbles import HalfBubbleProfile, bubble_moment, scaled_derivs
from .errors import DomainError, FitError
from .metric import ModelMetric, density_poly, inverse_poly, poly_dN_over_xN
from .params import GammaParams, c1_prefactor, c2_prefactor, sphere_area
from .polyfield import PolyField, integrate_product, poly_to_fields
from .wquad import _polar_angle_rule, gauss_legendre

__all__ = [
    "Correction",
    "ExpansionRun",
    "ExpansionPieces",
    "ExpansionFit",
    "ScanResult",
    "cutoff",
    "default_eps",
    "energy_pieces",
    "fit_series",
    "energy_expansion",
    "scan_correction",
    "expected_log_coefficient",
    "curvature_invariants",
    "FExpansion",
    "f_expansion",
    "FlatnessReport",
    "flatness_order_check",
    "ratio_check",
    "ratio_closed_form",
    "run_report",
]


# --------------------------------------------------------------------------
# cutoff and grids


def _h(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def cutoff(t) -> tuple[np.ndarray, np.ndarray]:
    """Smooth cutoff equal to 1 on [0, 1] and 0 on [2, inf), with its derivative."""
    t = np.asarray(t, dtype=float)
    a, b = _h(2.0 - t), _h(t - 1.0)
    den = a + b
    chi = np.where(t <= 1.0, 1.0, np.where(t >= 2.0, 0.0, a / np.where(den > 0, den, 1.0)))
    mid = (t > 1.0) & (t < 2.0)
    dchi = np.zeros_like(t)
    if mid.any():
        u, v = 2.0 - t[mid], t[mid] - 1.0
        ha, hb = a[mid], b[mid]
        # d/dt [ha / (ha + hb)] with ha' = -ha/u^2, hb' = hb/v^2
        dchi[mid] = -ha * hb * (1.0 / u**2 + 1.0 / v**2) / (ha + hb) ** 2
    return chi, dchi


def default_eps(r2: float = 1.0, count: int = 10) -> tuple:
    """Geometric ε grid in [r2/200, r2/8], decreasing."""
    return tuple(np.geomspace(r2 / 8.0, r2 / 200.0, count))


def _log_polar_grid(params: GammaParams, eps: float, r2: float, width: float, nodes: int,
                    angular: int, inner: float, outer_panels: int = 8):
    """(r, x_N, w, rho) on the quarter plane of radius 2 r2, graded towards 0.

    The weight includes r^{n-1} x_N^{1-2g} and the polar Jacobian; the sphere
    area is left to the moment factors.
    """
    n, g = params.n, params.gamma
    lo, hi = math.log(inner * eps), math.log(r2)
    k = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, k + 1)
    t, wt = gauss_legendre(nodes, 0.0, 1.0)
    ts = (edges[:-1, None] + np.diff(edges)[:, None] * t[None, :]).ravel()
    wts = (np.diff(edges)[:, None] * wt[None, :]).ravel()
    rho1 = np.exp(ts)
    w1 = wts * rho1 ** (n + 2.0 - 2.0 * g)
    edges2 = np.linspace(r2, 2.0 * r2, outer_panels + 1)
    t2, wt2 = gauss_legendre(nodes + 2, 0.0, 1.0)
    rho2 = (edges2[:-1, None] + np.diff(edges2)[:, None] * t2[None, :]).ravel()
    w2 = (np.diff(edges2)[:, None] * wt2[None, :]).ravel() * rho2 ** (n + 1.0 - 2.0 * g)
    rho = np.concatenate([rho1, rho2])
    wr = np.concatenate([w1, w2])
    phi, wphi = _polar_angle_rule(n, g, angular)
    r = np.outer(rho, np.sin(phi)).ravel()
    xn = np.outer(rho, np.cos(phi)).ravel()
    return r, xn, np.outer(wr, wphi).ravel(), np.repeat(rho, len(phi))


# --------------------------------------------------------------------------
# run description


@dataclass(frozen=True)
class Correction:
    """Correction field C x̄^T A x̄ x_N^p r^{-1} dW_ε/dr with A = II (psi1) or R_iNjN (psi2)."""

    kind: str = "none"
    C: float = 0.0

    def __post_init__(self) -> None:
        k = self.kind.lower()
        if k not in ("none", "psi1", "psi2"):
            raise DomainError(f"correction kind must be none, psi1 or psi2, got {self.kind!r}")
        object.__setattr__(self, "kind", k)

    @property
    def power(self) -> int:
        return {"none": 0, "psi1": 1, "psi2": 2}[self.kind]

    def matrix(self, mm: ModelMetric) -> np.ndarray | None:
        if self.kind == "psi1":
            return np.asarray(mm.II, float)
        if self.kind == "psi2":
            return np.asarray(mm.R_iNjN, float)
        return None


@dataclass(frozen=True)
class ExpansionRun:
    params: GammaParams
    mm: ModelMetric
    correction: Correction = field(default_factory=Correction)
    r2: float = 1.0
    eps: tuple = ()
    order: int | None = None
    angular: int = 40
    nodes: int = 8
    panel_width: float = 0.35
    inner: float = 1e-5
    workers: int = 1

    def __post_init__(self) -> None:
        if self.mm.n != self.params.n:
            raise DomainError("model metric and params disagree on n")
        if not self.r2 > 0:
            raise DomainError("r2 must be positive")
        if 2.0 * self.r2 > self.mm.chart_radius:
            raise DomainError("the cutoff support 2 r2 exceeds the chart radius")
        eps = self.eps or default_eps(self.r2)
        eps = tuple(float(e) for e in eps)
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise DomainError("epsilon list must be strictly decreasing")
        if eps[0] > self.r2 / 4.0 or eps[-1] <= 0:
            raise DomainError("epsilon values must lie in (0, r2/4]")
        object.__setattr__(self, "eps", eps)
        order = self.order if self.order is not None else self.mm.truncation_order
        object.__setattr__(self, "order", int(order))

    def with_correction(self, kind: str, C: float) -> "ExpansionRun":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw["correction"] = Correction(kind, C)
        return ExpansionRun(**kw)


@dataclass(frozen=True)
class ExpansionPieces:
    eps: np.ndarray
    I00: np.ndarray
    I01: np.ndarray
    I11: np.ndarray

    def energy(self, C: float) -> np.ndarray:
        return self.I00 + 2.0 * C * self.I01 + C * C * self.I11


@dataclass(frozen=True)
class ExpansionFit:
    basis: tuple
    coef: np.ndarray
    cov: np.ndarray
    residual: float
    order: int
    eps: np.ndarray
    values: np.ndarray

    def coefficient(self, label: str) -> tuple[float, float]:
        i = self.basis.index(label)
        return float(self.coef[i]), float(math.sqrt(max(self.cov[i, i], 0.0)))

    @property
    def log_coef(self) -> float:
        return self.coefficient(f"eps^{self.order} log")[0]

    @property
    def log_err(self) -> float:
        return self.coefficient(f"eps^{self.order} log")[1]

    @property
    def constant(self) -> float:
        return self.coefficient("1")[0]

    def as_dict(self) -> dict:
        return {
            "basis": list(self.basis),
            "coef": self.coef.tolist(),
            "cov": self.cov.tolist(),
            "residual": self.residual,
            "order": self.order,
            "eps": self.eps.tolist(),
            "values": self.values.tolist(),
        }


# --------------------------------------------------------------------------
# metric fields


def _poly_mul(a: dict, b: dict, order: int) -> dict:
    out: dict = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            if sum(k) > order:
                continue
            val = ca * cb
            out[k] = out[k] + val if k in out else val
    return out


def _metric_polys(mm: ModelMetric):
    """Excess parts of ḡ^{ij} sqrt|ḡ| and sqrt|ḡ|, and x_N^{-1} d_N sqrt|ḡ|."""
    N, n = mm.N, mm.n
    P = density_poly(mm)
    G = inverse_poly(mm)
    GP = _poly_mul(G, P, mm.truncation_order)
    zero = (0,) * N
    GPx = dict(GP)
    GPx[zero] = GPx.get(zero, np.zeros((n, n))) - np.eye(n)
    Px = dict(P)
    Px[zero] = Px.get(zero, 0.0) - 1.0
    GPx = {k: v for k, v in GPx.items() if np.any(v != 0)}
    Px = {k: v for k, v in Px.items() if v != 0}
    Q = poly_dN_over_xN(P, N)
    return GPx, Px, Q


def _profile(params: GammaParams):
    if params.gamma == 0.5:
        return HalfBubbleProfile(params)
    from .extsolve import radial_profile

    return radial_profile(params)


def _fields(params: GammaParams, corr: Correction, A, eps, r2, profile, r, xn, rho):
    n = params.n
    d = scaled_derivs(profile, params, eps, r, xn)
    chi, dchi = cutoff(rho / r2)
    chi_r = dchi / (r2 * rho)
    ones = np.ones_like(r)
    eye = np.eye(n, dtype=np.int64)
    g0 = chi_r * d.W + chi * d.Wr
    U0 = (PolyField.scalar(n, chi * d.W),
          [PolyField.monomial(n, eye[i], g0) for i in range(n)],
          PolyField.scalar(n, xn * chi_r * d.W + chi * d.WN))
    if corr.kind == "none":
        return U0, None
    p = corr.power
    xp = xn**p
    U = PolyField.quadratic_form(A, chi * xp * d.Wr)
    inner = PolyField.quadratic_form(A, xp * (chi_r * d.Wr + chi * d.Wrr))
    grad = [PolyField.linear_form(2.0 * A[i], chi * d.Wr * xp)
            + inner * PolyField.monomial(n, eye[i], ones) for i in range(n)]
    dN = PolyField.quadratic_form(
        A, xn * chi_r * d.Wr * xp + chi * (p * xn ** (p - 1) * d.Wr + xp * d.WrN))
    return U0, (U, grad, dN)


def _bilinear(params, U, V, GPx, Px, Q, r, w, flat: bool) -> float:
    n = params.n
    u, du, duN = U
    v, dv, dvN = V
    total = 0.0
    if flat:
        for i in range(n):
            total += integrate_product(du[i], dv[i], r, w)
        total += integrate_product(duN, dvN, r, w)
    for i in range(n):
        for j in range(n):
            F = GPx[i][j]
            if F is not None:
                total += integrate_product(F * du[i], dv[j], r, w)
    if Px is not None:
        total += integrate_product(Px * duN, dvN, r, w)
    if Q is not None:
        total -= 0.5 * (n - 2.0 * params.gamma) * integrate_product(Q * u, v, r, w)
    return params.kappa * total


def _pieces_at(run: ExpansionRun, eps: float, polys, profile) -> tuple[float, float, float]:
    p = run.params
    r, xn, w, rho = _log_polar_grid(p, eps, run.r2, run.panel_width, run.nodes,
                                    run.angular, run.inner)
    GPx_d, Px_d, Q_d = polys
    GPx = poly_to_fields(GPx_d, p.n, xn) if GPx_d else [[None] * p.n for _ in range(p.n)]
    Px = poly_to_fields(Px_d, p.n, xn) if Px_d else None
    Q = poly_to_fields(Q_d, p.n, xn) if Q_d else None
    A = run.correction.matrix(run.mm)
    U0, U1 = _fields(p, run.correction, A, eps, run.r2, profile, r, xn, rho)
    I00 = _bilinear(p, U0, U0, GPx, Px, Q, r, w, True)
    if U1 is None:
        return I00, 0.0, 0.0
    I01 = _bilinear(p, U0, U1, GPx, Px, Q, r, w, True)
    I11 = _bilinear(p, U1, U1, GPx, Px, Q, r, w, True)
    return I00, I01, I11


def energy_pieces(run: ExpansionRun) -> ExpansionPieces:
    """I00, I01, I11 at every ε of the run (the C of the run is ignored)."""
    polys = _metric_polys(run.mm)
    profile = _profile(run.params)
    job = lambda e: _pieces_at(run, e, polys, profile)
    if run.workers > 1:
        with ThreadPoolExecutor(run.workers) as ex:
            rows = list(ex.map(job, run.eps))
    else:
        rows = [job(e) for e in run.eps]
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise FitError("non-finite energy value")
    return ExpansionPieces(np.array(run.eps), arr[:, 0], arr[:, 1], arr[:, 2])


# --------------------------------------------------------------------------
# fitting


def _basis(order: int, r2: float, eps: np.ndarray) -> tuple[tuple, np.ndarray]:
    L = np.log(r2 / eps)
    labels = ("1", f"eps^{order}", f"eps^{order} log", f"eps^{order + 1}",
              f"eps^{order + 2}", f"eps^{order + 3}")
    cols = [np.ones_like(eps), eps**order, eps**order * L, eps ** (order + 1),
            eps ** (order + 2), eps ** (order + 3)]
    return labels, np.stack(cols, axis=1)


def fit_series(eps, values, order: int, r2: float = 1.0, max_cond: float = 1e12) -> ExpansionFit:
    """Weighted least squares on {1, ε^k, ε^k L, ε^{k+1}, ε^{k+2}, ε^{k+3}}, L = log(r2/ε).

    Only the leading power carries a log: the truncated model produces no
    higher log terms, while the bubble tail beyond the cutoff contributes a
    pure power series.  Rows are weighted by ε^{-k} so the smallest ε dominate.
    """
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    labels, X = _basis(order, r2, eps)
    m, p = X.shape
    if m <= p:
        raise FitError(f"need more than {p} epsilon values, got {m}")
    wts = eps ** (-order)
    Xw = X * wts[:, None]
    yw = values * wts
    scale = np.linalg.norm(Xw, axis=0)
    Xs = Xw / scale
    if np.linalg.cond(Xs) > max_cond:
        raise FitError("ill-conditioned fit: widen the epsilon range")
    beta, *_ = np.linalg.lstsq(Xs, yw, rcond=None)
    res = yw - Xs @ beta
    dof = m - p
    s2 = float(res @ res) / dof
    cov_s = s2 * np.linalg.inv(Xs.T @ Xs)
    coef = beta / scale
    cov = cov_s / np.outer(scale, scale)
    return ExpansionFit(labels, coef, cov, float(math.sqrt(s2)), order, eps, values)


def energy_expansion(run: ExpansionRun, pieces: ExpansionPieces | None = None) -> ExpansionFit:
    """Fitted expansion of I(χ(W_ε + C Ψ_ε)) for the run's correction constant."""
    pieces = pieces or energy_pieces(run)
    return fit_series(pieces.eps, pieces.energy(run.correction.C), run.order, run.r2)


@dataclass(frozen=True)
class ScanResult:
    kind: str
    C_grid: np.ndarray
    log_coefs: np.ndarray
    C_opt: float
    coef_at_opt: float
    err_at_opt: float
    parabola: np.ndarray
    r_squared: float


def scan_correction(run: ExpansionRun, kind: str | None = None, C_range=(-1.0, 0.5),
                    steps: int = 31, pieces: ExpansionPieces | None = None) -> ScanResult:
    """Grid search of the fitted log coefficient over C, refined by a local parabola."""
    kind = (kind or run.correction.kind).lower()
    if kind == "none":
        raise DomainError("scan needs a psi1 or psi2 correction")
    if steps < 5:
        raise DomainError("need at least 5 scan points")
    if run.correction.kind != kind:
        run = run.with_correction(kind, 0.0)
    pieces = pieces or energy_pieces(run)
    Cs = np.linspace(C_range[0], C_range[1], steps)
    fits = [fit_series(pieces.eps, pieces.energy(C), run.order, run.r2) for C in Cs]
    vals = np.array([f.log_coef for f in fits])
    quad = np.polyfit(Cs, vals, 2)
    pred = np.polyval(quad, Cs)
    ss = float(((vals - vals.mean()) ** 2).sum())
    r2 = 1.0 - float(((vals - pred) ** 2).sum()) / ss if ss > 0 else 1.0
    i = int(np.argmin(vals))
    lo, hi = max(0, i - 1), min(steps, i + 2)
    if hi - lo == 3:
        loc = np.polyfit(Cs[lo:hi], vals[lo:hi], 2)
        C_opt = -loc[1] / (2.0 * loc[0]) if loc[0] > 0 else float(Cs[i])
    else:
        C_opt = float(Cs[i])
    f = fit_series(pieces.eps, pieces.energy(C_opt), run.order, run.r2)
    return ScanResult(kind, Cs, vals, float(C_opt), f.log_coef, f.log_err, quad, r2)


# --------------------------------------------------------------------------
# closed-form targets for the model families


def curvature_invariants(mm: ModelMetric) -> tuple[float, float]:
    """(|W_h|^2, |R_iNjN|^2): squared Weyl norm of the boundary metric and the
    squared norm of R_iNjN, which equals the tangential Ricci block of the
    compactified metric in the normalised umbilic setting."""
    n = mm.n
    R = np.asarray(mm.R_ikjl, float)
    ric = np.einsum("ikjk->ij", R)
    scal = float(np.trace(ric))
    if n >= 3:
        w2 = ((R**2).sum() - 4.0 / (n - 2.0) * (ric**2).sum()
              + 2.0 / ((n - 1.0) * (n - 2.0)) * scal**2)
    else:
        w2 = 0.0
    return float(max(w2, 0.0)), float((np.asarray(mm.R_iNjN) ** 2).sum())


def expected_log_coefficient(run: ExpansionRun) -> float | None:
    """Leading log coefficient predicted for the three model families at gamma = 1/2."""
    p, mm, corr = run.params, run.mm, run.correction
    if p.gamma != 0.5:
        return None
    a2 = p.alpha**2
    C = corr.C
    if p.n == 3 and run.order == 2 and corr.kind in ("none", "psi1"):
        return math.pi / 24.0 * a2 * sphere_area(3) * mm.II_norm2 * (1 + 2 * C) ** 2
    if p.n == 4 and run.order == 3 and corr.kind == "none":
        return 3.0 / 32.0 * a2 * sphere_area(4) * mm.R_NN_N
    if p.n == 5 and run.order == 4 and corr.kind in ("none", "psi2"):
        w2, ric2 = curvature_invariants(mm)
        return math.pi / 640.0 * a2 * sphere_area(5) * (
            -w2 / 3.0 + (2.0 + 24.0 * C + 56.0 * C * C) * ric2)
    return None


# --------------------------------------------------------------------------
# boundary f expansions


def _radial_rule(eps: float, r2: float, width: float = 0.25, nodes: int = 10,
                 inner: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = math.log(inner * eps), math.log(r2)
    k = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, k + 1)
    t, wt = gauss_legendre(nodes, 0.0, 1.0)
    ts = (edges[:-1, None] + np.diff(edges)[:, None] * t[None, :]).ravel()
    wts = (np.diff(edges)[:, None] * wt[None, :]).ravel()
    r1 = np.exp(ts)
    e2 = np.linspace(r2, 2.0 * r2, 9)
    t2, w2 = gauss_legendre(nodes + 2, 0.0, 1.0)
    r2s = (e2[:-1, None] + np.diff(e2)[:, None] * t2[None, :]).ravel()
    w2s = (np.diff(e2)[:, None] * w2[None, :]).ravel()
    return np.concatenate([r1, r2s]), np.concatenate([wts * r1, w2s])


def _f_moment_integral(params: GammaParams, f: dict, eps: float, r2: float) -> float:
    """int_{R^n} f(x̄) (χ(|x̄|/r2) w_ε)^{2*+1} dx̄ with exact angular moments."""
    from .wquad import sphere_monomial_integral

    n = params.n
    r, w = _radial_rule(eps, r2)
    chi, _ = cutoff(r / r2)
    power = 2.0 * n / (n - 2.0 * params.gamma)
    # w_ε^{2*+1} = alpha^power ε^{-n} (1 + (r/ε)^2)^{-n}
    base = params.alpha**power * eps ** (-n) * (1.0 + (r / eps) ** 2) ** (-n) * chi**power
    total = 0.0
    for alpha_, c in f.items():
        alpha_ = tuple(int(v) for v in alpha_)
        if len(alpha_) != n:
            raise DomainError(f"monomial {alpha_} does not have {n} exponents")
        mom = sphere_monomial_integral(n, alpha_)
        if mom == 0.0 or c == 0.0:
            continue
        k = sum(alpha_)
        total += c * mom * float(np.dot(w, r ** (k + n - 1) * base))
    return total


def _radial_monomials(n: int, coeffs: dict) -> dict:
    """|x̄|^{2j} expanded into monomials; coeffs maps j -> coefficient."""
    from itertools import combinations_with_replacement

    out: dict = {}
    for j, c in coeffs.items():
        if j == 0:
            key = (0,) * n
            out[key] = out.get(key, 0.0) + c
            continue
        # multinomial expansion of (x_1^2 + ... + x_n^2)^j
        for combo in combinations_with_replacement(range(n), j):
            e = [0] * n
            for i in combo:
                e[i] += 2
            cnt = [combo.count(i) for i in range(n)]
            mult = math.factorial(j)
            for m_ in cnt:
                mult //= math.factorial(m_)
            key = tuple(e)
            out[key] = out.get(key, 0.0) + c * mult
    return out


@dataclass(frozen=True)
class FExpansion:
    fit_basis: tuple
    coef: np.ndarray
    cov: np.ndarray
    residual: float
    predicted: dict
    eps: np.ndarray
    values: np.ndarray

    def coefficient(self, label: str) -> tuple[float, float]:
        i = self.fit_basis.index(label)
        return float(self.coef[i]), float(math.sqrt(max(self.cov[i, i], 0.0)))


def _f_derivatives(n: int, f: dict) -> tuple[float, float, float]:
    """f(0), Δf(0) and Δ²f(0) of a polynomial given as {exponent: coef}."""
    f0 = float(sum(c for a, c in f.items() if sum(a) == 0))
    lap = 0.0
    bilap = 0.0
    for a, c in f.items():
        a = tuple(int(v) for v in a)
        if sum(a) == 2 and max(a) == 2:
            lap += 2.0 * c
        if sum(a) == 4:
            if max(a) == 4:
                bilap += 24.0 * c
            elif sorted(a)[-2:] == [2, 2]:
                bilap += 8.0 * c
    return f0, lap, bilap


def f_expansion(params: GammaParams, f: dict, eps=None, r2: float = 1.0) -> FExpansion:
    """Fit int f (χ w_ε)^{2*+1} on {1, ε^2, ε^4, ε^n, ε^{n+2}} and report the
    moment predictions for the ε^2 and ε^4 coefficients.

    ``f`` maps n-tuples of exponents to coefficients (degree <= 4).
    """
    n = params.n
    f = {tuple(int(v) for v in k): float(c) for k, c in f.items()}
    if any(sum(k) > 4 for k in f):
        raise DomainError("f must have degree at most 4")
    f0, lap, bilap = _f_derivatives(n, f)
    if not f0 > 0:
        raise DomainError("f(0) must be positive")
    has2 = any(sum(k) == 2 for k in f)
    has4 = any(sum(k) == 4 for k in f)
    if has2 and not 2 < n:
        raise DomainError(f"second moment diverges for n = {n}")
    if has4 and not 4 < n:
        raise DomainError(f"fourth moment diverges for n = {n}")
    eps = np.asarray(eps if eps is not None else default_eps(r2, 10), dtype=float)
    vals = np.array([_f_moment_integral(params, f, e, r2) for e in eps])
    powers = sorted({0, 2, 4, n, n + 2} if n > 4 else {0, 2, n, n + 2, n + 4})
    labels = tuple("1" if k == 0 else f"eps^{k}" for k in powers)
    X = np.stack([eps**k for k in powers], axis=1)
    m, p = X.shape
    if m <= p:
        raise FitError(f"need more than {p} epsilon values")
    Xs = X / np.linalg.norm(X, axis=0)
    scale = np.linalg.norm(X, axis=0)
    if np.linalg.cond(Xs) > 1e13:
        raise FitError("ill-conditioned fit: widen the epsilon range")
    beta, *_ = np.linalg.lstsq(Xs, vals, rcond=None)
    res = vals - Xs @ beta
    s2 = float(res @ res) / (m - p)
    cov = s2 * np.linalg.inv(Xs.T @ Xs) / np.outer(scale, scale)
    pred = {"1": f0 * bubble_moment(params, 0)}
    if n > 2:
        pred["eps^2"] = lap / (2.0 * n) * bubble_moment(params, 2) if has2 else 0.0
    if n > 4:
        pred["eps^4"] = bilap / (8.0 * n * (n + 2.0)) * bubble_moment(params, 4) if has4 else 0.0
    return FExpansion(labels, beta / scale, cov, math.sqrt(s2), pred, eps, vals)


@dataclass(frozen=True)
class FlatnessReport:
    d: float
    exponent: float
    predicted_exponent: float
    log_factor: bool
    threshold: float
    active: bool
    deficits: np.ndarray
    eps: np.ndarray


def flatness_order_check(params: GammaParams, d: float, eps=None, r2: float = 1.0) -> FlatnessReport:
    """Deficit of f = f(0) - |x̄|^d against the bubble, and its power in ε.

    The deficit is -int |x̄|^d (χ w_ε)^{2*+1}.  It behaves like ε^d for
    d < n, like ε^n log(1/ε) at d = n and like ε^n beyond, so it is
    o(ε^{n - 2γ}) exactly when the fitted exponent exceeds n - 2γ.
    """
    if not d > 0:
        raise DomainError("flatness order d must be positive")
    n = params.n
    eps = np.asarray(eps if eps is not None else np.geomspace(r2 / 50.0, r2 / 5000.0, 10), float)
    thr = n - 2.0 * params.gamma
    if math.isinf(d):
        z = np.zeros_like(eps)
        return FlatnessReport(d, math.inf, math.inf, False, thr, True, z, eps)
    power = 2.0 * n / (n - 2.0 * params.gamma)
    defs = []
    for e in eps:
        r, w = _radial_rule(e, r2)
        chi, _ = cutoff(r / r2)
        base = params.alpha**power * e ** (-n) * (1.0 + (r / e) ** 2) ** (-n) * chi**power
        defs.append(-sphere_area(n) * float(np.dot(w, r ** (d + n - 1) * base)))
    defs = np.array(defs)
    log_factor = abs(d - n) < 1e-12
    y = np.log(np.abs(defs))
    x = np.log(eps)
    if log_factor:
        y = y - np.log(np.log(r2 / eps))
    k = max(3, len(eps) // 2)
    slope = float(np.polyfit(x[-k:], y[-k:], 1)[0])
    pred = min(d, float(n))
    return FlatnessReport(float(d), slope, pred, log_factor, thr, slope > thr + 1e-3, defs, eps)


# --------------------------------------------------------------------------
# weighted gradient ratios


def ratio_closed_form(params: GammaParams, which: str) -> float:
    """Ratio implied by equating the two displayed forms of c1 (or c2)."""
    n, g = params.n, params.gamma
    which = which.lower()
    if which == "c1":
        return c1_prefactor(n, g) * (n - 2.0 * g) / (2.0 * n * (n - 2.0))
    if which == "c2":
        return c2_prefactor(n, g) * (n - 2.0 * g) / (8.0 * n * (n - 2.0) * (n - 4.0))
    raise DomainError(f"which must be 'c1' or 'c2', got {which!r}")


def _ratio_space(params: GammaParams, extra: int, angular: int, width: float,
                 nodes: int) -> float:
    n, g = params.n, params.gamma
    # log rho panels; the integrands decay algebraically, i.e. exponentially in log rho
    lo, hi = math.log(1e-8), math.log(1e8)
    k = int(math.ceil((hi - lo) / width))
    edges = np.linspace(lo, hi, k + 1)
    t, wt = gauss_legendre(nodes, 0.0, 1.0)
    ts = (edges[:-1, None] + np.diff(edges)[:, None] * t[None, :]).ravel()
    wts = (np.diff(edges)[:, None] * wt[None, :]).ravel()
    rho = np.exp(ts)
    wr = wts * rho ** (n + 2.0 - 2.0 * g)
    phi, wphi = _polar_angle_rule(n, g, angular)
    r = np.outer(rho, np.sin(phi)).ravel()
    xn = np.outer(rho, np.cos(phi)).ravel()
    w = np.outer(wr, wphi).ravel()
    dv = HalfBubbleProfile(params).derivs(r, xn)
    grad2 = (r * dv.Wr) ** 2 + dv.WN**2
    return float(np.dot(w, xn**extra * grad2)) / float(np.dot(w, grad2))


def _ratio_fourier(params: GammaParams, extra: int) -> float:
    """Same ratio after Plancherel in x̄.

    With ŵ(ξ) proportional to |ξ|^{-g} K_g(|ξ|) and the extension profile
    Θ(t) = t^g K_g(t) (up to a constant), both integrals factor into a
    frequency integral times a normal integral.
    """
    from scipy import integrate, special

    n, g = params.n, params.gamma
    kn = 1.0 - 2.0 * g + extra

    def freq(p_):
        f = lambda x: x ** (n - 1.0 - 2.0 * g + p_) * special.kv(g, x) ** 2
        return sum(integrate.quad(f, a, b, limit=400, epsabs=0.0, epsrel=1e-12)[0]
                   for a, b in ((0.0, 1.0), (1.0, 40.0), (40.0, np.inf)))

    def normal(k):
        f = lambda t: t ** (k + 2.0 * g) * (special.kv(g, t) ** 2 + special.kv(1.0 - g, t) ** 2)
        return sum(integrate.quad(f, a, b, limit=400, epsabs=0.0, epsrel=1e-12)[0]
                   for a, b in ((0.0, 1.0), (1.0, 40.0), (40.0, np.inf)))

    num = freq(1.0 - kn) * normal(kn)
    den = freq(2.0 * g) * normal(1.0 - 2.0 * g)
    return num / den


def ratio_check(params: GammaParams, which: str = "c1", route: str = "auto",
                angular: int = 48, width: float = 0.4, nodes: int = 10) -> tuple[float, float]:
    """(quadrature ratio, closed-form ratio) of int x_N^k |∇W|^2 over int x_N^{1-2g} |∇W|^2.

    k = 3 - 2g for ``c1`` and 5 - 2g for ``c2``.  ``route`` is ``space``
    (polar quadrature of the closed-form extension, gamma = 1/2 only),
    ``fourier`` (Plancherel in x̄, any gamma) or ``auto``.
    """
    n, g = params.n, params.gamma
    which = which.lower()
    extra = {"c1": 2, "c2": 4}.get(which)
    if extra is None:
        raise DomainError(f"which must be 'c1' or 'c2', got {which!r}")
    if not n > extra + 2.0 * g:
        raise DomainError(f"numerator diverges for n = {n}, gamma = {g}")
    if route == "auto":
        route = "space" if g == 0.5 else "fourier"
    if route == "space":
        if g != 0.5:
            raise DomainError("the space route needs the closed-form extension (gamma = 1/2)")
        val = _ratio_space(params, extra, angular, width, nodes)
    elif route == "fourier":
        val = _ratio_fourier(params, extra)
    else:
        raise DomainError(f"unknown route {route!r}")
    return val, ratio_closed_form(params, which)


# --------------------------------------------------------------------------
# reporting


def run_report(run: ExpansionRun, fit: ExpansionFit, scan: ScanResult | None = None,
               tol: float = 0.05) -> dict:
    """JSON-ready summary: inputs, fitted coefficients with covariance, target and verdict."""
    target = expected_log_coefficient(run)
    out = {
        "params": run.params.as_dict(),
        "correction": {"kind": run.correction.kind, "C": run.correction.C},
        "r2": run.r2,
        "order": run.order,
        "fit": fit.as_dict(),
        "log_coef": fit.log_coef,
        "log_err": fit.log_err,
        "target": target,
    }
    if target is not None:
        out["pass"] = bool(abs(fit.log_coef - target) <= tol * abs(target) + 2 * fit.log_err)
    if scan is not None:
        out["scan"] = {
            "C_opt": scan.C_opt,
            "coef_at_opt": scan.coef_at_opt,
            "err_at_opt": scan.err_at_opt,
            "r_squared": scan.r_squared,
            "parabola": scan.parabola.tolist(),
        }
    return json.loads(json.dumps(out, default=float))
