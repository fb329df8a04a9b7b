"""Constrained minimisation of the extension energy and its continuation in beta.

The energy of an extension is a quadratic form in its trace u, so the
scheme works on the boundary: u -> <u, P u> with P the energy-consistent
Neumann map of the extension plus the boundary potentials (mean curvature
at gamma = 1/2, Q for the J form).  Minimising

    R(u) = <u, P u> / (int f |u|^{beta+1})^{2/(beta+1)}

over u is equivalent to minimising the energy on the constraint set, and on
the constraint set the L2 gradient of R is 2 (P u - theta f |u|^{beta-1} u),
which is also the Euler-Lagrange residual.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import minimize_scalar

from .bubbles import bubble_moment
from .errors import ConvergenceError, DomainError
from .extsolve import (
    TorusExtensionProblem,
    discrete_energy,
    dtn_variational,
    flat_symbol,
    solve_extension,
)
from .params import GammaParams

__all__ = [
    "ConstraintProblem",
    "MinimizeResult",
    "ContinuationStep",
    "BlowupReport",
    "boundary_potential",
    "energy_I",
    "constraint_value",
    "minimize_subcritical",
    "beta_continuation",
    "blowup_diagnostics",
    "criterion_bound",
    "criterion_check",
    "write_telemetry",
    "TELEMETRY_COLUMNS",
]

SUPERCRITICAL_FLAG = "supercritical-compactness-unknown"
TELEMETRY_COLUMNS = ("iteration", "energy", "constraint_residual", "peak_value", "peak_location")


@dataclass(frozen=True)
class ConstraintProblem:
    """Minimise the extension energy subject to int f |u|^{beta+1} = 1.

    ``H_field`` enters only when gamma is exactly 1/2, with weight (n-1)/2;
    ``Q_field`` switches to the J form and is added as int Q u^2.
    """

    ext: TorusExtensionProblem
    f: np.ndarray = field(repr=False)
    beta: float
    H_field: np.ndarray | None = field(default=None, repr=False)
    Q_field: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        shape = self.ext.grid_shape
        f = np.broadcast_to(np.asarray(self.f, dtype=float), shape).copy()
        if not np.all(np.isfinite(f)):
            raise DomainError("f must be finite")
        if not f.max() > 0:
            raise DomainError("f must be positive somewhere")
        object.__setattr__(self, "f", f)
        ts = self.params.two_star
        if not 1.0 < self.beta <= ts + 1e-14:
            raise DomainError(f"beta must lie in (1, {ts}], got {self.beta}")
        for name in ("H_field", "Q_field"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name,
                                   np.broadcast_to(np.asarray(val, dtype=float), shape).copy())

    @property
    def params(self) -> GammaParams:
        return self.ext.params

    @property
    def supercritical(self) -> bool:
        return self.beta >= self.params.two_star - 1e-14

    def with_beta(self, beta: float) -> "ConstraintProblem":
        return ConstraintProblem(self.ext, self.f, beta, self.H_field, self.Q_field)

    def scaled_f(self, c: float) -> "ConstraintProblem":
        return ConstraintProblem(self.ext, c * self.f, self.beta, self.H_field, self.Q_field)


@dataclass(frozen=True)
class MinimizeResult:
    u: np.ndarray = field(repr=False)
    U: object = field(repr=False)
    theta: float
    iterations: int
    converged: bool
    constraint_residual: float
    el_residual: float
    beta: float
    flags: tuple = ()
    history: list = field(default_factory=list, repr=False)

    @property
    def peak(self) -> float:
        return float(self.u.max())


def boundary_potential(problem: ConstraintProblem) -> np.ndarray:
    """Diagonal boundary term: (n-1)/2 H at gamma = 1/2 exactly, plus Q."""
    p = problem.params
    pot = np.zeros(problem.ext.grid_shape)
    if problem.H_field is not None and p.gamma == 0.5:
        pot += 0.5 * (p.n - 1) * problem.H_field
    if problem.Q_field is not None:
        pot += problem.Q_field
    return pot


def energy_I(problem: ConstraintProblem, U) -> float:
    """Discrete energy of an extension field plus the boundary potential terms."""
    values = np.asarray(getattr(U, "values", U), dtype=float)
    u = values[..., 0]
    ext = problem.ext
    return discrete_energy(ext, values) + ext.cell * float(np.sum(boundary_potential(problem) * u * u))


def constraint_value(u, f, beta: float, cell: float = 1.0) -> float:
    """int f |u|^{beta+1} on the discrete boundary measure with cell volume ``cell``."""
    u = np.asarray(u, dtype=float)
    return cell * float(np.sum(np.asarray(f, dtype=float) * np.abs(u) ** (beta + 1.0)))


# --------------------------------------------------------------------------
# boundary operator


class _BoundaryOperator:
    def __init__(self, problem: ConstraintProblem, tol: float):
        self.problem = problem
        ext = problem.ext
        self.axes = tuple(range(ext.params.n))
        self.pot = boundary_potential(problem)
        self.tol = tol
        if ext.is_flat:
            self.sym = flat_symbol(ext)
            flat = self.sym
        else:
            self.sym = None
            flat = flat_symbol(TorusExtensionProblem(ext.params, ext.L, ext.M, ext.normal,
                                                     ext.tangential, ext.mass))
        self.pre = 1.0 / (flat + 1.0)

    def apply(self, u: np.ndarray) -> np.ndarray:
        if self.sym is not None:
            Pu = np.fft.ifftn(np.fft.fftn(u, axes=self.axes) * self.sym, axes=self.axes).real
        else:
            fld = solve_extension(self.problem.ext, u, tol=self.tol)
            Pu = dtn_variational(self.problem.ext, u, fld)
        return Pu + self.pot * u

    def precondition(self, g: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(np.fft.fftn(g, axes=self.axes) * self.pre, axes=self.axes).real


def _peak(u: np.ndarray, coords: list) -> tuple[float, tuple]:
    idx = np.unravel_index(int(np.argmax(u)), u.shape)
    return float(u[idx]), tuple(float(c[i]) for c, i in zip(coords, idx))


def minimize_subcritical(problem: ConstraintProblem, init=None, tol: float = 1e-7,
                         constraint_tol: float = 1e-10, maxiter: int = 5000,
                         step: float | None = None, seed: int = 0,
                         record: bool = True) -> MinimizeResult:
    """Preconditioned projected gradient descent on the constraint set.

    Each accepted iterate is replaced by |u| and rescaled onto the
    constraint.  The search direction is (P_flat + 1)^{-1} applied to the
    residual; the step is found by Armijo backtracking on R, starting from
    twice the previous accepted step.
    """
    ext = problem.ext
    cell = ext.cell
    beta = problem.beta
    shape = ext.grid_shape
    if init is None:
        init = np.ones(shape)
    elif isinstance(init, str) and init == "random":
        init = 0.5 + np.random.default_rng(seed).random(shape)
    u = np.abs(np.asarray(init, dtype=float))
    if u.shape != shape:
        raise DomainError(f"init must have shape {shape}")
    N0 = constraint_value(u, problem.f, beta, cell)
    if not N0 > 0:
        raise DomainError("initial field cannot be normalised: int f |u|^{beta+1} <= 0")
    u = u / N0 ** (1.0 / (beta + 1.0))
    flags = (SUPERCRITICAL_FLAG,) if problem.supercritical else ()

    op = _BoundaryOperator(problem, tol=min(1e-10, 0.01 * tol))
    coords = ext.coordinates()
    f = problem.f
    ip = lambda a, b: cell * float(np.vdot(a, b))

    def state(v):
        Pv = op.apply(v)
        N = constraint_value(v, f, beta, cell)
        return Pv, N, ip(v, Pv) / N ** (2.0 / (beta + 1.0))

    def project(v):
        v = np.abs(v)
        N = constraint_value(v, f, beta, cell)
        if not N > 0:
            return None
        return v / N ** (1.0 / (beta + 1.0))

    Pu, N, R = state(u)
    tau = 1.0 if step is None else step
    history: list = []
    el = math.inf
    it = 0
    for it in range(maxiter + 1):
        theta = ip(u, Pu) / N ** (2.0 / (beta + 1.0))
        rhs = theta * f * u**beta
        g = Pu - theta * f * np.abs(u) ** (beta - 1.0) * u
        scale = math.sqrt(ip(rhs, rhs))
        gn = math.sqrt(ip(g, g))
        el = gn / scale if scale > 1e-14 else gn
        if record:
            pk, loc = _peak(u, coords)
            history.append({"iteration": it, "energy": theta, "constraint_residual": abs(N - 1.0),
                            "peak_value": pk, "peak_location": loc})
        if el <= tol:
            break
        if it == maxiter:
            break
        d = -op.precondition(g)
        slope = 2.0 * ip(g, d)
        if slope >= 0:
            d = -g
            slope = -2.0 * ip(g, g)
        t = min(2.0 * tau, 1e6)
        for _ in range(60):
            v = project(u + t * d)
            if v is not None:
                Pv, Nv, Rv = state(v)
                if Rv <= R + 1e-4 * t * slope:
                    break
            t *= 0.5
        else:
            raise ConvergenceError(f"line search failed at iteration {it} (R = {R})")
        if R - Rv <= 1e-16 * abs(R) and el < 1e3 * tol:
            u, Pu, N, R = v, Pv, Nv, Rv
            break
        u, Pu, N, R, tau = v, Pv, Nv, Rv, t

    theta = ip(u, Pu) / N ** (2.0 / (beta + 1.0))
    g = Pu - theta * f * u**beta
    rhs = theta * f * u**beta
    scale = math.sqrt(ip(rhs, rhs))
    el = math.sqrt(ip(g, g)) / scale if scale > 1e-14 else math.sqrt(ip(g, g))
    U = solve_extension(ext, u) if not ext.is_flat or record else None
    return MinimizeResult(u=u, U=U, theta=theta, iterations=it, converged=el <= tol,
                          constraint_residual=abs(constraint_value(u, f, beta, cell) - 1.0),
                          el_residual=el, beta=beta, flags=flags, history=history)


def write_telemetry(path, history: list, echo: dict | None = None) -> None:
    """Telemetry rows as CSV; ``echo`` columns (parameters) are prepended to each row."""
    echo = echo or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(echo) + list(TELEMETRY_COLUMNS))
        for row in history:
            loc = " ".join(f"{x:.12g}" for x in row["peak_location"])
            w.writerow([echo[k] for k in echo] + [
                row["iteration"], f"{row['energy']:.15g}", f"{row['constraint_residual']:.6e}",
                f"{row['peak_value']:.15g}", loc])


# --------------------------------------------------------------------------
# continuation in beta


@dataclass(frozen=True)
class ContinuationStep:
    beta: float
    theta: float
    peak: float
    peak_location: tuple
    result: MinimizeResult = field(repr=False)


def beta_continuation(problem: ConstraintProblem, schedule, init=None, **kw) -> list:
    """Warm-started minimisations along an increasing beta schedule."""
    schedule = [float(b) for b in schedule]
    if any(b2 <= b1 for b1, b2 in zip(schedule, schedule[1:])):
        raise DomainError("beta schedule must be strictly increasing")
    if schedule[-1] > problem.params.two_star + 1e-14:
        raise DomainError("beta schedule must end at or below 2*")
    out = []
    u = init
    coords = problem.ext.coordinates()
    for b in schedule:
        res = minimize_subcritical(problem.with_beta(b), init=u, **kw)
        pk, loc = _peak(res.u, coords)
        out.append(ContinuationStep(b, res.theta, pk, loc, res))
        u = res.u
    return out


# --------------------------------------------------------------------------
# blow-up diagnostics


@dataclass(frozen=True)
class BlowupReport:
    peaks: np.ndarray
    locations: list
    deltas: np.ndarray
    lambdas: np.ndarray
    correlations: np.ndarray
    concentrating: bool
    slope: float | None = None


def _bubble_shape(z2: np.ndarray, lam: float, decay: float) -> np.ndarray:
    return (lam * lam / (lam * lam + z2)) ** decay


def _subgrid_peak(u: np.ndarray, idx: tuple) -> tuple[list, float]:
    """Peak offset (in cells) and value from a per-axis parabola through log u."""
    u0 = float(u[idx])
    if not u0 > 0:
        return [0.0] * u.ndim, u0
    l0 = math.log(u0)
    offs, logpeak = [], l0
    for ax in range(u.ndim):
        lo, hi = list(idx), list(idx)
        lo[ax] = (idx[ax] - 1) % u.shape[ax]
        hi[ax] = (idx[ax] + 1) % u.shape[ax]
        a, b = float(u[tuple(lo)]), float(u[tuple(hi)])
        if not (a > 0 and b > 0):
            offs.append(0.0)
            continue
        lm, lp = math.log(a), math.log(b)
        curv = lm - 2.0 * l0 + lp
        if not curv < 0:
            offs.append(0.0)
            continue
        o = min(max(0.5 * (lm - lp) / curv, -0.5), 0.5)
        offs.append(o)
        logpeak -= 0.125 * (lm - lp) ** 2 / curv
    return offs, math.exp(logpeak)


def blowup_diagnostics(results, params: GammaParams, L: float, window: float = 3.0,
                       points: int = 15, index=None) -> BlowupReport:
    """Peak, scale and bubble correlation of each member of a sequence.

    ``results`` holds MinimizeResults, ContinuationSteps or (beta, u) pairs
    on the periodic grid of side ``L``.  The profile M^{-1} u(y + δ z) is
    sampled on [-window, window]^n, the best bubble (λ^2/(λ^2+|z|^2))^{(n-2γ)/2}
    is fitted in L2 and the Pearson correlation of the two is reported; it is
    NaN when the rescaled profile is flat.  ``index`` (e.g. m) enables a
    log-log slope of δ against it.
    """
    seq = []
    for r in results:
        if isinstance(r, ContinuationStep):
            r = r.result
        if isinstance(r, MinimizeResult):
            seq.append((r.beta, r.u))
        else:
            b, u = r
            seq.append((float(b), np.asarray(u, dtype=float)))
    if len(seq) < 2:
        raise DomainError("blow-up diagnostics need at least 2 members")
    n, g = params.n, params.gamma
    decay = params.decay
    peaks, locs, deltas, lams, cors = [], [], [], [], []
    for beta, u in seq:
        M = u.shape[0]
        h = L / M
        idx = np.unravel_index(int(np.argmax(u)), u.shape)
        off, Mv = _subgrid_peak(u, idx)
        peaks.append(Mv)
        locs.append(tuple(h * (i + o) for i, o in zip(idx, off)))
        delta = Mv ** (-(beta - 1.0) / (2.0 * g))
        deltas.append(delta)
        # centre the peak, then interpolate on the unrolled grid
        shift = [M // 2 - i for i in idx]
        uc = np.roll(u, shift, axis=tuple(range(n))) / Mv
        ax = (np.arange(M) - M // 2) * h
        interp = RegularGridInterpolator([ax] * n, uc, bounds_error=False, fill_value=None)
        zs = np.linspace(-window, window, points)
        Z = np.stack(np.meshgrid(*([zs] * n), indexing="ij"), axis=-1).reshape(-1, n)
        X = np.clip(h * np.asarray(off) + delta * Z, ax[0], ax[-1])
        v = interp(X)
        z2 = (Z**2).sum(axis=1)
        if np.ptp(v) < 1e-8:
            lams.append(math.nan)
            cors.append(math.nan)
            continue
        res = minimize_scalar(lambda ll: float(((v - _bubble_shape(z2, math.exp(ll), decay)) ** 2).sum()),
                              bounds=(-5.0, 5.0), method="bounded", options={"xatol": 1e-10})
        lam = math.exp(res.x)
        prof = _bubble_shape(z2, lam, decay)
        lams.append(lam)
        cors.append(float(np.corrcoef(v, prof)[0, 1]))
    deltas = np.array(deltas)
    cors = np.array(cors)
    slope = None
    if index is not None:
        slope = float(np.polyfit(np.log(np.asarray(index, float)), np.log(deltas), 1)[0])
    conc = bool(np.all(np.isfinite(cors)) and cors[-1] > 0.99 and deltas[-1] < deltas[0])
    return BlowupReport(np.array(peaks), locs, deltas, np.array(lams), cors, conc, slope)


# --------------------------------------------------------------------------
# existence criterion


def criterion_bound(params: GammaParams) -> float:
    """Energy level of the half-space: (int w_{1,0}^{2*+1})^{2γ/n}."""
    return bubble_moment(params, 0) ** (2.0 * params.gamma / params.n)


def criterion_check(theta_2star: float, f_max: float, params: GammaParams,
                    tol: float = 1e-6) -> str:
    """'strict', 'equal' or 'violated' for f_max^{(n-2γ)/n} θ(2*) against the bound."""
    if not f_max > 0:
        raise DomainError("max f must be positive")
    lhs = f_max ** ((params.n - 2.0 * params.gamma) / params.n) * theta_2star
    bound = criterion_bound(params)
    if abs(lhs - bound) <= tol * bound:
        return "equal"
    return "strict" if lhs < bound else "violated"
