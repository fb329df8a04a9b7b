"""Scalar constants attached to a pair (n, gamma).

All values are plain 64-bit floats.  ``math.gamma`` is accurate to a few
ulps on the arguments used here, so every derived constant carries a
relative error well below 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

__all__ = [
    "GammaParams",
    "make_params",
    "m1",
    "m21",
    "m22",
    "c1",
    "c2",
    "c1_prefactor",
    "c2_prefactor",
    "correction_quadratic",
    "sphere_area",
]


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (0.0 < gamma < 1.0) or not math.isfinite(gamma):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    return gamma


def _check_n(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return int(n)


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere S^{dim-1} in R^dim."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass(frozen=True)
class GammaParams:
    """Boundary dimension ``n`` and fractional order ``gamma`` with derived constants."""

    n: int
    gamma: float
    kappa: float = field(init=False)
    """Normalisation of the weighted Neumann derivative."""
    alpha: float = field(init=False)
    """Amplitude of the unit bubble."""
    two_star: float = field(init=False)
    """Critical exponent (n + 2 gamma) / (n - 2 gamma)."""
    s: float = field(init=False)

    def __post_init__(self) -> None:
        n = _check_n(self.n)
        g = _check_gamma(self.gamma)
        if n <= 2.0 * g:
            raise DomainError(f"dimension too low: need n > 2*gamma, got n={n}, gamma={g}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "gamma", g)

        kappa = 2.0 ** (2.0 * g) * math.gamma(g) / (2.0 * math.gamma(1.0 - g))
        ratio = math.gamma((n + 2.0 * g) / 2.0) / math.gamma((n - 2.0 * g) / 2.0)
        alpha = 2.0 ** ((n - 2.0 * g) / 2.0) * ratio ** ((n - 2.0 * g) / (4.0 * g))
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "two_star", (n + 2.0 * g) / (n - 2.0 * g))
        object.__setattr__(self, "s", n / 2.0 + g)

    @property
    def N(self) -> int:
        """Dimension of the half-space."""
        return self.n + 1

    @property
    def decay(self) -> float:
        """Exponent (n - 2 gamma)/2 of the bubble profile."""
        return (self.n - 2.0 * self.gamma) / 2.0

    @property
    def is_half(self) -> bool:
        return self.gamma == 0.5

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "alpha": self.alpha,
            "two_star": self.two_star,
            "s": self.s,
        }


def make_params(n: int, gamma: float) -> GammaParams:
    return GammaParams(n, gamma)


def m1(n: int, gamma: float) -> float:
    n = _check_n(n)
    g = _check_gamma(gamma)
    if n < 4:
        raise DomainError(f"m1 requires n >= 4, got n={n}")
    g2 = g * g
    first = (3 * n * n + n * (16 * g2 - 22) + 20 * (1 - g2)) / (8 * n * (n - 1) * (1 - g2))
    second = 16 * (n - 1) * (1 - g2) / (n * (3 * n * n + n * (2 - 8 * g2) + 4 * g2 - 4))
    return (1 + g) / 3 * (first + second)


def _check_second_order(n: int, gamma: float) -> tuple[int, float]:
    n = _check_n(n)
    g = _check_gamma(gamma)
    if not n > 4 + 2 * g:
        raise DomainError(f"requires n > 4 + 2*gamma, got n={n}, gamma={g}")
    return n, g


def m21(n: int, gamma: float) -> float:
    n, g = _check_second_order(n, gamma)
    g2 = g * g
    num = (
        15 * n**4
        - 120 * n**3
        + 20 * n**2 * (17 - 2 * g2)
        - 80 * n * (5 - 2 * g2)
        + 48 * (4 - 5 * g2 + g2 * g2)
    )
    den = 7680 * n * (n - 1) * (n - 3) * (1 + g) * (1 - g) * (2 - g)
    return num / den


def m22(n: int, gamma: float) -> float:
    n, g = _check_second_order(n, gamma)
    g2 = g * g
    num = 25 * n**3 - 20 * n**2 * (9 - g2) + 100 * n * (4 - g2) - 16 * (4 - g2) ** 2
    den = 5 * n * (n - 4 - 2 * g) * (n - 4 + 2 * g) * (5 * n * n - 4 * n * (1 + g2) - 8 * (4 - g2))
    return num / den


def c1_prefactor(n: int, gamma: float) -> float:
    """Factor multiplying m1 in c1."""
    n = _check_n(n)
    g = _check_gamma(gamma)
    if not n > 2 + 2 * g:
        raise DomainError(f"requires n > 2 + 2*gamma, got n={n}, gamma={g}")
    return 16 * n * (n - 1) * (1 - g) * g / ((n - 2 * g) * (n - 2 + 2 * g) * (n - 2 - 2 * g))


def c2_prefactor(n: int, gamma: float) -> float:
    """Factor multiplying m21 in c2."""
    n, g = _check_second_order(n, gamma)
    num = 1024 * (n - 3) * (n - 1) * n * (2 - g) * (1 - g) * g
    den = 3 * (n - 2 * g) * (n - 2 - 2 * g) * (n - 2 + 2 * g) * (n - 4 - 2 * g) * (n - 4 + 2 * g)
    return num / den


def c1(n: int, gamma: float) -> float:
    return c1_prefactor(n, gamma) * m1(n, gamma)


def c2(n: int, gamma: float) -> float:
    return c2_prefactor(n, gamma) * m21(n, gamma)


def correction_quadratic(kind: str, C: float) -> float:
    """Polynomial in the correction constant multiplying the log coefficient."""
    kind = kind.lower()
    if kind == "psi1":
        return 1.0 + 4.0 * C + 4.0 * C * C
    if kind == "psi2":
        return 2.0 + 24.0 * C + 56.0 * C * C
    raise DomainError(f"unknown correction kind {kind!r}; expected 'Psi1' or 'Psi2'")
