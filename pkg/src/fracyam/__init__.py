"""Numerical toolkit for the fractional Yamabe and prescribed fractional curvature problems."""

from .params import GammaParams, make_params

__version__ = "0.1.0"

__all__ = ["GammaParams", "make_params", "__version__"]
