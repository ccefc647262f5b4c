"""Slow-rise smooth window and its radial derivative.

The window multiplies the Green function at the source point, which turns
the integral equation on the unbounded interface into one on a bounded
patch while keeping the truncation error decaying faster than any power
of the window radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# Clamp for the transition variable b: below/above these values the exact
# branch limits (1 and 0) are returned to avoid overflow in 1/b and 1/(b-1).
_B_LO = 1e-12
_B_HI = 1.0 - 1e-12


@dataclass(frozen=True)
class WindowParams:
    """Radial (default) or rectangular window of outer radius A.

    c is the relative radius of the inner plateau: the window equals 1 for
    rho <= c*A and 0 for rho >= A.  For shape="rectangular" the window is a
    product of two 1D windows with half-widths (ax, ay); ax/ay default to A.
    """

    A: float
    c: float = 0.7
    shape: str = "radial"
    ax: float | None = None
    ay: float | None = None

    def __post_init__(self):
        if not (self.A > 0):
            raise ParameterError(f"window.A must be positive, got {self.A}")
        if not (0.0 < self.c < 1.0):
            raise ParameterError(f"window.c must lie in (0, 1), got {self.c}")
        if self.shape not in ("radial", "rectangular"):
            raise ParameterError(f"window.shape must be 'radial' or 'rectangular', got {self.shape!r}")

    @property
    def half_width_x(self) -> float:
        return self.A if self.ax is None else self.ax

    @property
    def half_width_y(self) -> float:
        return self.A if self.ay is None else self.ay


def eta(s, s0: float, s1: float):
    """Infinitely smooth cutoff: 1 for |s| < s0, 0 for |s| >= s1.

    In the transition band the value is exp(2*exp(-1/b)/(b-1)) with
    b = (|s|-s0)/(s1-s0).  Accepts scalars or arrays.
    """
    if not (0.0 <= s0 < s1):
        raise ParameterError(f"eta requires 0 <= s0 < s1, got s0={s0}, s1={s1}")
    s = np.abs(np.asarray(s, dtype=float))
    b = (s - s0) / (s1 - s0)
    out = np.zeros_like(b)
    out[b <= _B_LO] = 1.0
    mid = (b > _B_LO) & (b < _B_HI)
    bm = b[mid]
    out[mid] = np.exp(2.0 * np.exp(-1.0 / bm) / (bm - 1.0))
    if out.ndim == 0:
        return float(out)
    return out


def eta_prime(s, s0: float, s1: float):
    """Derivative of eta with respect to s (for s >= 0); exactly 0 outside the band."""
    if not (0.0 <= s0 < s1):
        raise ParameterError(f"eta requires 0 <= s0 < s1, got s0={s0}, s1={s1}")
    s = np.abs(np.asarray(s, dtype=float))
    b = (s - s0) / (s1 - s0)
    out = np.zeros_like(b)
    mid = (b > _B_LO) & (b < _B_HI)
    bm = b[mid]
    val = np.exp(2.0 * np.exp(-1.0 / bm) / (bm - 1.0))
    # d/db [2 e^{-1/b}/(b-1)] = -2 e^{-1/b} (b^2 - b + 1) / (b^2 (b-1)^2)
    dfac = -2.0 * np.exp(-1.0 / bm) * (bm * bm - bm + 1.0) / (bm * bm * (bm - 1.0) ** 2)
    out[mid] = val * dfac / (s1 - s0)
    if out.ndim == 0:
        return float(out)
    return out


def window_value(points, params: WindowParams):
    """Window value at one 3D point or an (n, 3) array of points.

    Radial windows depend on rho = sqrt(x^2 + y^2) only; the value is exactly
    zero for rho >= A so quadrature nodes outside the support contribute
    nothing.
    """
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if params.shape == "radial":
        rho = np.hypot(p[:, 0], p[:, 1])
        w = eta(rho, params.c * params.A, params.A)
    else:
        wx = eta(p[:, 0], params.c * params.half_width_x, params.half_width_x)
        wy = eta(p[:, 1], params.c * params.half_width_y, params.half_width_y)
        w = wx * wy
    w = np.atleast_1d(w)
    return float(w[0]) if single else w


def window_gradient(points, params: WindowParams):
    """3D gradient of the window (z-component is always zero)."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    g = np.zeros_like(p)
    if params.shape == "radial":
        rho = np.hypot(p[:, 0], p[:, 1])
        dp = eta_prime(rho, params.c * params.A, params.A)
        safe = rho > 0
        g[safe, 0] = dp[safe] * p[safe, 0] / rho[safe]
        g[safe, 1] = dp[safe] * p[safe, 1] / rho[safe]
    else:
        ax, ay = params.half_width_x, params.half_width_y
        wx = eta(p[:, 0], params.c * ax, ax)
        wy = eta(p[:, 1], params.c * ay, ay)
        dx = eta_prime(p[:, 0], params.c * ax, ax) * np.sign(p[:, 0])
        dy = eta_prime(p[:, 1], params.c * ay, ay) * np.sign(p[:, 1])
        g[:, 0] = dx * wy
        g[:, 1] = wx * dy
    return g[0] if single else g


def suggested_radius(k1: complex, k2: complex, perturbation_radius: float) -> float:
    """Window radius large enough to push the truncation error below the mesh error.

    Any smaller radius is still accepted; convergence studies sweep A freely.
    """
    kmin = min(abs(k1), abs(k2))
    if kmin <= 0:
        raise ParameterError("wavenumbers must be nonzero for the radius heuristic")
    return 16.0 * np.pi / kmin + perturbation_radius
