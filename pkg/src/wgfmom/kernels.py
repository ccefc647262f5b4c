"""Free-space Helmholtz kernel, its gradient, and the bounded two-wavenumber
difference kernel used by the regularized scalar-potential term."""

from __future__ import annotations

import math

import numpy as np

from .errors import SingularityError

_FOUR_PI = 4.0 * math.pi

# Taylor expansion of grad[G(k2) - G(k1)] in powers of R, used below the
# switch radius where naive subtraction of the two gradients loses digits.
# grad G = (r-r')/(4 pi R^3) * sum_{m>=0} (m-1) (ikR)^m / m!, so the
# difference starts at m = 2 and every coefficient is (m-1)/m!.
_TAYLOR_MMAX = 6
_TAYLOR_COEF = np.array([(m - 1) / math.factorial(m) for m in range(2, _TAYLOR_MMAX + 1)])


def switch_radius(k1: complex, k2: complex) -> float:
    """Radius below which grad_diff uses the series branch."""
    kmax = max(abs(k1), abs(k2))
    if kmax == 0.0:
        return np.inf
    return 1e-2 / kmax


def _separations(r, rp):
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    d = np.atleast_2d(r) - np.atleast_2d(rp)
    R = np.sqrt(np.sum(d * d, axis=-1))
    return d, R


def greens(k: complex, r, rp):
    """e^{ikR} / (4 pi R) with R = |r - r'|.  Scalar or batched over rows."""
    d, R = _separations(r, rp)
    scale = 1.0 + np.max(np.abs(r)) + np.max(np.abs(rp))
    if np.any(R < 1e-13 * scale):
        raise SingularityError("greens evaluated at coincident points")
    g = np.exp(1j * k * R) / (_FOUR_PI * R)
    return complex(g[0]) if g.shape == (1,) else g


def grad_greens(k: complex, r, rp):
    """Gradient of greens with respect to the observation point r.

    Equals (ikR - 1) e^{ikR} / (4 pi R^2) * (r - r')/R; the gradient with
    respect to the source point is the negative of this.
    """
    d, R = _separations(r, rp)
    scale = 1.0 + np.max(np.abs(r)) + np.max(np.abs(rp))
    if np.any(R < 1e-13 * scale):
        raise SingularityError("grad_greens evaluated at coincident points")
    coef = (1j * k * R - 1.0) * np.exp(1j * k * R) / (_FOUR_PI * R**3)
    out = coef[:, None] * d
    return out[0] if out.shape[0] == 1 and np.asarray(r).ndim == 1 else out


def grad_diff(k1: complex, k2: complex, r, rp):
    """grad_greens(k2) - grad_greens(k1), stable down to (and at) R = 0.

    The 1/R^3 and 1/R^2 parts cancel analytically; below the switch radius a
    short series in R is used.  Along any approach direction the limit is
    -(k2^2 - k1^2)/(8 pi) times the unit separation vector.
    """
    single = np.asarray(r).ndim == 1 and np.asarray(rp).ndim == 1
    d, R = _separations(r, rp)
    out = np.zeros_like(d, dtype=complex)
    if k1 == k2:
        return out[0] if single else out

    rs = switch_radius(k1, k2)
    far = R > rs
    if np.any(far):
        Rf = R[far]
        c1 = (1j * k1 * Rf - 1.0) * np.exp(1j * k1 * Rf)
        c2 = (1j * k2 * Rf - 1.0) * np.exp(1j * k2 * Rf)
        out[far] = ((c2 - c1) / (_FOUR_PI * Rf**3))[:, None] * d[far]
    near = ~far
    if np.any(near):
        Rn = R[near]
        # sum_m coef_m ((ik2)^m - (ik1)^m) R^{m-3} * (r - r') ; the m = 2 term
        # carries R^{-1} which combines with (r - r') into a unit vector.
        acc = np.zeros_like(Rn, dtype=complex)
        for i, m in enumerate(range(2, _TAYLOR_MMAX + 1)):
            acc += _TAYLOR_COEF[i] * ((1j * k2) ** m - (1j * k1) ** m) * Rn ** (m - 2)
        dn = d[near]
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(Rn[:, None] > 0, dn / np.where(Rn[:, None] > 0, Rn[:, None], 1.0), 0.0)
        out[near] = (acc / _FOUR_PI)[:, None] * unit
    return out[0] if single else out


def windowed(kernel_value, w):
    """Scale a kernel evaluation (scalar, vector, or batch) by the window weight
    at the source point.  Exact zero weight yields an exact zero kernel."""
    return np.asarray(kernel_value) * np.asarray(w)[..., None] if (
        np.ndim(kernel_value) > np.ndim(w)
    ) else np.asarray(kernel_value) * w
