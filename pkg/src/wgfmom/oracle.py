"""Exact reference solutions: vector spherical-harmonic series for a PEC
sphere, and the image-composed exact total field for a PEC hemispherical
bump on a PEC plane.

The sphere coefficients are the standard PEC limits a_n = psi_n'/xi_n' and
b_n = psi_n/xi_n (Riccati-Bessel psi_n(x) = x j_n(x), xi_n(x) = x h1_n(x));
their correctness is gated by the tangential-field boundary-condition checks
in the test suite rather than by any particular text.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from .errors import ParameterError, TruncationError
from .media import EMField


def recommended_order(x: float) -> int:
    """Series length with a safety margin beyond the size parameter."""
    return int(np.ceil(x + 4.0 * x ** (1.0 / 3.0) + 10.0))


def _riccati(n_max: int, x: float):
    n = np.arange(1, n_max + 1)
    jn = spherical_jn(n, x)
    jnp = spherical_jn(n, x, derivative=True)
    yn = spherical_yn(n, x)
    ynp = spherical_yn(n, x, derivative=True)
    hn = jn + 1j * yn
    hnp = jnp + 1j * ynp
    psi = x * jn
    psip = jn + x * jnp
    xi = x * hn
    xip = hn + x * hnp
    return psi, psip, xi, xip


@dataclass
class MieSeries:
    """PEC sphere series: coefficients precomputed at construction.

    radius, wavenumber k; omega and mu of the host fix the E/H impedance
    (scaled units use omega = k, mu = 1).  order defaults to the size
    parameter plus a standard margin.
    """

    radius: float
    k: float
    omega: float | None = None
    mu: float = 1.0
    order: int | None = None
    a: np.ndarray = field(init=False, repr=False)
    b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.radius <= 0 or self.k <= 0:
            raise ParameterError("Mie series needs positive radius and wavenumber")
        if self.omega is None:
            self.omega = self.k / np.sqrt(self.mu)
        x = self.k * self.radius
        if self.order is None:
            self.order = recommended_order(x)
        if self.order < max(3, int(x)):
            raise ParameterError("series order below the size parameter")
        psi, psip, xi, xip = _riccati(self.order, x)
        self.a = psip / xip
        self.b = psi / xi
        tail = max(abs(self.a[-1]), abs(self.b[-1]))
        if tail > 1e-10:
            raise TruncationError(
                f"series not converged at order {self.order}: tail coefficient {tail:.2e}")


def _pi_tau(costh: np.ndarray, n_max: int):
    """Angular functions pi_n = P_n^1/sin(theta), tau_n = dP_n^1/dtheta by
    upward recurrence; both are polynomials in cos(theta)."""
    npts = len(costh)
    pi = np.zeros((n_max + 1, npts))
    tau = np.zeros((n_max + 1, npts))
    pi[1] = 1.0
    tau[1] = costh
    for n in range(2, n_max + 1):
        pi[n] = ((2 * n - 1) / (n - 1)) * costh * pi[n - 1] - (n / (n - 1)) * pi[n - 2]
        tau[n] = n * costh * pi[n] - (n + 1) * pi[n - 1]
    return pi[1:], tau[1:]


def _canonical_scattered(series: MieSeries, points):
    """Scattered E, H of a unit-amplitude x-polarized +z planewave hitting
    the PEC sphere centered at the origin; spherical frame per point."""
    pts = np.atleast_2d(points)
    r = np.linalg.norm(pts, axis=1)
    if np.any(r < series.radius * (1.0 - 1e-12)):
        raise ParameterError("evaluation point inside the sphere")
    # Clamp polar axis hits; the series value is continuous there.
    costh = np.clip(pts[:, 2] / r, -1.0, 1.0)
    sinth = np.sqrt(np.maximum(0.0, 1.0 - costh**2))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    rho = series.k * r

    L = series.order
    n = np.arange(1, L + 1)
    En = (1j**n) * (2 * n + 1) / (n * (n + 1))
    pi_n, tau_n = _pi_tau(costh, L)

    hn = np.empty((L, len(r)), dtype=complex)
    zetp = np.empty((L, len(r)), dtype=complex)
    for i, nn in enumerate(n):
        jn = spherical_jn(nn, rho)
        yn = spherical_yn(nn, rho)
        jnp = spherical_jn(nn, rho, derivative=True)
        ynp = spherical_yn(nn, rho, derivative=True)
        hn[i] = jn + 1j * yn
        zetp[i] = hn[i] + rho * (jnp + 1j * ynp)

    ia = (1j * series.a * En)[:, None]
    b = (series.b * En)[:, None]
    nn1 = (n * (n + 1))[:, None]
    cosphi = np.cos(phi)
    sinphi = np.sin(phi)

    Er = cosphi * np.sum(ia * nn1 * (sinth * pi_n) * hn / rho, axis=0)
    Et = cosphi * np.sum(ia * tau_n * zetp / rho - b * pi_n * hn, axis=0)
    Ep = -sinphi * np.sum(ia * pi_n * zetp / rho - b * tau_n * hn, axis=0)

    ib = (1j * series.b * En)[:, None]
    a = (series.a * En)[:, None]
    z = series.k / (series.omega * series.mu)
    Hr = z * sinphi * np.sum(ib * nn1 * (sinth * pi_n) * hn / rho, axis=0)
    Ht = z * sinphi * np.sum(ib * tau_n * zetp / rho - a * pi_n * hn, axis=0)
    Hp = z * cosphi * np.sum(ib * pi_n * zetp / rho - a * tau_n * hn, axis=0)

    rhat = pts / r[:, None]
    that = np.column_stack([costh * cosphi, costh * sinphi, -sinth])
    phat = np.column_stack([-sinphi, cosphi, np.zeros_like(phi)])
    E = Er[:, None] * rhat + Et[:, None] * that + Ep[:, None] * phat
    H = Hr[:, None] * rhat + Ht[:, None] * that + Hp[:, None] * phat
    return E, H


def _incidence_frame(direction, polarization):
    khat = np.asarray(direction, dtype=float)
    ehat = np.asarray(polarization, dtype=float)
    khat = khat / np.linalg.norm(khat)
    ehat = ehat - (ehat @ khat) * khat
    nrm = np.linalg.norm(ehat)
    if nrm < 1e-14:
        raise ParameterError("polarization parallel to propagation direction")
    ehat = ehat / nrm
    return np.column_stack([ehat, np.cross(khat, ehat), khat])


def mie_pec_scattered(series: MieSeries, direction, polarization, points,
                      amplitude: complex = 1.0) -> EMField:
    """Scattered field of a PEC sphere for a planewave from an arbitrary
    direction: the canonical solution rotated into the requested frame.

    direction is the propagation unit vector, polarization the (real) E
    direction orthogonal to it, amplitude the complex E amplitude.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.asarray(points).ndim == 1
    Q = _incidence_frame(direction, polarization)
    Ec, Hc = _canonical_scattered(series, pts @ Q)
    E = amplitude * (Ec @ Q.T)
    H = amplitude * (Hc @ Q.T)
    return EMField(E[0], H[0]) if single else EMField(E, H)


def _planewave(points, k, omega, mu, direction, polarization, amplitude):
    pts = np.atleast_2d(points)
    khat = np.asarray(direction, float)
    ehat = np.asarray(polarization, float)
    phase = amplitude * np.exp(1j * k * (pts @ khat))
    E = phase[:, None] * ehat
    H = (k / (omega * mu)) * phase[:, None] * np.cross(khat, ehat)
    return E, H


@dataclass(frozen=True)
class BumpReference:
    """Exact total field for a PEC hemispherical bump of the given radius on
    the PEC plane z = 0, under a planewave at grazing angle alpha.

    Image theory: the total field is the sum of the incident wave, its
    image (sign flipped for TE), and the two full-sphere scattered fields
    driven by each wave.
    """

    radius: float
    k: float
    grazing_angle: float
    polarization: str = "TE"
    amplitude: float = 1.0
    omega: float | None = None
    mu: float = 1.0
    order: int | None = None

    def __post_init__(self):
        if self.polarization not in ("TE", "TM"):
            raise ParameterError("polarization must be 'TE' or 'TM'")

    def _series(self):
        om = self.omega if self.omega is not None else self.k / np.sqrt(self.mu)
        return MieSeries(self.radius, self.k, omega=om, mu=self.mu, order=self.order)

    def drives(self):
        a = self.grazing_angle
        down = np.array([0.0, np.cos(a), -np.sin(a)])
        up = np.array([0.0, np.cos(a), np.sin(a)])
        if self.polarization == "TE":
            return [
                (down, np.array([1.0, 0.0, 0.0]), self.amplitude),
                (up, np.array([1.0, 0.0, 0.0]), -self.amplitude),
            ]
        return [
            (down, np.array([0.0, np.sin(a), np.cos(a)]), self.amplitude),
            (up, np.array([0.0, -np.sin(a), np.cos(a)]), self.amplitude),
        ]

    def total_field(self, points) -> EMField:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        single = np.asarray(points).ndim == 1
        series = self._series()
        om = series.omega
        E = np.zeros((len(pts), 3), dtype=complex)
        H = np.zeros((len(pts), 3), dtype=complex)
        for direction, pol, amp in self.drives():
            Epw, Hpw = _planewave(pts, self.k, om, self.mu, direction, pol, amp)
            E += Epw
            H += Hpw
            sc = mie_pec_scattered(series, direction, pol, pts, amplitude=amp)
            E += np.atleast_2d(sc.E)
            H += np.atleast_2d(sc.H)
        return EMField(E[0], H[0]) if single else EMField(E, H)


def bump_reference(points, grazing_angle: float, polarization: str,
                   radius: float, k: float, amplitude: float = 1.0,
                   omega: float | None = None, mu: float = 1.0,
                   order: int | None = None) -> EMField:
    """Convenience wrapper around BumpReference.total_field."""
    ref = BumpReference(radius=radius, k=k, grazing_angle=grazing_angle,
                        polarization=polarization, amplitude=amplitude,
                        omega=omega, mu=mu, order=order)
    return ref.total_field(points)
