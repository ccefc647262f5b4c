"""Materials, incident fields, exact flat-interface source fields, and the
excitation trace currents that drive the integral equation.

All field derivatives are applied analytically to the closed-form
exponential/rational expressions; finite differences appear only in tests.
Time convention: e^{-i omega t}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SingularityError

_FOUR_PI = 4.0 * np.pi


def _branch_im_nonneg(z: complex) -> complex:
    w = np.sqrt(complex(z))
    if w.imag < 0 or (w.imag == 0 and w.real < 0):
        w = -w
    return w


@dataclass(frozen=True)
class Material:
    """Homogeneous isotropic material; eps/mu may be complex (lossy)."""

    eps: complex = 1.0 + 0.0j
    mu: complex = 1.0 + 0.0j

    def wavenumber(self, omega: float) -> complex:
        if omega <= 0:
            raise ParameterError("omega must be positive")
        return omega * _branch_im_nonneg(self.eps * self.mu)


@dataclass(frozen=True)
class LayeredConfig:
    """Two half-spaces separated by the (locally perturbed) plane z = 0.

    Region 1 is z > 0, region 2 is z < 0; pec_lower replaces the lower
    material by a perfect electric conductor.  Units are scaled so that the
    background eps0 = mu0 = 1 by default; any consistent SI-scaled values
    can be supplied instead.
    """

    omega: float
    upper: Material = field(default_factory=Material)
    lower: Material = field(default_factory=lambda: Material(eps=2.0))
    pec_lower: bool = False

    def __post_init__(self):
        if self.omega <= 0:
            raise ParameterError("omega must be positive")
        k1 = self.upper.wavenumber(self.omega)
        if abs(k1.imag) > 0:
            raise ParameterError("upper half-space must be lossless")

    @property
    def k1(self) -> complex:
        return self.upper.wavenumber(self.omega)

    @property
    def k2(self) -> complex:
        if self.pec_lower:
            raise ParameterError("lower half-space is PEC; k2 undefined")
        return self.lower.wavenumber(self.omega)

    def material(self, region: int) -> Material:
        if region == 1:
            return self.upper
        if region == 2:
            if self.pec_lower:
                raise ParameterError("no material in a PEC lower half-space")
            return self.lower
        raise ParameterError(f"region must be 1 or 2, got {region}")


@dataclass(frozen=True)
class PlanewaveSpec:
    """Incident planewave E = (p x k) e^{i k.r} with k = (0, k1y, -k1z).

    The grazing angle alpha fixes k1y = k1 cos(alpha), k1z = k1 sin(alpha)
    (downgoing); the polarization vector p may be complex.
    """

    polarization: tuple
    grazing_angle: float

    def __post_init__(self):
        if not (0.0 < self.grazing_angle <= np.pi / 2):
            raise ParameterError("grazing_angle must lie in (0, pi/2]")

    def p(self):
        return np.asarray(self.polarization, dtype=complex)


def te_planewave(grazing_angle: float, k1: float, amplitude: float = 1.0) -> PlanewaveSpec:
    """TE (x-polarized electric field) planewave of the given E amplitude."""
    a = grazing_angle
    p = (amplitude / k1) * np.array([0.0, -np.sin(a), -np.cos(a)])
    return PlanewaveSpec(tuple(p), a)


def tm_planewave(grazing_angle: float, k1: float, amplitude: float = 1.0) -> PlanewaveSpec:
    """TM planewave: E in the plane of incidence, amplitude as given."""
    return PlanewaveSpec((amplitude / k1, 0.0, 0.0), grazing_angle)


@dataclass(frozen=True)
class FreespacePlanewave:
    """Bare planewave with no interface reflection: the exciting field for
    closed-body scattering checks.  direction is the propagation unit
    vector; polarization the E direction orthogonal to it."""

    direction: tuple
    polarization: tuple
    amplitude: complex = 1.0


@dataclass(frozen=True)
class DipoleSpec:
    """Electric dipole at `location` with moment direction `polarization`,
    radiating in half-space `region` (1 upper, 2 lower)."""

    location: tuple
    polarization: tuple
    region: int = 1

    def __post_init__(self):
        if self.region not in (1, 2):
            raise ParameterError("dipole region must be 1 or 2")


@dataclass
class EMField:
    """Electric and magnetic field values; arrays broadcast over points."""

    E: np.ndarray
    H: np.ndarray

    def __add__(self, other):
        return EMField(self.E + other.E, self.H + other.H)


@dataclass(frozen=True)
class FresnelSet:
    R_TE: complex
    R_TM: complex
    T_TE: complex
    T_TM: complex


def _planewave_kz(config: LayeredConfig, spec: PlanewaveSpec):
    k1 = config.k1.real
    a = spec.grazing_angle
    k1y = k1 * np.cos(a)
    k1z = k1 * np.sin(a)
    if config.pec_lower:
        k2z = 0.0 + 0.0j
    else:
        k2z = _branch_im_nonneg(config.k2**2 - k1y**2)
    return k1y, k1z, k1y, k2z


def fresnel(config: LayeredConfig, spec: PlanewaveSpec) -> FresnelSet:
    """Reflection/transmission coefficients of the flat two-media interface
    for the transverse (x) field components; PEC limit R_TE = -R_TM = -1."""
    if config.pec_lower:
        return FresnelSet(R_TE=-1.0, R_TM=1.0, T_TE=0.0, T_TM=0.0)
    k1y, k1z, k2y, k2z = _planewave_kz(config, spec)
    e1, m1 = config.upper.eps, config.upper.mu
    e2, m2 = config.lower.eps, config.lower.mu
    dte = m2 * k1z + m1 * k2z
    dtm = e2 * k1z + e1 * k2z
    if abs(dte) == 0 or abs(dtm) == 0:
        raise ParameterError("degenerate media: Fresnel denominator vanishes")
    return FresnelSet(
        R_TE=(m2 * k1z - m1 * k2z) / dte,
        R_TM=(e2 * k1z - e1 * k2z) / dtm,
        T_TE=2.0 * m2 * k1z / dte,
        T_TM=2.0 * e2 * k1z / dtm,
    )


def _transverse_amplitudes(config: LayeredConfig, spec: PlanewaveSpec):
    k1 = config.k1.real
    _, k1z, _, _ = _planewave_kz(config, spec)
    k1y = k1 * np.cos(spec.grazing_angle)
    p = spec.p()
    E0 = -p[2] * k1y - p[1] * k1z
    H0 = k1**2 * p[0] / (config.omega * config.upper.mu)
    return E0, H0


def planewave_source_field(points, config: LayeredConfig, spec: PlanewaveSpec,
                           region: int | None = None) -> EMField:
    """Exact solution of planewave scattering by the flat half-space.

    With region=None the branch is chosen per point from the sign of z;
    passing region evaluates that branch's closed form everywhere, which is
    what the trace currents on a perturbed surface need.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.asarray(points).ndim == 1
    if region is None:
        reg = np.where(pts[:, 2] >= 0.0, 1, 2)
        out_E = np.zeros((len(pts), 3), dtype=complex)
        out_H = np.zeros((len(pts), 3), dtype=complex)
        for r in (1, 2):
            sel = reg == r
            if np.any(sel):
                f = planewave_source_field(pts[sel], config, spec, region=r)
                out_E[sel] = f.E
                out_H[sel] = f.H
        return EMField(out_E[0], out_H[0]) if single else EMField(out_E, out_H)

    k1y, k1z, k2y, k2z = _planewave_kz(config, spec)
    E0, H0 = _transverse_amplitudes(config, spec)
    fr = fresnel(config, spec)
    y = pts[:, 1]
    z = pts[:, 2]
    if region == 1:
        dn = np.exp(1j * (k1y * y - k1z * z))
        up = np.exp(1j * (k1y * y + k1z * z))
        Ex = E0 * (dn + fr.R_TE * up)
        Hx = H0 * (dn + fr.R_TM * up)
        dEx_dz = E0 * 1j * k1z * (-dn + fr.R_TE * up)
        dHx_dz = H0 * 1j * k1z * (-dn + fr.R_TM * up)
        dEx_dy = 1j * k1y * Ex
        dHx_dy = 1j * k1y * Hx
        eps, mu = config.upper.eps, config.upper.mu
    elif region == 2:
        if config.pec_lower:
            zero = np.zeros((len(pts), 3), dtype=complex)
            return EMField(zero[0], zero[0]) if single else EMField(zero, zero.copy())
        tr = np.exp(1j * (k2y * y - k2z * z))
        Ex = E0 * fr.T_TE * tr
        Hx = H0 * fr.T_TM * tr
        dEx_dz = -1j * k2z * Ex
        dHx_dz = -1j * k2z * Hx
        dEx_dy = 1j * k2y * Ex
        dHx_dy = 1j * k2y * Hx
        eps, mu = config.lower.eps, config.lower.mu
    else:
        raise ParameterError(f"region must be 1 or 2, got {region}")

    iwe = 1j * config.omega * eps
    iwm = 1j * config.omega * mu
    E = np.column_stack([Ex, -dHx_dz / iwe, dHx_dy / iwe])
    H = np.column_stack([Hx, dEx_dz / iwm, -dEx_dy / iwm])
    return EMField(E[0], H[0]) if single else EMField(E, H)


def incident_planewave(points, config: LayeredConfig, spec: PlanewaveSpec) -> EMField:
    """The bare incident planewave (no interface), for reference checks."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.asarray(points).ndim == 1
    k1 = config.k1.real
    a = spec.grazing_angle
    kvec = np.array([0.0, k1 * np.cos(a), -k1 * np.sin(a)])
    p = spec.p()
    amp = np.cross(p, kvec)
    phase = np.exp(1j * (pts @ kvec))
    E = phase[:, None] * amp
    H = phase[:, None] * np.cross(kvec, amp) / (config.omega * config.upper.mu)
    return EMField(E[0], H[0]) if single else EMField(E, H)


def dipole_field(points, dipole: DipoleSpec, host: Material, omega: float) -> EMField:
    """Field of an electric dipole in the unbounded host material.

    H = (1/(i omega mu)) grad G x p and E = -(1/(i omega eps)) curl H,
    both in closed form.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.asarray(points).ndim == 1
    r0 = np.asarray(dipole.location, dtype=float)
    p = np.asarray(dipole.polarization, dtype=complex)
    k = host.wavenumber(omega)
    d = pts - r0
    R = np.linalg.norm(d, axis=1)
    if np.any(R < 1e-12):
        raise SingularityError("dipole field evaluated at the dipole location")
    rhat = d / R[:, None]
    G = np.exp(1j * k * R) / (_FOUR_PI * R)
    Gp = (1j * k - 1.0 / R) * G
    Gpp = (-(k**2) - 2j * k / R + 2.0 / R**2) * G
    gradG = Gp[:, None] * rhat
    H = np.cross(gradG, p[None, :]) / (1j * omega * host.mu)
    rp = rhat @ p
    hess_p = (Gpp - Gp / R)[:, None] * (rp[:, None] * rhat) + (Gp / R)[:, None] * p[None, :]
    E = G[:, None] * p[None, :] + hess_p / k**2
    return EMField(E[0], H[0]) if single else EMField(E, H)


def _as_dipole_list(excitation):
    if isinstance(excitation, DipoleSpec):
        return [excitation]
    return list(excitation)


def source_field(points, config: LayeredConfig, excitation, region: int) -> EMField:
    """Auxiliary source field of the given excitation, region branch as asked.

    Planewave: incident+reflected in region 1, transmitted in region 2.
    Dipoles: the free-space dipole field in the host region, zero elsewhere.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.asarray(points).ndim == 1
    if isinstance(excitation, PlanewaveSpec):
        f = planewave_source_field(pts, config, excitation, region=region)
        return EMField(f.E[0], f.H[0]) if single and f.E.ndim > 1 else f
    if isinstance(excitation, FreespacePlanewave):
        khat = np.asarray(excitation.direction, float)
        khat = khat / np.linalg.norm(khat)
        ehat = np.asarray(excitation.polarization, complex)
        k = config.k1.real
        phase = excitation.amplitude * np.exp(1j * k * (pts @ khat))
        E = phase[:, None] * ehat
        H = (k / (config.omega * config.upper.mu)) * phase[:, None] * np.cross(khat, ehat)
        return EMField(E[0], H[0]) if single else EMField(E, H)
    E = np.zeros((len(pts), 3), dtype=complex)
    H = np.zeros((len(pts), 3), dtype=complex)
    for dip in _as_dipole_list(excitation):
        if dip.region == region:
            f = dipole_field(pts, dip, config.material(region), config.omega)
            E += np.atleast_2d(f.E)
            H += np.atleast_2d(f.H)
    return EMField(E[0], H[0]) if single else EMField(E, H)


def source_currents(points, normals, config: LayeredConfig, excitation):
    """Trace currents M = n x (E|+ - E|-) and J = n x (H|+ - H|-) at surface
    points with the given unit normals (directed from region 2 to region 1)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nrm = np.atleast_2d(np.asarray(normals, dtype=float))
    f1 = source_field(pts, config, excitation, region=1)
    if config.pec_lower:
        E2 = np.zeros_like(np.atleast_2d(f1.E))
        H2 = np.zeros_like(np.atleast_2d(f1.H))
    else:
        f2 = source_field(pts, config, excitation, region=2)
        E2, H2 = np.atleast_2d(f2.E), np.atleast_2d(f2.H)
    M = np.cross(nrm, np.atleast_2d(f1.E) - E2)
    J = np.cross(nrm, np.atleast_2d(f1.H) - H2)
    return M, J


def mfie_excitation_trace(points, normals, config: LayeredConfig, excitation):
    """Right-hand side trace -n x E^src|+ of the windowed PEC formulation."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nrm = np.atleast_2d(np.asarray(normals, dtype=float))
    f1 = source_field(pts, config, excitation, region=1)
    return -np.cross(nrm, np.atleast_2d(f1.E))
