"""Triangle quadrature rules and relative-coordinate tables for singular pairs.

Reference simplex convention used throughout: a triangle with vertices
(P0, P1, P2) is parameterized as x(u, v) = P0 + u (P1 - P0) + v (P2 - P0)
over {u >= 0, v >= 0, u + v <= 1}; the surface measure is ds = 2 A du dv.

Regular (disjoint) pairs use tensor products of symmetric triangle rules.
Pairs sharing a vertex, an edge, or the whole triangle are integrated with
Duffy-type subdomain transforms in relative coordinates that cancel the
kernel singularity; each transform maps [0, 1]^4 onto one subdomain and is
tabulated once per 1D order as a flat list of (u1, v1, u2, v2, weight).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import ParameterError

# Symmetric positive-weight rules, barycentric orbits, weights sum to 1.
_SYMMETRIC_RULES = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((2 / 3, 1 / 6, 1 / 6), 1 / 3)],
    4: [
        ((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322),
    ],
    5: [
        ((1 / 3, 1 / 3, 1 / 3), 0.225),
        ((0.059715871789770, 0.470142064105115, 0.470142064105115), 0.132394152788506),
        ((0.797426985353087, 0.101286507323456, 0.101286507323456), 0.125939180544827),
    ],
}


def _expand_orbits(entries):
    pts, wts = [], []
    for bary, w in entries:
        seen = set()
        for perm in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            p = tuple(bary[i] for i in perm)
            if p in seen:
                continue
            seen.add(p)
            pts.append(p)
            wts.append(w)
    return np.array(pts), np.array(wts)


def gauss_legendre_01(n: int):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=32)
def triangle_rule(degree: int):
    """Symmetric triangle rule of the given polynomial degree.

    Returns (barycentric points (n, 3), weights (n,)) with weights summing
    to one; physical weights are obtained by multiplying with the triangle
    area.  Degrees without a tabulated symmetric rule fall back to a
    collapsed tensor rule of at least that degree.
    """
    if degree in _SYMMETRIC_RULES:
        return _expand_orbits(_SYMMETRIC_RULES[degree])
    return collapsed_rule((degree + 2) // 2)


@lru_cache(maxsize=32)
def collapsed_rule(n: int):
    """Tensor Gauss-Jacobi x Gauss-Legendre rule on the simplex, degree 2n-1.

    All weights positive; weights sum to one (area fractions), points are
    returned in barycentric coordinates.
    """
    if n < 1:
        raise ParameterError("collapsed rule needs n >= 1")
    xj, wj = roots_jacobi(n, 0.0, 1.0)  # weight (1+x) on [-1, 1]
    xi = 0.5 * (xj + 1.0)
    wi = 0.25 * wj
    ye, we = gauss_legendre_01(n)
    u = np.outer(xi, 1.0 - ye).ravel()
    v = np.outer(xi, ye).ravel()
    w = 2.0 * np.outer(wi, we).ravel()  # simplex area 1/2 -> weight sum 1
    bary = np.column_stack([1.0 - u - v, u, v])
    return bary, w


# ---------------------------------------------------------------------------
# Relative-coordinate tables for singular pairs.
#
# Self (coincident) pair: with z = (u1 - u2, v1 - v2) the admissible z-set is
# the hexagon spanned by the six generators below; each adjacent-generator
# cone is Duffy-scaled (z = xi * mix of generators) and the base point runs
# over the simplex shrunk by (1 - xi).  Jacobian: xi (1 - xi)^2 (1 - s).
# ---------------------------------------------------------------------------

_HEX_GENERATORS = [
    ((1.0, 0.0), (0.0, 1.0)),
    ((0.0, 1.0), (-1.0, 1.0)),
    ((-1.0, 1.0), (-1.0, 0.0)),
    ((-1.0, 0.0), (0.0, -1.0)),
    ((0.0, -1.0), (1.0, -1.0)),
    ((1.0, -1.0), (1.0, 0.0)),
]


@lru_cache(maxsize=8)
def self_pair_table(n: int):
    """Quadrature table for a triangle paired with itself: (m, 5) array of
    (u1, v1, u2, v2, weight); sum(weight * F) times (2A)^2 integrates F."""
    g, w = gauss_legendre_01(n)
    XI, RHO, S, Q = np.meshgrid(g, g, g, g, indexing="ij")
    WXI, WRHO, WS, WQ = np.meshgrid(w, w, w, w, indexing="ij")
    xi = XI.ravel()
    rho = RHO.ravel()
    s = S.ravel()
    q = Q.ravel()
    wt = (WXI * WRHO * WS * WQ).ravel()
    rows = []
    base_u = (1.0 - xi) * s
    base_v = (1.0 - xi) * q * (1.0 - s)
    jac = xi * (1.0 - xi) ** 2 * (1.0 - s)
    for g1, g2 in _HEX_GENERATORS:
        zu = xi * ((1.0 - rho) * g1[0] + rho * g2[0])
        zv = xi * ((1.0 - rho) * g1[1] + rho * g2[1])
        u1 = base_u + np.maximum(zu, 0.0)
        u2 = base_u + np.maximum(-zu, 0.0)
        v1 = base_v + np.maximum(zv, 0.0)
        v2 = base_v + np.maximum(-zv, 0.0)
        rows.append(np.column_stack([u1, v1, u2, v2, wt * jac]))
    return np.vstack(rows)


@lru_cache(maxsize=8)
def edge_pair_table(n: int):
    """Table for two triangles sharing the edge (P0, P1), both parameterized
    with the shared edge as their (P0, P1) side."""
    g, w = gauss_legendre_01(n)
    ETA, A, B, T = np.meshgrid(g, g, g, g, indexing="ij")
    WE, WA, WB, WT = np.meshgrid(w, w, w, w, indexing="ij")
    eta = ETA.ravel()
    a = A.ravel()
    b = B.ravel()
    t = T.ravel()
    wt = (WE * WA * WB * WT).ravel()

    regions = []

    # Cone with the edge offset z = u1 - u2 dominant.
    xi = eta / (1.0 + a)
    regions.append((xi + t * (1.0 - eta), xi * a, t * (1.0 - eta), xi * b,
                    eta**2 * (1.0 - eta) / (1.0 + a) ** 3))
    # Cone with v1 dominant.
    xi = eta / (1.0 + a)
    regions.append((xi * a + t * (1.0 - eta), xi, t * (1.0 - eta), xi * b,
                    eta**2 * (1.0 - eta) / (1.0 + a) ** 3))
    # Cone with v2 dominant, split along alpha1 + beta = 1.
    al = a * b
    be = a * (1.0 - b)
    regions.append((eta * be + t * (1.0 - eta), eta * al, t * (1.0 - eta), eta,
                    eta**2 * (1.0 - eta) * a))
    al = 1.0 - a * b
    be = 1.0 - a * (1.0 - b)
    xi = eta / (2.0 - a)
    regions.append((xi * be + t * (1.0 - eta), xi * al, t * (1.0 - eta), xi,
                    eta**2 * (1.0 - eta) * a / (2.0 - a) ** 3))

    rows = []
    for u1, v1, u2, v2, jac in regions:
        rows.append(np.column_stack([u1, v1, u2, v2, wt * jac]))
        # Mirror: the edge offset has the opposite sign; swap the two panels.
        rows.append(np.column_stack([u2, v2, u1, v1, wt * jac]))
    return np.vstack(rows)


@lru_cache(maxsize=8)
def vertex_pair_table(n: int):
    """Table for two triangles sharing only the vertex P0 (first vertex of
    both parameterizations)."""
    g, w = gauss_legendre_01(n)
    XI, ETA, W1, W2 = np.meshgrid(g, g, g, g, indexing="ij")
    WX, WH, WW1, WW2 = np.meshgrid(w, w, w, w, indexing="ij")
    xi = XI.ravel()
    et = ETA.ravel()
    w1 = W1.ravel()
    w2 = W2.ravel()
    wt = (WX * WH * WW1 * WW2).ravel()
    rows = []
    for ua, ub in ((xi, xi * et), (xi * et, xi)):
        # square-Duffy coords (u, w) -> simplex coords (u (1-w), u w)
        u1 = ua * (1.0 - w1)
        v1 = ua * w1
        u2 = ub * (1.0 - w2)
        v2 = ub * w2
        rows.append(np.column_stack([u1, v1, u2, v2, wt * xi**3 * et]))
    return np.vstack(rows)


@dataclass(frozen=True)
class QuadratureRule:
    """Assembly quadrature configuration.

    regular_degree: polynomial degree of the symmetric rule on disjoint pairs.
    singular_points: 1D Gauss order per dimension inside the Duffy transforms.
    near_points: 1D order of the collapsed rule upgraded onto near pairs.
    near_factor: pairs closer than near_factor * max(diameter) use the
    upgraded rule.
    """

    regular_degree: int = 4
    singular_points: int = 4
    near_points: int = 6
    near_factor: float = 1.5

    def __post_init__(self):
        if self.regular_degree < 1 or self.singular_points < 1 or self.near_points < 1:
            raise ParameterError("quadrature orders must be >= 1")
        if self.near_factor < 0:
            raise ParameterError("near_factor must be nonnegative")

    def regular(self):
        return triangle_rule(self.regular_degree)

    def near(self):
        return collapsed_rule(self.near_points)

    def table(self, shared: int):
        if shared == 3:
            return self_pair_table(self.singular_points)
        if shared == 2:
            return edge_pair_table(self.singular_points)
        if shared == 1:
            return vertex_pair_table(self.singular_points)
        raise ParameterError(f"no singular table for {shared} shared vertices")
