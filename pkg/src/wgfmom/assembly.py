"""Galerkin assembly of the windowed transmission (Muller) system and the
windowed PEC system, with singular, near-singular, and regular quadrature.

Identity terms multiply the plain RWG Gram matrix (the window never touches
them); every integral-operator kernel carries the window weight at the
source quadrature point.  The two off-diagonal transmission blocks are equal
by construction and share storage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _numba_kernels as nk
from .errors import AssemblyError, ParameterError, SizeError
from .geometry import RwgBasis, TriangleMesh
from .kernels import switch_radius
from .media import LayeredConfig, mfie_excitation_trace, source_currents
from .quadrature import QuadratureRule, triangle_rule
from .window import WindowParams, window_value

_INV4PI = 1.0 / (4.0 * np.pi)
_CHUNK = 64


def _taylor_coeffs(k1: complex, k2: complex):
    """Series coefficients of grad[G(k2)-G(k1)] = r * sum tay[m] R^{m-3}."""
    tay = np.zeros(5, dtype=complex)
    for idx, m in enumerate(range(2, 7)):
        tay[idx] = ((m - 1) / math.factorial(m)) * ((1j * k2) ** m - (1j * k1) ** m) * _INV4PI
    return tay


@dataclass
class MeshTables:
    """Per-triangle quadrature and basis data shared by all assembly passes."""

    qp: np.ndarray      # (T, nq, 3) regular points
    qw: np.ndarray      # (T, nq) weights including area
    win: np.ndarray     # (T, nq) window at the points
    qph: np.ndarray     # upgraded tables for near pairs
    qwh: np.ndarray
    winh: np.ndarray
    coef: np.ndarray    # (T, 3) signed l/(2A)
    opp: np.ndarray     # (T, 3, 3) opposite vertex
    divs: np.ndarray    # (T, 3) signed l/A
    edge: np.ndarray    # (T, 3) global edge index or -1
    nrm: np.ndarray
    cent: np.ndarray
    diam: np.ndarray


def build_tables(mesh: TriangleMesh, basis: RwgBasis, quad: QuadratureRule,
                 window: WindowParams) -> MeshTables:
    V, T = mesh.vertices, mesh.triangles

    def points_weights(bary, w):
        pts = np.einsum("qb,tbc->tqc", bary, V[T])
        wts = np.outer(mesh.areas, w)
        return np.ascontiguousarray(pts), np.ascontiguousarray(wts)

    bary, w = quad.regular()
    qp, qw = points_weights(bary, w)
    baryh, wh = quad.near()
    qph, qwh = points_weights(baryh, wh)
    win = window_value(qp.reshape(-1, 3), window).reshape(qw.shape)
    winh = window_value(qph.reshape(-1, 3), window).reshape(qwh.shape)
    return MeshTables(
        qp=qp, qw=qw, win=win, qph=qph, qwh=qwh, winh=winh,
        coef=np.ascontiguousarray(basis.tri_coef),
        opp=np.ascontiguousarray(basis.tri_opp_vertex),
        divs=np.ascontiguousarray(basis.tri_div),
        edge=np.ascontiguousarray(basis.tri_edge),
        nrm=np.ascontiguousarray(mesh.normals),
        cent=np.ascontiguousarray(mesh.centroids),
        diam=np.ascontiguousarray(mesh.diameters),
    )


def shared_vertex_count(mesh: TriangleMesh, t: int, s: int) -> int:
    return len(set(mesh.triangles[t].tolist()) & set(mesh.triangles[s].tolist()))


def classify_pairs(mesh: TriangleMesh, quad: QuadratureRule):
    """Adjacency lists (pairs sharing >= 1 vertex) and near-pair lists
    (disjoint pairs closer than near_factor times the larger diameter),
    both as per-test-triangle CSR with sorted column indices."""
    Tn = mesh.num_triangles
    vert_tris = [[] for _ in range(mesh.num_vertices)]
    for t, tri in enumerate(mesh.triangles):
        for vtx in tri:
            vert_tris[vtx].append(t)
    adjacent = [set() for _ in range(Tn)]
    for owners in vert_tris:
        for t in owners:
            adjacent[t].update(owners)

    # Spatial binning of centroids for near-pair candidates.
    dmax = float(mesh.diameters.max())
    reach = quad.near_factor * dmax
    cell = max(reach, dmax) + dmax
    near = [[] for _ in range(Tn)]
    if quad.near_factor > 0:
        keys = np.floor(mesh.centroids / cell).astype(np.int64)
        bins = {}
        for t, key in enumerate(map(tuple, keys)):
            bins.setdefault(key, []).append(t)
        Vt = mesh.vertices[mesh.triangles]  # (T, 3, 3)
        for t in range(Tn):
            kx, ky, kz = keys[t]
            cand = []
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for dz in (-1, 0, 1):
                        cand.extend(bins.get((kx + dx, ky + dy, kz + dz), ()))
            cand = np.array([s for s in cand if s != t and s not in adjacent[t]],
                            dtype=np.int64)
            if len(cand) == 0:
                continue
            diff = Vt[t][None, :, None, :] - Vt[cand][:, None, :, :]
            d2 = np.einsum("sabc,sabc->sab", diff, diff).min(axis=(1, 2))
            thr = quad.near_factor * np.maximum(mesh.diameters[t], mesh.diameters[cand])
            near[t].extend(cand[d2 < thr * thr].tolist())

    def to_csr(lists, extra=None):
        ptr = np.zeros(Tn + 1, dtype=np.int64)
        cols = []
        for t in range(Tn):
            items = sorted(set(lists[t]) | (set(extra[t]) if extra else set()))
            cols.extend(items)
            ptr[t + 1] = len(cols)
        return ptr, np.array(cols, dtype=np.int64)

    adj_ptr, adj_idx = to_csr([sorted(a) for a in adjacent])
    near_ptr, near_idx = to_csr([sorted(n) for n in near])
    skip_ptr, skip_idx = to_csr([sorted(a) for a in adjacent], extra=near)
    return (adj_ptr, adj_idx), (near_ptr, near_idx), (skip_ptr, skip_idx)


def gram_matrix(mesh: TriangleMesh, basis: RwgBasis) -> sp.csr_matrix:
    """RWG Gram matrix (real, sparse); exact for the quadratic integrand."""
    bary, w = triangle_rule(4)
    rows, cols, vals = [], [], []
    V, T = mesh.vertices, mesh.triangles
    pts = np.einsum("qb,tbc->tqc", bary, V[T])
    for t in range(mesh.num_triangles):
        fa = np.zeros((3, len(w), 3))
        for a in range(3):
            fa[a] = basis.tri_coef[t, a] * (pts[t] - basis.tri_opp_vertex[t, a])
        loc = mesh.areas[t] * np.einsum("q,aqc,bqc->ab", w, fa, fa)
        for a in range(3):
            ra = basis.tri_edge[t, a]
            if ra < 0:
                continue
            for b in range(3):
                cb = basis.tri_edge[t, b]
                if cb < 0:
                    continue
                rows.append(ra)
                cols.append(cb)
                vals.append(loc[a, b])
    N = basis.size
    return sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()


# ---------------------------------------------------------------------------
# Point-list contributions (singular tables, upgraded tensor rules, tests).
# ---------------------------------------------------------------------------

def _scalar_kernels(R, k1, k2, need_diff=True):
    """Scalar coefficients of the kernels on a batch of separations: each
    gradient kernel equals coefficient * (x - y)."""
    ik1, ik2 = 1j * k1, 1j * k2
    invR = 1.0 / R
    e1 = np.exp(ik1 * R)
    g1 = e1 * invR * _INV4PI
    gc1 = g1 * (ik1 - invR) * invR
    if not need_diff:
        return g1, gc1, None, None
    z = (ik2 - ik1) * R
    small = np.abs(z) < 1e-4
    em1 = np.where(small, z * (1.0 + z * 0.5 * (1.0 + (z / 3.0) * (1.0 + z * 0.25))),
                   np.exp(np.where(small, 0.0, z)) - 1.0)
    gdiff = e1 * em1 * invR * _INV4PI
    rs = switch_radius(k1, k2)
    tay = _taylor_coeffs(k1, k2)
    dgc = np.empty_like(g1)
    far = R > rs
    g2f = g1[far] + gdiff[far]
    dgc[far] = g2f * (ik2 - invR[far]) * invR[far] - gc1[far]
    Rn = R[~far]
    dgc[~far] = tay[0] / Rn + tay[1] + Rn * (tay[2] + Rn * (tay[3] + Rn * tay[4]))
    gam = k2 * k2 * gdiff + (k2 * k2 - k1 * k1) * g1
    return g1, gc1, dgc, gam


def pair_contribution(X, Y, W, nt_vec, coef_t, opp_t, coef_s, opp_s, divs_s,
                      k1, k2, kinds, mu=(1.0, 1.0), eps=(1.0, 2.0)):
    """3x3 local Galerkin blocks for one triangle pair from explicit point
    lists: X (n,3) test points, Y (n,3) source points, W combined weights
    (window included).  kinds is an iterable of
    {'k1','kdiff_mu','kdiff_eps','svec','graddiff','gram'}."""
    r = X - Y
    R = np.linalg.norm(r, axis=1)
    need_diff = any(kd in kinds for kd in ("kdiff_mu", "kdiff_eps", "svec", "graddiff"))
    g1, gc1, dgc, gam = _scalar_kernels(R, k1, k2, need_diff=need_diff)

    fa = np.empty((3, len(X), 3))
    ga = np.empty((3, len(X), 3))
    fb = np.empty((3, len(Y), 3))
    for a in range(3):
        fa[a] = coef_t[a] * (X - opp_t[a])
        ga[a] = np.cross(np.broadcast_to(nt_vec, X.shape), fa[a])
        fb[a] = coef_s[a] * (Y - opp_s[a])
    nr = r @ nt_vec
    nfb = np.einsum("c,bqc->bq", nt_vec, fb)
    far_ = np.einsum("aqc,qc->aq", fa, r)
    gar = np.einsum("aqc,qc->aq", ga, r)

    out = {}
    if "gram" in kinds:
        blk = np.einsum("q,aqc,bqc->ab", W, fa, fb)
        out["gram"] = blk.astype(complex)
    for kd, coefk in (("k1", gc1), ("kdiff_mu", None), ("kdiff_eps", None)):
        if kd not in kinds:
            continue
        if kd == "kdiff_mu":
            coefk = mu[1] * dgc + (mu[1] - mu[0]) * gc1
        elif kd == "kdiff_eps":
            coefk = eps[1] * dgc + (eps[1] - eps[0]) * gc1
        wk = W * coefk
        blk = np.einsum("aq,q,bq->ab", far_, wk, nfb) - np.einsum(
            "q,aqc,bqc->ab", wk * nr, fa, fb)
        out[kd] = blk
    if "svec" in kinds:
        out["svec"] = -np.einsum("q,aqc,bqc->ab", W * gam, ga, fb)
    if "graddiff" in kinds:
        out["graddiff"] = -np.einsum("aq,q->a", gar, W * dgc)[:, None] * np.asarray(divs_s)[None, :]
    return out


def _mapped_points(tabs, Vt, Vs):
    u1, v1, u2, v2, w = tabs.T
    X = Vt[0] + np.outer(u1, Vt[1] - Vt[0]) + np.outer(v1, Vt[2] - Vt[0])
    Y = Vs[0] + np.outer(u2, Vs[1] - Vs[0]) + np.outer(v2, Vs[2] - Vs[0])
    return X, Y, w


def _tensor_points(bary_t, w_t, bary_s, w_s, Vt, Vs):
    Pt = bary_t @ Vt
    Ps = bary_s @ Vs
    n, m = len(Pt), len(Ps)
    X = np.repeat(Pt, m, axis=0)
    Y = np.tile(Ps, (n, 1))
    W = np.outer(w_t, w_s).ravel()
    return X, Y, W


def _ordered_vertices(mesh, t, s, shared):
    """Vertex orderings putting shared vertices first (identically for both
    triangles), as the relative-coordinate tables require."""
    vt = mesh.triangles[t].tolist()
    vs = mesh.triangles[s].tolist()
    common = sorted(set(vt) & set(vs))
    if shared == 3:
        order_t = vt
        order_s = vt if t == s else vs
    elif shared == 2:
        order_t = common + [v for v in vt if v not in common]
        order_s = common + [v for v in vs if v not in common]
    elif shared == 1:
        order_t = common + [v for v in vt if v not in common]
        order_s = common + [v for v in vs if v not in common]
    else:
        order_t, order_s = vt, vs
    return mesh.vertices[order_t], mesh.vertices[order_s]


class _PairEngine:
    """Shared machinery for the singular pass and integrate_pair."""

    def __init__(self, mesh, basis, quad, window, k1, k2, mu, eps):
        self.mesh = mesh
        self.basis = basis
        self.quad = quad
        self.window = window
        self.k1, self.k2i = k1, k2
        self.mu, self.eps = mu, eps

    def points_for(self, t, s, shared):
        mesh = self.mesh
        if shared > 0:
            tabs = self.quad.table(shared)
            Vt, Vs = _ordered_vertices(mesh, t, s, shared)
            X, Y, w = _mapped_points(tabs, Vt, Vs)
            W = w * 4.0 * mesh.areas[t] * mesh.areas[s]
        else:
            Vt = mesh.vertices[mesh.triangles[t]]
            Vs = mesh.vertices[mesh.triangles[s]]
            d2 = np.sum((Vt[:, None, :] - Vs[None, :, :]) ** 2, axis=2).min()
            thr = self.quad.near_factor * max(mesh.diameters[t], mesh.diameters[s])
            if d2 < thr * thr:
                bary, wq = self.quad.near()
            else:
                bary, wq = self.quad.regular()
            X, Y, W = _tensor_points(bary, wq * mesh.areas[t], bary, wq * mesh.areas[s], Vt, Vs)
        if self.window is not None:
            W = W * window_value(Y, self.window)
        return X, Y, W

    def blocks(self, t, s, kinds, shared=None):
        if shared is None:
            shared = shared_vertex_count(self.mesh, t, s)
        X, Y, W = self.points_for(t, s, shared)
        b = self.basis
        return pair_contribution(
            X, Y, W, self.mesh.normals[t],
            b.tri_coef[t], b.tri_opp_vertex[t],
            b.tri_coef[s], b.tri_opp_vertex[s], b.tri_div[s],
            self.k1, self.k2i, kinds, mu=self.mu, eps=self.eps)


# ---------------------------------------------------------------------------
# System matrices.
# ---------------------------------------------------------------------------

@dataclass
class SurfaceCurrents:
    """Solved RWG coefficients: u is the magnetic-type density; v is the
    electric-type density (None in the PEC formulation)."""

    u: np.ndarray
    v: np.ndarray | None = None


class MuellerMatrix:
    """2N x 2N block system.  Diagonal blocks are c * Gram plus (for curved
    meshes) a dense rotated-curl difference part; both off-diagonal blocks
    are the same dense array."""

    kind = "mueller"

    def __init__(self, gram, c11, c22, K11, K22, B12):
        self.gram = gram
        self.c11 = c11
        self.c22 = c22
        self.K11 = K11
        self.K22 = K22
        self.B12 = B12
        self.N = gram.shape[0]

    @property
    def shape(self):
        return (2 * self.N, 2 * self.N)

    def matvec(self, x):
        N = self.N
        u, v = x[:N], x[N:]
        y1 = self.c11 * (self.gram @ u) + self.B12 @ v
        y2 = self.B12 @ u + self.c22 * (self.gram @ v)
        if self.K11 is not None:
            y1 += self.K11 @ u
            y2 += self.K22 @ v
        return np.concatenate([y1, y2])

    def diagonal(self):
        d = self.gram.diagonal()
        d1 = self.c11 * d
        d2 = self.c22 * d
        if self.K11 is not None:
            d1 = d1 + self.K11.diagonal()
            d2 = d2 + self.K22.diagonal()
        return np.concatenate([d1, d2])

    def dense(self, cap: int = 6000):
        if 2 * self.N > cap:
            raise SizeError(f"dense 2N={2 * self.N} exceeds cap {cap}")
        G = self.gram.toarray().astype(complex)
        M = np.zeros((2 * self.N, 2 * self.N), dtype=complex)
        M[: self.N, : self.N] = self.c11 * G
        M[self.N:, self.N:] = self.c22 * G
        if self.K11 is not None:
            M[: self.N, : self.N] += self.K11
            M[self.N:, self.N:] += self.K22
        M[: self.N, self.N:] = self.B12
        M[self.N:, : self.N] = self.B12
        return M

    def dump(self, path, cap: int = 6000):
        M = self.dense(cap=cap)
        with open(path, "wb") as f:
            np.array(M.shape, dtype=np.int64).tofile(f)
            np.ascontiguousarray(M, dtype=np.complex128).tofile(f)


class PecMatrix:
    """N x N dense system Gram/2 + windowed rotated-curl operator."""

    kind = "mfie"

    def __init__(self, A):
        self.A = A
        self.N = A.shape[0]

    @property
    def shape(self):
        return self.A.shape

    def matvec(self, x):
        return self.A @ x

    def diagonal(self):
        return np.diagonal(self.A).copy()

    def dense(self, cap: int = 100000):
        if self.N > cap:
            raise SizeError(f"dense N={self.N} exceeds cap {cap}")
        return self.A

    def dump(self, path, cap: int = 100000):
        with open(path, "wb") as f:
            np.array(self.A.shape, dtype=np.int64).tofile(f)
            np.ascontiguousarray(self.A, dtype=np.complex128).tofile(f)


def _check_finite(name, arr):
    if arr is not None and not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise AssemblyError(f"non-finite entry in {name} at {tuple(bad)}")


def _is_flat(mesh: TriangleMesh) -> bool:
    """True when every triangle lies in the single plane z = 0."""
    return bool(np.all(np.abs(mesh.vertices[:, 2]) < 1e-14)
                and np.all(mesh.normals[:, 2] > 0))


def _scatter(rows_of, out, target):
    nt = out.shape[0]
    for tl in range(nt):
        for a in range(3):
            row = rows_of[tl, a]
            if row >= 0:
                target[row, :] += out[tl, a, :]


def assemble_mueller(mesh: TriangleMesh, basis: RwgBasis, config: LayeredConfig,
                     window: WindowParams, quad: QuadratureRule | None = None) -> MuellerMatrix:
    """Windowed second-kind transmission system for penetrable half-spaces."""
    if config.pec_lower:
        raise ParameterError("PEC lower half-space requires the PEC formulation")
    quad = quad or QuadratureRule()
    k1, k2 = config.k1, config.k2
    mu1, mu2 = config.upper.mu, config.lower.mu
    eps1, eps2 = config.upper.eps, config.lower.eps
    omega = config.omega
    N = basis.size
    tables = build_tables(mesh, basis, quad, window)
    (adj_ptr, adj_idx), (near_ptr, near_idx), (skip_ptr, skip_idx) = classify_pairs(mesh, quad)

    flat = _is_flat(mesh)
    B12 = np.zeros((N, N), dtype=complex)
    K11 = None if flat else np.zeros((N, N), dtype=complex)
    K22 = None if flat else np.zeros((N, N), dtype=complex)
    tay = _taylor_coeffs(k1, k2)
    rswitch = switch_radius(k1, k2)
    do_k = not flat

    Tn = mesh.num_triangles
    dummy = np.zeros((1, 3, N), dtype=complex)
    for t0 in range(0, Tn, _CHUNK):
        nt = min(_CHUNK, Tn - t0)
        out11 = np.zeros((nt, 3, N), dtype=complex) if do_k else dummy
        out22 = np.zeros((nt, 3, N), dtype=complex) if do_k else dummy
        out12 = np.zeros((nt, 3, N), dtype=complex)
        for mode, ptr, idx in ((0, skip_ptr, skip_idx), (1, near_ptr, near_idx)):
            nk._mueller_pass(
                t0, nt, tables.qp, tables.qw, tables.win, tables.qph, tables.qwh,
                tables.winh, tables.coef, tables.opp, tables.divs, tables.edge,
                tables.nrm, tables.cent, tables.diam,
                ptr, idx, ptr, idx, mode,
                complex(k1), complex(k2), float(omega),
                complex(mu1), complex(mu2), complex(eps1), complex(eps2),
                float(rswitch), tay, do_k, out11, out12, out22)
        rows_of = tables.edge[t0:t0 + nt]
        _scatter(rows_of, out12, B12)
        if do_k:
            _scatter(rows_of, out11, K11)
            _scatter(rows_of, out22, K22)

    # Singular (adjacent) pairs: relative-coordinate tables.
    engine = _PairEngine(mesh, basis, quad, window, k1, k2, (mu1, mu2), (eps1, eps2))
    iw = 1j * omega
    for t in range(Tn):
        for p in range(adj_ptr[t], adj_ptr[t + 1]):
            s = adj_idx[p]
            shared = shared_vertex_count(mesh, t, s)
            coplanar = (abs(1.0 - mesh.normals[t] @ mesh.normals[s]) < 1e-12 and
                        abs(mesh.normals[t] @ (mesh.centroids[s] - mesh.centroids[t]))
                        < 1e-12 * (mesh.diameters[t] + mesh.diameters[s]))
            kinds = {"svec", "graddiff"}
            if do_k and not coplanar:
                kinds |= {"kdiff_mu", "kdiff_eps"}
            blocks = engine.blocks(t, s, kinds, shared=shared)
            for a in range(3):
                row = basis.tri_edge[t, a]
                if row < 0:
                    continue
                for b in range(3):
                    col = basis.tri_edge[s, b]
                    if col < 0:
                        continue
                    B12[row, col] += blocks["svec"][a, b] + blocks["graddiff"][a, b]
                    if "kdiff_mu" in blocks:
                        K11[row, col] += iw * blocks["kdiff_mu"][a, b]
                        K22[row, col] += -iw * blocks["kdiff_eps"][a, b]

    gram = gram_matrix(mesh, basis)
    c11 = -0.5j * omega * (mu1 + mu2)
    c22 = +0.5j * omega * (eps1 + eps2)
    for name, arr in (("B12", B12), ("K11", K11), ("K22", K22)):
        _check_finite(name, arr)
    return MuellerMatrix(gram, c11, c22, K11, K22, B12)


def assemble_mfie(mesh: TriangleMesh, basis: RwgBasis, config: LayeredConfig,
                  window: WindowParams, quad: QuadratureRule | None = None) -> PecMatrix:
    """Windowed second-kind PEC system: Gram/2 + windowed rotated-curl term."""
    if not config.pec_lower:
        raise ParameterError("PEC formulation needs pec_lower=True")
    quad = quad or QuadratureRule()
    k1 = config.k1
    N = basis.size
    tables = build_tables(mesh, basis, quad, window)
    (adj_ptr, adj_idx), (near_ptr, near_idx), (skip_ptr, skip_idx) = classify_pairs(mesh, quad)

    A = np.zeros((N, N), dtype=complex)
    Tn = mesh.num_triangles
    for t0 in range(0, Tn, _CHUNK):
        nt = min(_CHUNK, Tn - t0)
        out = np.zeros((nt, 3, N), dtype=complex)
        for mode, ptr, idx in ((0, skip_ptr, skip_idx), (1, near_ptr, near_idx)):
            nk._mfie_pass(
                t0, nt, tables.qp, tables.qw, tables.win, tables.qph, tables.qwh,
                tables.winh, tables.coef, tables.opp, tables.edge,
                tables.nrm, tables.cent, tables.diam,
                ptr, idx, ptr, idx, mode, complex(k1), out)
        _scatter(tables.edge[t0:t0 + nt], out, A)

    engine = _PairEngine(mesh, basis, quad, window, k1, k1, (1.0, 1.0), (1.0, 1.0))
    for t in range(Tn):
        for p in range(adj_ptr[t], adj_ptr[t + 1]):
            s = adj_idx[p]
            coplanar = (abs(1.0 - mesh.normals[t] @ mesh.normals[s]) < 1e-12 and
                        abs(mesh.normals[t] @ (mesh.centroids[s] - mesh.centroids[t]))
                        < 1e-12 * (mesh.diameters[t] + mesh.diameters[s]))
            if coplanar:
                continue
            blocks = engine.blocks(t, s, {"k1"}, shared=shared_vertex_count(mesh, t, s))
            for a in range(3):
                row = basis.tri_edge[t, a]
                if row < 0:
                    continue
                for b in range(3):
                    col = basis.tri_edge[s, b]
                    if col < 0:
                        continue
                    A[row, col] += blocks["k1"][a, b]

    gram = gram_matrix(mesh, basis)
    A += 0.5 * gram.toarray()
    _check_finite("A", A)
    return PecMatrix(A)


def project_trace(mesh: TriangleMesh, basis: RwgBasis, quad: QuadratureRule,
                  trace_at_points) -> np.ndarray:
    """Galerkin projection b_m = int f_m . F over the mesh, F given at the
    regular quadrature points as an array (T, nq, 3)."""
    bary, w = quad.regular()
    V, T = mesh.vertices, mesh.triangles
    pts = np.einsum("qb,tbc->tqc", bary, V[T])
    qw = np.outer(mesh.areas, w)
    b = np.zeros(basis.size, dtype=complex)
    F = np.asarray(trace_at_points)
    for a in range(3):
        fa = basis.tri_coef[:, a, None, None] * (pts - basis.tri_opp_vertex[:, a][:, None, :])
        contrib = np.einsum("tq,tqc,tqc->t", qw, fa, F)
        rows = basis.tri_edge[:, a]
        valid = rows >= 0
        np.add.at(b, rows[valid], contrib[valid])
    return b


def assemble_rhs(mesh: TriangleMesh, basis: RwgBasis, excitation,
                 config: LayeredConfig, quad: QuadratureRule | None = None,
                 formulation: str = "auto") -> np.ndarray:
    """Right-hand side: Galerkin tests of the excitation trace currents.

    Transmission problems give the stacked [M-trace; J-trace] vector of
    length 2N; the PEC path gives the length-N projection of -n x E_src."""
    quad = quad or QuadratureRule()
    if formulation == "auto":
        formulation = "mfie" if config.pec_lower else "mueller"
    bary, w = quad.regular()
    V, T = mesh.vertices, mesh.triangles
    pts = np.einsum("qb,tbc->tqc", bary, V[T])
    nq = len(w)
    flat_pts = pts.reshape(-1, 3)
    nrm = np.repeat(mesh.normals, nq, axis=0)
    if formulation == "mfie":
        tr = mfie_excitation_trace(flat_pts, nrm, config, excitation)
        return project_trace(mesh, basis, quad, tr.reshape(pts.shape).astype(complex))
    M, J = source_currents(flat_pts, nrm, config, excitation)
    bM = project_trace(mesh, basis, quad, M.reshape(pts.shape))
    bJ = project_trace(mesh, basis, quad, J.reshape(pts.shape))
    return np.concatenate([bM, bJ])


def integrate_pair(mesh: TriangleMesh, basis: RwgBasis, t: int, s: int, kind: str,
                   quad: QuadratureRule, k1: complex, k2: complex = None,
                   window: WindowParams | None = None,
                   mu=(1.0, 1.0), eps=(1.0, 1.0), force_class: int | None = None):
    """3x3 local Galerkin block of one kernel kind over a triangle pair.

    kind in {'gram','k1','kdiff_mu','kdiff_eps','svec','graddiff'}.
    force_class overrides the adjacency classification (the relative-
    coordinate transforms are valid reparameterizations for any pair, which
    lets tests compare them against plain tensor quadrature on smooth pairs).
    """
    if kind not in ("gram", "k1", "kdiff_mu", "kdiff_eps", "svec", "graddiff"):
        raise ParameterError(f"unknown kernel kind {kind!r}")
    shared = force_class if force_class is not None else shared_vertex_count(mesh, t, s)
    if shared not in (0, 1, 2, 3):
        raise ParameterError(f"invalid adjacency class {shared}")
    k2 = k1 if k2 is None else k2
    engine = _PairEngine(mesh, basis, quad, window, k1, k2, mu, eps)
    return engine.blocks(t, s, {kind}, shared=shared)[kind]
