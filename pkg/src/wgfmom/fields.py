"""Off-surface field evaluation from solved currents, total-field assembly,
error metrics, and CSV / legacy-VTK output.

The scattered fields are produced by the standard potential representation
applied to the window-weighted currents (electric and magnetic densities
multiplied by the window at the source point).  Because both E and H derive
from the same effective currents, the pair satisfies the Maxwell system
exactly, independent of the truncation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, ParameterError
from .geometry import RwgBasis, TriangleMesh
from .media import EMField, LayeredConfig, source_field
from .quadrature import QuadratureRule
from .window import WindowParams, window_gradient, window_value

_FOUR_PI = 4.0 * np.pi


@dataclass
class FieldGrid:
    """Evaluation points with region tags; shape is set for planar slices."""

    points: np.ndarray
    regions: np.ndarray
    shape: tuple | None = None
    clearance: float | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.regions = np.asarray(self.regions, dtype=int)
        if len(self.regions) != len(self.points):
            raise ParameterError("regions must match points")


def plane_grid(origin, span_u, span_v, nu, nv, geometry, clearance=None) -> FieldGrid:
    """Structured planar slice: origin plus i/(nu-1) span_u + j/(nv-1) span_v."""
    origin = np.asarray(origin, float)
    su = np.asarray(span_u, float)
    sv = np.asarray(span_v, float)
    iu = np.linspace(0.0, 1.0, nu)
    iv = np.linspace(0.0, 1.0, nv)
    pts = origin[None, None, :] + iu[:, None, None] * su + iv[None, :, None] * sv
    pts = pts.reshape(-1, 3)
    regions = geometry.region_of(pts)
    return FieldGrid(points=pts, regions=regions, shape=(nu, nv), clearance=clearance)


@dataclass
class _SourceData:
    Y: np.ndarray        # source quadrature points (Q, 3)
    tri: np.ndarray      # owning triangle of each point
    w_cur: np.ndarray    # weight * window * current (Q, 3) complex
    w_div: np.ndarray    # weight * div(window * current) (Q,) complex


def _windowed_current_data(coeffs, mesh: TriangleMesh, basis: RwgBasis,
                           window: WindowParams, bary, wq):
    """Quadrature samples of the window-weighted current and its surface
    divergence div(w f) = w div f + grad_s(w) . f."""
    V, T = mesh.vertices, mesh.triangles
    pts = np.einsum("qb,tbc->tqc", bary, V[T])
    nq = len(wq)
    Tn = mesh.num_triangles
    cur = np.zeros((Tn, nq, 3), dtype=complex)
    div = np.zeros((Tn, nq), dtype=complex)
    for a in range(3):
        n = basis.tri_edge[:, a]
        valid = n >= 0
        c = np.where(valid, basis.tri_coef[:, a], 0.0)
        amp = np.zeros(Tn, dtype=complex)
        amp[valid] = coeffs[n[valid]]
        fa = c[:, None, None] * (pts - basis.tri_opp_vertex[:, a][:, None, :])
        cur += amp[:, None, None] * fa
        div += (amp * np.where(valid, basis.tri_div[:, a], 0.0))[:, None]
    flat_pts = pts.reshape(-1, 3)
    w = window_value(flat_pts, window)
    gw = window_gradient(flat_pts, window)
    nrm = np.repeat(mesh.normals, nq, axis=0)
    gw_t = gw - (np.sum(gw * nrm, axis=1))[:, None] * nrm
    cur = cur.reshape(-1, 3)
    div = div.reshape(-1)
    wdiv = w * div + np.einsum("qc,qc->q", gw_t, cur)
    qw = np.outer(mesh.areas, wq).reshape(-1)
    tri = np.repeat(np.arange(Tn), nq)
    return _SourceData(Y=flat_pts, tri=tri, w_cur=(qw * w)[:, None] * cur,
                       w_div=qw * wdiv)


def _potentials(points, src: _SourceData, k: complex, block: int = 96):
    """Scalar-potential-corrected single layer and curl layer of the weighted
    current: returns (S_vec, S_div_grad, D_curl) with
    S_vec = int G j, S_div_grad = grad int G div j, D_curl = int grad G x j."""
    pts = np.atleast_2d(points)
    P = len(pts)
    Sv = np.zeros((P, 3), dtype=complex)
    Sg = np.zeros((P, 3), dtype=complex)
    Dc = np.zeros((P, 3), dtype=complex)
    for p0 in range(0, P, block):
        pb = pts[p0:p0 + block]
        d = pb[:, None, :] - src.Y[None, :, :]
        R = np.sqrt(np.einsum("pqc,pqc->pq", d, d))
        G = np.exp(1j * k * R) / (_FOUR_PI * R)
        gc = G * (1j * k - 1.0 / R) / R
        Sv[p0:p0 + block] = G @ src.w_cur
        Sg[p0:p0 + block] = np.einsum("pq,pqc->pc", gc * src.w_div[None, :], d)
        cross = np.cross(d, np.broadcast_to(src.w_cur, d.shape))
        Dc[p0:p0 + block] = np.einsum("pq,pqc->pc", gc, cross)
    return Sv, Sg, Dc


def _min_distances(points, mesh: TriangleMesh):
    """Conservative per-point distance to the surface: distance to the
    nearest triangle, bounded below via centroids and diameters."""
    pts = np.atleast_2d(points)
    d = np.linalg.norm(pts[:, None, :] - mesh.centroids[None, :, :], axis=2)
    lower = d - mesh.diameters[None, :]
    return np.maximum(lower.min(axis=1), 0.0), d


def evaluate_scattered(currents, mesh: TriangleMesh, basis: RwgBasis,
                       window: WindowParams, config: LayeredConfig,
                       points, region: int, quad: QuadratureRule | None = None,
                       clearance: float | None = None) -> EMField:
    """Scattered field of the solved currents at off-surface points in the
    given region.

    Transmission: E = k^2 S[wv] + i omega mu D[wu], H = k^2 S[wu] - i omega
    eps D[wv].  PEC: E = D[wu], H = -i omega eps S[wu].  Points closer than
    2 local diameters use the upgraded rule; points inside the clearance
    (default half the local mesh size) are refused.
    """
    quad = quad or QuadratureRule()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.asarray(points).ndim == 1
    if clearance is None:
        clearance = 0.25 * float(np.median(mesh.diameters))
    dmin, dcent = _min_distances(pts, mesh)
    near_scale = 2.0 * float(np.median(mesh.diameters))
    if np.any(dmin < clearance):
        # Tight check only for flagged points: exact vertex distances.
        flagged = np.where(dmin < clearance)[0]
        for p in flagged:
            vd = np.linalg.norm(mesh.vertices - pts[p], axis=1).min()
            cd = dcent[p].min()
            if min(vd, cd) < clearance:
                raise EvaluationError(
                    f"evaluation point {pts[p]} closer than clearance {clearance:g}")
    use_hi = dmin.min() < near_scale

    mat = config.material(region)
    k = mat.wavenumber(config.omega)
    omega = config.omega
    pec = config.pec_lower

    u = currents.u
    v = currents.v
    bary, wq = quad.near() if use_hi else quad.regular()
    su = _windowed_current_data(u, mesh, basis, window, bary, wq)
    Svu, Sgu, Dcu = _potentials(pts, su, k)
    if pec:
        E = Dcu
        H = -1j * omega * mat.eps * (k * k * Svu + Sgu) / (k * k)
        # H = -i omega eps S[wu] with S = int G j + (1/k^2) grad int G div j
    else:
        sv = _windowed_current_data(v, mesh, basis, window, bary, wq)
        Svv, Sgv, Dcv = _potentials(pts, sv, k)
        E = (k * k * Svv + Sgv) + 1j * omega * mat.mu * Dcu
        H = (k * k * Svu + Sgu) - 1j * omega * mat.eps * Dcv
    return EMField(E[0], H[0]) if single else EMField(E, H)


def total_field(points, currents, excitation, config: LayeredConfig,
                mesh: TriangleMesh, basis: RwgBasis, window: WindowParams,
                geometry, quad: QuadratureRule | None = None,
                clearance: float | None = None) -> EMField:
    """Source field plus scattered field, region-resolved per point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.asarray(points).ndim == 1
    regions = geometry.region_of(pts) if geometry is not None else np.ones(len(pts), int)
    E = np.zeros((len(pts), 3), dtype=complex)
    H = np.zeros((len(pts), 3), dtype=complex)
    for r in (1, 2):
        sel = np.asarray(regions) == r
        if not np.any(sel):
            continue
        if r == 2 and config.pec_lower:
            continue  # no field inside a PEC
        src = source_field(pts[sel], config, excitation, region=r)
        sc = evaluate_scattered(currents, mesh, basis, window, config, pts[sel],
                                region=r, quad=quad, clearance=clearance)
        E[sel] = np.atleast_2d(src.E) + np.atleast_2d(sc.E)
        H[sel] = np.atleast_2d(src.H) + np.atleast_2d(sc.H)
    return EMField(E[0], H[0]) if single else EMField(E, H)


def relative_error(approx, reference) -> float:
    """max |approx - reference| / max |reference| over the point set, with
    the Euclidean norm over complex field components."""
    a = np.atleast_2d(np.asarray(approx))
    r = np.atleast_2d(np.asarray(reference))
    if a.shape != r.shape:
        raise ParameterError("field arrays must have matching shapes")
    ref = np.linalg.norm(r, axis=-1).max()
    if ref == 0.0:
        raise ParameterError("degenerate all-zero reference field")
    return float(np.linalg.norm(a - r, axis=-1).max() / ref)


_CSV_COLUMNS = ["x", "y", "z", "region",
                "re_Ex", "im_Ex", "re_Ey", "im_Ey", "re_Ez", "im_Ez",
                "re_Hx", "im_Hx", "re_Hy", "im_Hy", "re_Hz", "im_Hz"]


def export_fields_csv(path, grid: FieldGrid, fld: EMField):
    """Point table with the 12 real field columns at full double precision."""
    E = np.atleast_2d(fld.E)
    H = np.atleast_2d(fld.H)
    with open(path, "w") as f:
        f.write(",".join(_CSV_COLUMNS) + "\n")
        for p, reg, e, h in zip(grid.points, grid.regions, E, H):
            row = [f"{p[0]:.17g}", f"{p[1]:.17g}", f"{p[2]:.17g}", str(int(reg))]
            for comp in (*e, *h):
                row.append(f"{comp.real:.17g}")
                row.append(f"{comp.imag:.17g}")
            f.write(",".join(row) + "\n")


def export_fields_vtk(path, grid: FieldGrid, fld: EMField, name: str = "field"):
    """Legacy-ASCII structured-grid file for a planar slice (shape required)."""
    if grid.shape is None:
        raise ParameterError("VTK slice export needs a structured FieldGrid")
    nu, nv = grid.shape
    E = np.atleast_2d(fld.E)
    H = np.atleast_2d(fld.H)
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(f"{name}\nASCII\nDATASET STRUCTURED_GRID\n")
        f.write(f"DIMENSIONS {nv} {nu} 1\n")
        f.write(f"POINTS {nu * nv} double\n")
        for p in grid.points:
            f.write(f"{p[0]:.12g} {p[1]:.12g} {p[2]:.12g}\n")
        f.write(f"POINT_DATA {nu * nv}\n")
        f.write("SCALARS E_intensity double 1\nLOOKUP_TABLE default\n")
        inten = np.sum(np.abs(E) ** 2, axis=1)
        for s in inten:
            f.write(f"{s:.12g}\n")
        for label, arr in (("re_E", E.real), ("im_E", E.imag),
                           ("re_H", H.real), ("im_H", H.imag)):
            f.write(f"VECTORS {label} double\n")
            for vec in arr:
                f.write(f"{vec[0]:.12g} {vec[1]:.12g} {vec[2]:.12g}\n")


def read_fields_csv(path):
    """Round-trip reader for the CSV table: returns (grid points, regions, E, H)."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    pts = np.column_stack([data["x"], data["y"], data["z"]])
    reg = data["region"].astype(int)
    E = np.column_stack([data["re_Ex"] + 1j * data["im_Ex"],
                         data["re_Ey"] + 1j * data["im_Ey"],
                         data["re_Ez"] + 1j * data["im_Ez"]])
    H = np.column_stack([data["re_Hx"] + 1j * data["im_Hx"],
                         data["re_Hy"] + 1j * data["im_Hy"],
                         data["re_Hz"] + 1j * data["im_Hz"]])
    return pts, reg, EMField(E, H)
