"""Triangle surface meshes, canonical perturbed-interface geometries, and the
div-conforming edge (RWG) basis built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError, MeshFormatError, ParameterError


class TriangleMesh:
    """Immutable triangle surface mesh with per-triangle normal, area, centroid.

    Triangle windings are counter-clockwise seen from the side the normal
    points to; on flat portions lying in z = 0 the normal is +z (directed
    from the lower medium into the upper one).
    """

    def __init__(self, vertices, triangles):
        v = np.ascontiguousarray(vertices, dtype=np.float64)
        t = np.ascontiguousarray(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must be an (m, 3) array")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        for row in t:
            if len(set(row.tolist())) != 3:
                raise MeshError(f"degenerate triangle with repeated vertex: {row.tolist()}")
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        cr = np.cross(e1, e2)
        nrm = np.linalg.norm(cr, axis=1)
        if np.any(nrm <= 0) or np.any(~np.isfinite(nrm)):
            raise MeshError("triangle with zero or invalid area")
        self.vertices = v
        self.triangles = t
        self.normals = cr / nrm[:, None]
        self.areas = 0.5 * nrm
        self.centroids = (v[t[:, 0]] + v[t[:, 1]] + v[t[:, 2]]) / 3.0
        self.diameters = np.max(
            [np.linalg.norm(v[t[:, 1]] - v[t[:, 0]], axis=1),
             np.linalg.norm(v[t[:, 2]] - v[t[:, 1]], axis=1),
             np.linalg.norm(v[t[:, 0]] - v[t[:, 2]], axis=1)],
            axis=0,
        )
        for a in (self.vertices, self.triangles, self.normals, self.areas,
                  self.centroids, self.diameters):
            a.setflags(write=False)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def triangle_vertices(self, t):
        return self.vertices[self.triangles[t]]

    def flipped(self):
        """Mesh with all windings (hence normals) reversed."""
        t = self.triangles[:, [0, 2, 1]]
        return TriangleMesh(self.vertices, t)

    def total_area(self):
        return float(self.areas.sum())

    def edge_map(self):
        """Map sorted vertex pair -> list of (triangle, local edge index).

        Local edge a of a triangle is the edge opposite its local vertex a,
        i.e. it connects local vertices (a+1, a+2) mod 3.
        """
        edges = {}
        for ti, tri in enumerate(self.triangles):
            for a in range(3):
                key = tuple(sorted((tri[(a + 1) % 3], tri[(a + 2) % 3])))
                edges.setdefault(key, []).append((ti, a))
        return edges


class RwgBasis:
    """Interior-edge RWG basis: one div-conforming function per shared edge.

    Basis n lives on the two triangles sharing edge n; on the plus triangle
    f_n(r) = (l_n / 2A+)(r - p+) and on the minus triangle
    f_n(r) = -(l_n / 2A-)(r - p-), where p is the vertex opposite the edge.
    The surface divergence is +-l_n / A, constant per triangle.
    """

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        edges = mesh.edge_map()
        ev, length, tp, tm, op, om = [], [], [], [], [], []
        tri_edge = -np.ones((mesh.num_triangles, 3), dtype=np.int64)
        tri_sign = np.zeros((mesh.num_triangles, 3), dtype=np.int64)
        for key in sorted(edges):
            owners = edges[key]
            if len(owners) > 2:
                raise MeshError(f"non-manifold edge {key} shared by {len(owners)} triangles")
            if len(owners) != 2:
                continue
            (t1, a1), (t2, a2) = owners
            n = len(ev)
            ev.append(key)
            length.append(np.linalg.norm(mesh.vertices[key[0]] - mesh.vertices[key[1]]))
            tp.append(t1)
            tm.append(t2)
            op.append(mesh.triangles[t1, a1])
            om.append(mesh.triangles[t2, a2])
            tri_edge[t1, a1] = n
            tri_sign[t1, a1] = 1
            tri_edge[t2, a2] = n
            tri_sign[t2, a2] = -1
        self.edge_vertices = np.array(ev, dtype=np.int64).reshape(-1, 2)
        self.edge_length = np.array(length)
        self.tri_plus = np.array(tp, dtype=np.int64)
        self.tri_minus = np.array(tm, dtype=np.int64)
        self.opp_plus = np.array(op, dtype=np.int64)
        self.opp_minus = np.array(om, dtype=np.int64)
        self.tri_edge = tri_edge
        self.tri_sign = tri_sign
        # Per-triangle local data: opposite vertex and signed l/(2A) factor.
        V, T = mesh.vertices, mesh.triangles
        self.tri_opp_vertex = np.zeros((mesh.num_triangles, 3, 3))
        self.tri_coef = np.zeros((mesh.num_triangles, 3))
        self.tri_div = np.zeros((mesh.num_triangles, 3))
        for t in range(mesh.num_triangles):
            for a in range(3):
                n = tri_edge[t, a]
                if n < 0:
                    continue
                self.tri_opp_vertex[t, a] = V[T[t, a]]
                self.tri_coef[t, a] = tri_sign[t, a] * self.edge_length[n] / (2.0 * mesh.areas[t])
                self.tri_div[t, a] = tri_sign[t, a] * self.edge_length[n] / mesh.areas[t]
        for arr in (self.edge_vertices, self.edge_length, self.tri_plus, self.tri_minus,
                    self.tri_edge, self.tri_sign, self.tri_opp_vertex, self.tri_coef,
                    self.tri_div):
            arr.setflags(write=False)

    @property
    def size(self):
        return len(self.edge_length)

    def values_at(self, t, points):
        """Values of the three local basis functions of triangle t at given
        physical points: array (3, npts, 3); rows of boundary (missing) edges
        are zero."""
        points = np.atleast_2d(points)
        out = np.zeros((3, len(points), 3))
        for a in range(3):
            if self.tri_edge[t, a] >= 0:
                out[a] = self.tri_coef[t, a] * (points - self.tri_opp_vertex[t, a])
        return out

    def expand(self, coefficients, t, points):
        """Surface current at physical points on triangle t."""
        vals = self.values_at(t, points)
        cur = np.zeros((len(np.atleast_2d(points)), 3), dtype=complex)
        for a in range(3):
            n = self.tri_edge[t, a]
            if n >= 0:
                cur += coefficients[n] * vals[a]
        return cur


def build_rwg_basis(mesh: TriangleMesh) -> RwgBasis:
    """All interior-edge RWG basis functions with consistent +/- orientation."""
    return RwgBasis(mesh)


@dataclass(frozen=True)
class GeometrySpec:
    """Canonical locally-perturbed geometries.

    kind: flat-disk | hemispherical-bump | spherical-cavity | closed-sphere.
    radius: perturbation radius R (bump/sphere radius; cavity sector radius).
    window_radius: truncation radius A of the meshed surface.
    mesh_size: target edge length h.
    grading: radial grading exponent (> 1 refines toward the center/tip).
    """

    kind: str
    radius: float = 0.0
    window_radius: float = 0.0
    mesh_size: float = 0.1
    grading: float = 1.0

    _KINDS = ("flat-disk", "hemispherical-bump", "spherical-cavity", "closed-sphere")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ParameterError(f"unknown geometry kind {self.kind!r}")
        if self.mesh_size <= 0:
            raise ParameterError("mesh_size must be positive")
        if self.grading <= 0:
            raise ParameterError("grading must be positive")
        if self.kind == "flat-disk":
            if not (self.window_radius > 0):
                raise ParameterError("flat-disk needs window_radius > 0")
            if self.mesh_size >= self.window_radius:
                raise ParameterError("mesh_size too large for the disk radius")
        elif self.kind == "closed-sphere":
            if not (0 < self.mesh_size < self.radius):
                raise ParameterError("closed-sphere needs 0 < mesh_size < radius")
        else:
            if not (0 < self.radius < self.window_radius):
                raise ParameterError("need 0 < radius < window_radius")
            if not (self.mesh_size < self.radius):
                raise ParameterError("mesh_size too large to resolve the perturbation")

    @property
    def cavity_aperture(self) -> float:
        """Aperture radius of the spherical cavity (half the sector radius)."""
        return 0.5 * self.radius

    @property
    def cavity_center(self):
        """Center of the cavity sphere: below the plane so the sector dips deep."""
        return np.array([0.0, 0.0, -math.sqrt(self.radius**2 - self.cavity_aperture**2)])

    def region_of(self, points):
        """Region tag (1 = upper medium, 2 = lower medium) of off-surface points."""
        p = np.atleast_2d(np.asarray(points, float))
        if self.kind == "flat-disk":
            reg = np.where(p[:, 2] >= 0.0, 1, 2)
        elif self.kind == "hemispherical-bump":
            inside = np.linalg.norm(p, axis=1) < self.radius
            reg = np.where((p[:, 2] < 0.0) | inside, 2, 1)
        elif self.kind == "spherical-cavity":
            void = np.linalg.norm(p - self.cavity_center, axis=1) < self.radius
            reg = np.where((p[:, 2] < 0.0) & ~void, 2, 1)
        else:
            reg = np.where(np.linalg.norm(p, axis=1) < self.radius, 2, 1)
        return reg if np.asarray(points).ndim > 1 else int(reg[0])


def _ring_points(radius, z, count, grading_angle=0.0):
    phi = 2.0 * np.pi * np.arange(count) / count + grading_angle
    return np.column_stack([radius * np.cos(phi), radius * np.sin(phi), np.full(count, z)])


def _ring_count(radius, h):
    return max(6, int(round(2.0 * np.pi * radius / h)))


def _stitch(inner_ids, outer_ids):
    """Watertight triangle strip between two concentric vertex rings.

    Both rings are index lists ordered by increasing azimuth; orientation of
    the emitted triangles is counter-clockwise seen from the +normal side of
    an annulus whose inner ring comes first.
    """
    ni, no = len(inner_ids), len(outer_ids)
    tris = []
    if ni == 1:
        c = inner_ids[0]
        for j in range(no):
            tris.append((c, outer_ids[j], outer_ids[(j + 1) % no]))
        return tris
    i = j = 0
    while i < ni or j < no:
        adv_inner = (i + 1) / ni <= (j + 1) / no if (i < ni and j < no) else i < ni
        if adv_inner:
            tris.append((inner_ids[i % ni], outer_ids[j % no], inner_ids[(i + 1) % ni]))
            i += 1
        else:
            tris.append((outer_ids[j % no], outer_ids[(j + 1) % no], inner_ids[i % ni]))
            j += 1
    return tris


class _Builder:
    def __init__(self):
        self.vertices = []
        self.triangles = []

    def add_ring(self, pts):
        base = len(self.vertices)
        self.vertices.extend(pts)
        return list(range(base, base + len(pts)))

    def connect(self, inner, outer, flip=False):
        tris = _stitch(inner, outer)
        if flip:
            tris = [(a, c, b) for (a, b, c) in tris]
        self.triangles.extend(tris)

    def mesh(self):
        return TriangleMesh(np.array(self.vertices), np.array(self.triangles, dtype=np.int64))


def _graded(m, M, grading):
    return (m / M) ** grading


def _disk_rings(builder, r_start, r_end, h, grading, first_ring_ids, z=0.0):
    """Annulus rings from r_start (existing ring ids) out to r_end."""
    M = max(1, int(round((r_end - r_start) / h)))
    prev = first_ring_ids
    for m in range(1, M + 1):
        r = r_start + (r_end - r_start) * _graded(m, M, grading)
        ids = builder.add_ring(_ring_points(r, z, _ring_count(r, h)))
        builder.connect(prev, ids)
        prev = ids
    return prev


def make_surface(spec: GeometrySpec) -> TriangleMesh:
    """Structured triangulation of the truncated interface for the given
    geometry; deterministic ring/azimuth construction, approximate size h."""
    h = spec.mesh_size
    b = _Builder()
    if spec.kind == "flat-disk":
        center = b.add_ring(np.zeros((1, 3)))
        _disk_rings(b, 0.0, spec.window_radius, h, spec.grading, center)
        return b.mesh()

    if spec.kind == "hemispherical-bump":
        R, A = spec.radius, spec.window_radius
        Mb = max(2, int(round((0.5 * np.pi * R) / h)))
        pole = b.add_ring(np.array([[0.0, 0.0, R]]))
        prev = pole
        for m in range(1, Mb + 1):
            th = 0.5 * np.pi * _graded(m, Mb, spec.grading)
            ids = b.add_ring(_ring_points(R * math.sin(th), R * math.cos(th),
                                          _ring_count(R * math.sin(th), h)))
            b.connect(prev, ids)
            prev = ids
        _disk_rings(b, R, A, h, 1.0, prev)
        return b.mesh()

    if spec.kind == "spherical-cavity":
        R, A = spec.radius, spec.window_radius
        a = spec.cavity_aperture
        c = spec.cavity_center
        th_ap = math.acos(c[2] / R)  # polar angle of the aperture ring
        Mb = max(2, int(round(R * th_ap / h)))
        pole = b.add_ring(np.array([[0.0, 0.0, c[2] - R]]))
        prev = pole
        for m in range(1, Mb + 1):
            th = th_ap * _graded(m, Mb, spec.grading)
            rho = R * math.sin(th)
            z = c[2] - R * math.cos(th)
            ids = b.add_ring(_ring_points(rho, z, _ring_count(rho, h)))
            b.connect(prev, ids)
            prev = ids
        _disk_rings(b, a, A, h, 1.0, prev)
        return b.mesh()

    # closed-sphere
    R = spec.radius
    M = max(3, int(round(np.pi * R / h)))
    north = b.add_ring(np.array([[0.0, 0.0, R]]))
    prev = north
    for m in range(1, M):
        th = np.pi * m / M
        ids = b.add_ring(_ring_points(R * math.sin(th), R * math.cos(th),
                                      _ring_count(R * math.sin(th), h)))
        b.connect(prev, ids)
        prev = ids
    south = b.add_ring(np.array([[0.0, 0.0, -R]]))
    b.connect(south, prev, flip=True)
    return b.mesh()


def import_gmsh(path) -> TriangleMesh:
    """Read a Gmsh ASCII v2.2 file with 3-node triangle elements.

    Point (15) and line (1) elements are skipped; any other element type is
    rejected.  Node ids may be sparse; they are remapped to dense indices.
    """
    with open(path, "r") as f:
        lines = f.read().splitlines()
    i = 0

    def fail(msg, ln):
        raise MeshFormatError(msg, line=ln + 1)

    nodes = {}
    tris = []
    saw_format = False
    while i < len(lines):
        tok = lines[i].strip()
        if tok == "$MeshFormat":
            parts = lines[i + 1].split()
            if not parts or not parts[0].startswith("2.2"):
                fail(f"unsupported gmsh format version {parts[0] if parts else '?'}", i + 1)
            saw_format = True
            i += 3
        elif tok == "$Nodes":
            try:
                count = int(lines[i + 1])
            except (ValueError, IndexError):
                fail("bad node count", i + 1)
            for j in range(count):
                ln = i + 2 + j
                parts = lines[ln].split()
                if len(parts) < 4:
                    fail("bad node line", ln)
                try:
                    nodes[int(parts[0])] = [float(parts[1]), float(parts[2]), float(parts[3])]
                except ValueError:
                    fail("bad node coordinates", ln)
            i += count + 3
        elif tok == "$Elements":
            try:
                count = int(lines[i + 1])
            except (ValueError, IndexError):
                fail("bad element count", i + 1)
            for j in range(count):
                ln = i + 2 + j
                parts = lines[ln].split()
                if len(parts) < 3:
                    fail("bad element line", ln)
                etype = int(parts[1])
                ntags = int(parts[2])
                conn = parts[3 + ntags:]
                if etype == 2:
                    if len(conn) != 3:
                        fail("triangle element with wrong node count", ln)
                    tris.append([int(c) for c in conn])
                elif etype in (1, 15):
                    continue
                else:
                    fail(f"unsupported element type {etype}", ln)
            i += count + 3
        else:
            i += 1
    if not saw_format:
        raise MeshFormatError("missing $MeshFormat section", line=1)
    if not tris:
        raise MeshFormatError("no triangle elements found", line=1)
    ids = sorted(nodes)
    remap = {nid: k for k, nid in enumerate(ids)}
    verts = np.array([nodes[nid] for nid in ids])
    tri = np.array([[remap[a] for a in row] for row in tris], dtype=np.int64)
    return TriangleMesh(verts, tri)


def export_gmsh(mesh: TriangleMesh, path):
    """Write the mesh as Gmsh ASCII v2.2."""
    with open(path, "w") as f:
        f.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        f.write(f"$Nodes\n{mesh.num_vertices}\n")
        for i, v in enumerate(mesh.vertices, start=1):
            f.write(f"{i} {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        f.write("$EndNodes\n")
        f.write(f"$Elements\n{mesh.num_triangles}\n")
        for i, t in enumerate(mesh.triangles, start=1):
            f.write(f"{i} 2 2 0 0 {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        f.write("$EndElements\n")


def dump_mesh(mesh: TriangleMesh, path):
    """Plain-text dump: vertex table then triangle table."""
    with open(path, "w") as f:
        f.write(f"vertices {mesh.num_vertices}\n")
        for v in mesh.vertices:
            f.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        f.write(f"triangles {mesh.num_triangles}\n")
        for t in mesh.triangles:
            f.write(f"{t[0]} {t[1]} {t[2]}\n")
