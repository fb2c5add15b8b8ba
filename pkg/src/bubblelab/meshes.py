"""Panel meshes: geometry, ASCII I/O, generators, and the boundary shape factor.

Meshes are flat-panel surfaces made of triangles and planar quads.  The ASCII
format has one vertex per line ``v x y z`` and one panel per line ``f i j k``
(triangle) or ``q i j k l`` (quad), all 0-indexed.
"""

from __future__ import annotations

import numpy as np

from .errors import GeometryError

# Symmetric Gauss rules on the reference triangle, barycentric coordinates.
# order 1: degree-1 centroid rule; order 2: degree-2 3-point; order >=3:
# degree-4 6-point (weights sum to 1, area folded in separately).
_TRI_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.array([1 / 3, 1 / 3, 1 / 3]),
    ),
    3: (
        np.array(
            [
                [0.108103018168070, 0.445948490915965, 0.445948490915965],
                [0.445948490915965, 0.108103018168070, 0.445948490915965],
                [0.445948490915965, 0.445948490915965, 0.108103018168070],
                [0.816847572980459, 0.091576213509771, 0.091576213509771],
                [0.091576213509771, 0.816847572980459, 0.091576213509771],
                [0.091576213509771, 0.091576213509771, 0.816847572980459],
            ]
        ),
        np.array(
            [
                0.223381589678011,
                0.223381589678011,
                0.223381589678011,
                0.109951743655322,
                0.109951743655322,
                0.109951743655322,
            ]
        ),
    ),
}


def tri_rule(order: int):
    return _TRI_RULES[min(max(order, 1), 3)]


class SurfaceMesh:
    """Flat-panel surface mesh with centroids, areas and unit normals.

    ``faces`` is a list of 3- or 4-index tuples; quads must be (near) planar.
    Normals follow the face winding (right-hand rule); for closed meshes the
    winding is expected to point outward.
    """

    def __init__(self, vertices, faces):
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise GeometryError("vertices must be an (n, 3) array")
        self.faces = [tuple(int(i) for i in f) for f in faces]
        nv = len(self.vertices)
        for f in self.faces:
            if len(f) not in (3, 4):
                raise GeometryError(f"panel with {len(f)} vertices not supported")
            if any(i < 0 or i >= nv for i in f):
                raise GeometryError("face index out of range")
        self._compute_panel_data()

    def _compute_panel_data(self):
        n = len(self.faces)
        self.centroids = np.zeros((n, 3))
        self.areas = np.zeros(n)
        self.normals = np.zeros((n, 3))
        for k, f in enumerate(self.faces):
            pts = self.vertices[list(f)]
            # fan-triangulate about vertex 0; works for triangles and planar
            # convex quads alike
            c = np.zeros(3)
            area = 0.0
            vecn = np.zeros(3)
            for j in range(1, len(f) - 1):
                cross = np.cross(pts[j] - pts[0], pts[j + 1] - pts[0])
                a = 0.5 * np.linalg.norm(cross)
                area += a
                vecn += 0.5 * cross
                c += a * (pts[0] + pts[j] + pts[j + 1]) / 3.0
            if area <= 0.0:
                raise GeometryError(f"degenerate panel {k}")
            self.centroids[k] = c / area
            self.areas[k] = area
            self.normals[k] = vecn / np.linalg.norm(vecn)
        self.total_area = float(self.areas.sum())
        # radius of the smallest centroid-centred ball containing the panel
        self.panel_radii = np.array(
            [
                np.linalg.norm(self.vertices[list(f)] - self.centroids[k], axis=1).max()
                for k, f in enumerate(self.faces)
            ]
        )
        self.boundary_edges = self._boundary_edges()
        self.is_closed = len(self.boundary_edges) == 0

    def _boundary_edges(self):
        seen = {}
        for f in self.faces:
            m = len(f)
            for j in range(m):
                e = (f[j], f[(j + 1) % m])
                key = (min(e), max(e))
                seen[key] = seen.get(key, 0) + 1
        return sorted(k for k, cnt in seen.items() if cnt == 1)

    @property
    def n_panels(self) -> int:
        return len(self.faces)

    def closure_defect(self) -> float:
        """|sum of area-weighted normals| relative to the total area (~0 when closed)."""
        return float(np.linalg.norm((self.normals * self.areas[:, None]).sum(axis=0)) / self.total_area)

    def require_closed(self, tol: float = 1e-8):
        if not self.is_closed:
            raise GeometryError("mesh has boundary edges; a closed surface is required")
        if self.closure_defect() > tol:
            raise GeometryError(
                f"closure defect {self.closure_defect():.3e} exceeds {tol:.1e}; check orientation"
            )

    def enclosed_volume(self) -> float:
        """Signed volume by the divergence theorem; positive for outward normals."""
        return float((self.centroids * self.normals).sum(axis=1) @ self.areas) / 3.0

    def triangulated(self):
        """(m, 3, 3) vertex array of all panels fan-split into triangles."""
        tris = []
        owner = []
        for k, f in enumerate(self.faces):
            pts = self.vertices[list(f)]
            for j in range(1, len(f) - 1):
                tris.append([pts[0], pts[j], pts[j + 1]])
                owner.append(k)
        return np.array(tris), np.array(owner, dtype=int)

    def vertex_sharing_pairs(self):
        """Set of unordered panel pairs that share at least one vertex."""
        incident = {}
        for k, f in enumerate(self.faces):
            for i in f:
                incident.setdefault(i, []).append(k)
        pairs = set()
        for panels in incident.values():
            for ii in range(len(panels)):
                for jj in range(ii + 1, len(panels)):
                    pairs.add((panels[ii], panels[jj]))
        return pairs

    def save(self, path):
        with open(path, "w") as fh:
            for v in self.vertices:
                fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
            for f in self.faces:
                tag = "f" if len(f) == 3 else "q"
                fh.write(tag + " " + " ".join(str(i) for i in f) + "\n")


def load_mesh(path) -> SurfaceMesh:
    vertices = []
    faces = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            tag, rest = parts[0], parts[1:]
            if tag == "v":
                if len(rest) != 3:
                    raise GeometryError(f"{path}:{ln}: vertex needs 3 coordinates")
                vertices.append([float(x) for x in rest])
            elif tag == "f":
                if len(rest) != 3:
                    raise GeometryError(f"{path}:{ln}: triangle needs 3 indices")
                faces.append(tuple(int(i) for i in rest))
            elif tag == "q":
                if len(rest) != 4:
                    raise GeometryError(f"{path}:{ln}: quad needs 4 indices")
                faces.append(tuple(int(i) for i in rest))
            else:
                raise GeometryError(f"{path}:{ln}: unknown record '{tag}'")
    if not faces:
        raise GeometryError(f"{path}: no panels found")
    return SurfaceMesh(np.array(vertices), faces)


# ---------------------------------------------------------------------------
# generators


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Geodesic sphere: icosahedron subdivided and projected, 20*4^n triangles."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts)
    for _ in range(subdivisions):
        midpoint = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint:
                p = verts[i] + verts[j]
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for (i, j, k) in faces:
            a, b, c = mid(i, j), mid(j, k), mid(k, i)
            new_faces += [(i, a, c), (j, b, a), (k, c, b), (a, b, c)]
        faces = new_faces
    out = np.array(verts) * radius + np.asarray(center, dtype=float)
    return SurfaceMesh(out, faces)


def cube_mesh(n: int = 8, side: float = 1.0, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Closed triangulated cube surface, 12*n^2 triangles, outward normals."""
    h = side / 2.0
    grid = np.linspace(-h, h, n + 1)
    vid = {}
    verts = []

    def vertex(p):
        key = tuple(np.round(p, 12))
        if key not in vid:
            vid[key] = len(verts)
            verts.append(p)
        return vid[key]

    faces = []
    # each entry: (fixed axis, fixed value, flip winding)
    for axis in range(3):
        for sgn in (-1.0, 1.0):
            for i in range(n):
                for j in range(n):
                    u0, u1 = grid[i], grid[i + 1]
                    v0, v1 = grid[j], grid[j + 1]
                    quad2d = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
                    quad = []
                    for (u, v) in quad2d:
                        p = np.zeros(3)
                        p[axis] = sgn * h
                        p[(axis + 1) % 3] = u
                        p[(axis + 2) % 3] = v
                        quad.append(vertex(p))
                    if sgn < 0:
                        quad = quad[::-1]
                    faces.append((quad[0], quad[1], quad[2]))
                    faces.append((quad[0], quad[2], quad[3]))
    out = np.array(verts) + np.asarray(center, dtype=float)
    return SurfaceMesh(out, faces)


def _ring_radii(r_max: float, n: int, grading: float, levels: int):
    """n+1 radial breakpoints on [0, r_max]; the last `levels` intervals shrink
    geometrically by `grading` toward r_max (edge-singular densities)."""
    levels = min(levels, max(n - 1, 0))
    if levels == 0 or grading >= 1.0:
        return np.linspace(0.0, r_max, n + 1)
    w = np.ones(n)
    for k in range(levels):
        w[n - levels + k :] *= grading
    w = np.concatenate([[0.0], np.cumsum(w)])
    return r_max * w / w[-1]


def sphere_cap_mesh(
    radius: float = 1.0,
    theta_max: float = np.pi / 2,
    n_rings: int = 12,
    n_phi: int = 36,
    grading: float = 0.7,
    grading_levels: int = 3,
    center=(0.0, 0.0, 0.0),
) -> SurfaceMesh:
    """Open spherical cap about +z: pole fan plus quad rings, graded at the rim.

    Normals point away from the sphere center (outward for the parent sphere).
    """
    thetas = _ring_radii(theta_max, n_rings, grading, grading_levels)
    verts = [np.array([0.0, 0.0, radius])]
    rows = []
    for th in thetas[1:]:
        row = []
        for k in range(n_phi):
            ph = 2 * np.pi * k / n_phi
            row.append(len(verts))
            verts.append(
                radius * np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
            )
        rows.append(row)
    faces = []
    for k in range(n_phi):
        faces.append((0, rows[0][k], rows[0][(k + 1) % n_phi]))
    for r in range(len(rows) - 1):
        lo, hi = rows[r], rows[r + 1]
        for k in range(n_phi):
            k2 = (k + 1) % n_phi
            faces.append((lo[k], hi[k], hi[k2], lo[k2]))
    out = np.array(verts) + np.asarray(center, dtype=float)
    return SurfaceMesh(out, faces)


def disk_mesh(
    radius: float = 1.0,
    n_rings: int = 10,
    n_phi: int = 32,
    grading: float = 0.7,
    grading_levels: int = 3,
    center=(0.0, 0.0, 0.0),
) -> SurfaceMesh:
    """Open flat disk in the z=0 plane, normals +z, rim-graded rings."""
    radii = _ring_radii(radius, n_rings, grading, grading_levels)
    verts = [np.array([0.0, 0.0, 0.0])]
    rows = []
    for r in radii[1:]:
        row = []
        for k in range(n_phi):
            ph = 2 * np.pi * k / n_phi
            row.append(len(verts))
            verts.append(np.array([r * np.cos(ph), r * np.sin(ph), 0.0]))
        rows.append(row)
    faces = []
    for k in range(n_phi):
        faces.append((0, rows[0][k], rows[0][(k + 1) % n_phi]))
    for r in range(len(rows) - 1):
        lo, hi = rows[r], rows[r + 1]
        for k in range(n_phi):
            k2 = (k + 1) % n_phi
            faces.append((lo[k], hi[k], hi[k2], lo[k2]))
    out = np.array(verts) + np.asarray(center, dtype=float)
    return SurfaceMesh(out, faces)


def _graded_axis(length: float, n: int, grading: float, levels: int):
    """n+1 breakpoints on [-length/2, length/2]; the outermost `levels`
    intervals at each end shrink geometrically by `grading`."""
    levels = min(levels, max(n // 2 - 1, 0))
    w = np.ones(n)
    if grading < 1.0:
        for i in range(n):
            d = min(i, n - 1 - i)
            if d < levels:
                w[i] = grading ** (levels - d)
    pts = np.concatenate([[0.0], np.cumsum(w)])
    return length * (pts / pts[-1] - 0.5)


def rect_mesh(lx: float, ly: float, nx: int, ny: int, center=(0.0, 0.0, 0.0),
              grading: float = 1.0, grading_levels: int = 3) -> SurfaceMesh:
    """Open flat rectangle in the z=0 plane, normals +z; optional edge grading."""
    xs = _graded_axis(lx, nx, grading, grading_levels)
    ys = _graded_axis(ly, ny, grading, grading_levels)
    verts = np.array([[x, y, 0.0] for x in xs for y in ys])
    faces = []
    for i in range(nx):
        for j in range(ny):
            v00 = i * (ny + 1) + j
            v10 = (i + 1) * (ny + 1) + j
            faces.append((v00, v10, v10 + 1, v00 + 1))
    return SurfaceMesh(verts + np.asarray(center, dtype=float), faces)


# ---------------------------------------------------------------------------
# boundary shape factor


def _pair_kernel(x, y, ny):
    """((x-y)/|x-y|) . n(y), broadcast over leading axes; 0 at coincidence."""
    u = x - y
    r = np.linalg.norm(u, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    val = np.einsum("...i,...i->...", u, ny) / safe
    return np.where(r > 0, val, 0.0)


def _children(tris):
    """Split each triangle of an (n, 3, 3) stack into 4 congruent children -> (n, 4, 3, 3)."""
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    m01, m12, m20 = 0.5 * (v0 + v1), 0.5 * (v1 + v2), 0.5 * (v2 + v0)
    return np.stack(
        [
            np.stack([v0, m01, m20], axis=1),
            np.stack([v1, m12, m01], axis=1),
            np.stack([v2, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    )


def _tri_areas(tris):
    return 0.5 * np.linalg.norm(
        np.cross(tris[..., 1, :] - tris[..., 0, :], tris[..., 2, :] - tris[..., 0, :]), axis=-1
    )


def _pair_batch_subdivided(tri_x, n_y, tri_y, same, depth: int = 1):
    """Vectorised double integrals of the direction kernel over panel pairs.

    Each pair's triangles are split into 4 congruent children; child pairs are
    integrated with 3-point rules.  For self pairs (``same``) the coincident
    children recurse; the kernel vanishes for coplanar x and y, so the deepest
    coincident level is dropped (exact on flat panels).
    """
    bary, w = _TRI_RULES[2]
    cx = _children(tri_x)
    cy = _children(tri_y)
    ax = _tri_areas(cx)
    ay = _tri_areas(cy)
    px = np.einsum("qb,ncbi->ncqi", bary, cx)
    py = np.einsum("qb,ncbi->ncqi", bary, cy)
    total = np.zeros(len(tri_x))
    for i in range(4):
        for j in range(4):
            vals = _pair_kernel(px[:, i, :, None, :], py[:, j, None, :, :], n_y[:, None, None, :])
            contrib = ax[:, i] * ay[:, j] * np.einsum("q,nqr,r->n", w, vals, w)
            if i == j:
                contrib = np.where(same, 0.0, contrib)
            total += contrib
    if depth > 0 and np.any(same):
        idx = np.nonzero(same)[0]
        sub_x = cx[idx].reshape(-1, 3, 3)
        sub_n = np.repeat(n_y[idx], 4, axis=0)
        rec = _pair_batch_subdivided(sub_x, sub_n, sub_x, np.ones(len(sub_x), bool), depth - 1)
        total[idx] += rec.reshape(len(idx), 4).sum(axis=1)
    return total


def boundary_shape_factor(mesh: SurfaceMesh, quad_order: int = 2, near_factor: float = 2.0) -> float:
    """Area-averaged double boundary integral of the chord-direction flux.

    Returns (1/|S|) Int_S Int_S ((x-y)/|x-y|) . n(y) ds(y) ds(x) by panel-pair
    quadrature: centroid rule in x, Gauss rule of ``quad_order`` in y.
    Same-panel and vertex-sharing pairs are re-integrated with 4-fold panel
    subdivision (the integrand is bounded by 1, so no true singularity;
    subdivision controls the near-diagonal error).  Negative for convex
    closed surfaces; -8*pi/3 for the unit sphere.
    """
    if quad_order < 1:
        raise GeometryError("quad_order must be >= 1")
    mesh.require_closed()
    tris, owner = mesh.triangulated()
    bary, w = tri_rule(quad_order)
    nq = len(w)
    ntri = len(tris)
    crosses = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    tri_areas = 0.5 * np.linalg.norm(crosses, axis=1)
    tri_normals = crosses / np.linalg.norm(crosses, axis=1)[:, None]
    centers = tris.mean(axis=1)

    ypts = np.einsum("qb,tbi->tqi", bary, tris).reshape(-1, 3)
    ywts = (tri_areas[:, None] * w[None, :]).reshape(-1)
    ynrm = np.repeat(tri_normals, nq, axis=0)
    yown = np.repeat(np.arange(ntri), nq)

    total = 0.0
    # (x-y).n(y)/|x-y| via two GEMMs: x.n(y) - y.n(y) over sqrt(|x|^2-2x.y+|y|^2)
    y_dot_n = np.einsum("mi,mi->m", ypts, ynrm)
    y_sq = np.einsum("mi,mi->m", ypts, ypts)
    x_sq = np.einsum("ti,ti->t", centers, centers)
    chunk = max(1, int(8e6) // max(len(ypts), 1))
    col_offsets = np.arange(nq)
    for start in range(0, ntri, chunk):
        stop = min(start + chunk, ntri)
        num = centers[start:stop] @ ynrm.T
        num -= y_dot_n[None, :]
        r2 = centers[start:stop] @ ypts.T
        r2 *= -2.0
        r2 += x_sq[start:stop, None]
        r2 += y_sq[None, :]
        np.maximum(r2, 1e-300, out=r2)
        np.sqrt(r2, out=r2)
        num /= r2
        # plain rule applies only across distinct panels; same-panel terms are
        # exactly zero on flat panels but masked anyway for clarity
        rows = np.arange(stop - start)
        num[rows[:, None], (np.arange(start, stop) * nq)[:, None] + col_offsets[None, :]] = 0.0
        total += float(tri_areas[start:stop] @ (num @ ywts))

    if near_factor > 0:
        radii = np.linalg.norm(tris - centers[:, None, :], axis=2).max(axis=1)
        owner_tris = {}
        for ti, p in enumerate(owner):
            owner_tris.setdefault(int(p), []).append(ti)
        near = set()
        for (p, q) in mesh.vertex_sharing_pairs():
            for ti in owner_tris[p]:
                for tj in owner_tris[q]:
                    near.add((ti, tj))
                    near.add((tj, ti))
        for members in owner_tris.values():
            for ti in members:
                for tj in members:
                    if ti != tj:
                        near.add((ti, tj))
        if near:
            pairs = np.array(sorted(near), dtype=int)
            a, b = pairs[:, 0], pairs[:, 1]
            keep = np.linalg.norm(centers[a] - centers[b], axis=1) <= near_factor * (
                radii[a] + radii[b]
            )
            a, b = a[keep], b[keep]
        else:
            a = b = np.zeros(0, dtype=int)
        # route self pairs through the same batch; they vanish on flat panels
        a = np.concatenate([a, np.arange(ntri)])
        b = np.concatenate([b, np.arange(ntri)])
        same = a == b
        # remove the plain-rule contribution (centroid x Gauss) of those pairs
        yp = np.einsum("qb,tbi->tqi", bary, tris[b])
        plain = tri_areas[a] * tri_areas[b] * np.einsum(
            "nq,q->n", _pair_kernel(centers[a][:, None, :], yp, tri_normals[b][:, None, :]), w
        )
        plain[same] = 0.0
        refined = _pair_batch_subdivided(tris[a], tri_normals[b], tris[b], same)
        total += float((refined - plain).sum())

    if not np.isfinite(total):
        raise GeometryError("shape-factor quadrature produced a non-finite value")
    return total / mesh.total_area
