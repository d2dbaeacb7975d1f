"""Triangulations and finite-element matrices.

2D meshes are built by Ruppert-style Delaunay refinement over two nested
regions: a fine inner region (the study boundary dilated by the first offset)
and a coarser outer band (dilated by the second offset).  1D meshes carry
B-spline bases for distance effects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import shapely
from scipy.interpolate import BSpline
from scipy.spatial import Delaunay, cKDTree

from . import geometry
from .errors import (
    AssemblyError,
    InvalidGeometryError,
    MeshRefinementError,
    PointNotCoveredError,
)

_MAX_ROUNDS = 60
_MAX_VERTICES = 150_000


def _cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass
class FemMatrices:
    """Lumped mass diagonal ``c``, stiffness ``g`` and ``g2 = g c^-1 g``."""

    c: np.ndarray
    g: sp.csr_matrix
    g2: sp.csr_matrix

    @property
    def size(self) -> int:
        return len(self.c)


@dataclass
class Mesh2d:
    """Triangulation with inner-domain / outer-extension vertex markers.

    ``triangles`` are positively oriented index triples into ``vertices``.
    ``inner_marker[k]`` is True when vertex k lies in the inner (fine) region.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    inner_marker: np.ndarray
    params: dict = field(default_factory=dict)
    boundary: geometry.Polygon = None
    inner_region: geometry.Polygon = None
    outer_region: geometry.Polygon = None
    _locator: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        self.inner_marker = np.asarray(self.inner_marker, dtype=bool)
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        cross = _cross2(b - a, c - a)
        flip = cross < 0
        if np.any(flip):
            tri = self.triangles.copy()
            tri[flip, 1], tri[flip, 2] = self.triangles[flip, 2], self.triangles[flip, 1]
            self.triangles = tri

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        return 0.5 * _cross2(b - a, c - a)

    def edge_lengths(self) -> np.ndarray:
        """(n_triangles, 3) edge lengths opposite each vertex."""
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        return np.column_stack([
            np.linalg.norm(c - b, axis=1),
            np.linalg.norm(a - c, axis=1),
            np.linalg.norm(b - a, axis=1),
        ])

    def min_angles(self) -> np.ndarray:
        """Minimum interior angle per triangle, degrees."""
        e = np.sort(self.edge_lengths(), axis=1)
        s, m, l = e[:, 0], e[:, 1], e[:, 2]
        cosv = np.clip((m**2 + l**2 - s**2) / (2 * m * l), -1.0, 1.0)
        return np.degrees(np.arccos(cosv))

    def _ensure_locator(self):
        if self._locator is None:
            tri_map = {}
            for i, t in enumerate(self.triangles):
                tri_map[tuple(sorted(t))] = i
            dela = Delaunay(self.vertices)
            simplex_to_tri = np.full(len(dela.simplices), -1, dtype=int)
            for i, s in enumerate(dela.simplices):
                simplex_to_tri[i] = tri_map.get(tuple(sorted(s)), -1)
            self._locator = (dela, simplex_to_tri)
        return self._locator

    def locate(self, pts) -> np.ndarray:
        """Containing-triangle index per point, -1 when not covered."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        dela, simplex_to_tri = self._ensure_locator()
        simplex = dela.find_simplex(pts)
        out = np.where(simplex >= 0, simplex_to_tri[simplex], -1)
        return out


@dataclass
class Mesh1d:
    """Sorted knot sequence carrying a degree-1 or degree-2 B-spline basis.

    The basis always has exactly ``len(knots)`` functions and both ends are
    free (no boundary condition pinning the value).
    """

    knots: np.ndarray
    degree: int = 1

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        if self.knots.ndim != 1 or len(self.knots) < 2:
            raise InvalidGeometryError("need at least 2 knots")
        if np.any(np.diff(self.knots) <= 0):
            raise InvalidGeometryError("knots must be strictly increasing")
        if self.degree not in (1, 2):
            raise InvalidGeometryError("degree must be 1 or 2")
        if len(self.knots) < self.degree + 1:
            raise InvalidGeometryError("too few knots for the requested degree")

    @property
    def n_basis(self) -> int:
        return len(self.knots)

    @property
    def span(self):
        return float(self.knots[0]), float(self.knots[-1])

    def breakpoints(self) -> np.ndarray:
        if self.degree == 1:
            return self.knots
        # Degree 2: one fewer breakpoint so the clamped basis has exactly
        # n_knots functions.
        return np.linspace(self.knots[0], self.knots[-1], len(self.knots) - 1)

    def knot_vector(self) -> np.ndarray:
        b = self.breakpoints()
        k = self.degree
        return np.concatenate([np.repeat(b[0], k), b, np.repeat(b[-1], k)])


def build_mesh_1d(start: float, stop: float, n_knots: int, degree: int = 1) -> Mesh1d:
    """Equally spaced 1D mesh from ``start`` to ``stop`` inclusive."""
    if not stop > start:
        raise InvalidGeometryError(f"invalid range [{start}, {stop}]")
    if n_knots < 2:
        raise InvalidGeometryError("n_knots must be at least 2")
    return Mesh1d(np.linspace(start, stop, n_knots), degree=degree)


@dataclass
class Basis1dResult:
    matrix: sp.csr_matrix
    clamped: np.ndarray

    @property
    def any_clamped(self) -> bool:
        return bool(np.any(self.clamped))


def basis_eval_1d(mesh: Mesh1d, values) -> Basis1dResult:
    """B-spline basis weights per value; rows sum to 1.

    Out-of-range values are clamped to the knot span and flagged, since
    prediction rasters may slightly exceed the observed distance range.
    """
    values = np.asarray(values, dtype=float).ravel()
    lo, hi = mesh.span
    clamped = (values < lo) | (values > hi)
    x = np.clip(values, lo, hi)
    t = mesh.knot_vector()
    order = np.argsort(x, kind="stable")
    mat = BSpline.design_matrix(x[order], t, mesh.degree)
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    return Basis1dResult(matrix=mat[inv].tocsr(), clamped=clamped)


# ---------------------------------------------------------------------------
# 2D mesh construction


def _densify_ring(ring: np.ndarray, spacing: float) -> np.ndarray:
    """Points along a closed ring with arc spacing at most ``spacing``."""
    pts = []
    n = len(ring)
    for i in range(n):
        a = ring[i]
        b = ring[(i + 1) % n]
        seg = np.linalg.norm(b - a)
        k = max(1, int(np.ceil(seg / spacing)))
        for j in range(k):
            pts.append(a + (b - a) * (j / k))
    return np.asarray(pts)


def _merge_close(points: np.ndarray, cutoff: float) -> np.ndarray:
    """Greedy thinning: keep each point at least ``cutoff`` from kept ones."""
    kept = []
    tree = None
    arr = np.empty((0, 2))
    for p in points:
        if len(kept) == 0:
            kept.append(p)
            continue
        if tree is None or len(kept) != tree.n:
            arr = np.asarray(kept)
            tree = cKDTree(arr)
        d, _ = tree.query(p)
        if d >= cutoff:
            kept.append(p)
    return np.asarray(kept)


def _hull_subsegments(points: np.ndarray, hull_edges: np.ndarray):
    """Diametral midpoints/radii of hull edges split at collinear vertices."""
    mids, rads = [], []
    for i, j in hull_edges:
        p, q = points[i], points[j]
        d = q - p
        length = float(np.linalg.norm(d))
        if length <= 0:
            continue
        u = d / length
        rel = points - p
        t = rel @ u
        off = np.abs(rel[:, 0] * u[1] - rel[:, 1] * u[0])
        on = (off < 1e-9) & (t > 1e-9) & (t < length - 1e-9)
        knots = np.concatenate([[0.0], np.sort(t[on]), [length]])
        for t0, t1 in zip(knots[:-1], knots[1:]):
            mids.append(p + u * (0.5 * (t0 + t1)))
            rads.append(0.5 * (t1 - t0))
    if not mids:
        return np.empty((0, 2)), np.empty(0)
    return np.asarray(mids), np.asarray(rads)


def _circumcenters(a, b, c):
    """Circumcenters of triangles given vertex arrays (n, 2)."""
    d = 2 * ((a[:, 0] - c[:, 0]) * (b[:, 1] - c[:, 1])
             - (b[:, 0] - c[:, 0]) * (a[:, 1] - c[:, 1]))
    d = np.where(np.abs(d) < 1e-300, np.nan, d)
    a2 = np.sum((a - c) ** 2, axis=1)
    b2 = np.sum((b - c) ** 2, axis=1)
    ux = c[:, 0] + (a2 * (b[:, 1] - c[:, 1]) - b2 * (a[:, 1] - c[:, 1])) / d
    uy = c[:, 1] + (b2 * (a[:, 0] - c[:, 0]) - a2 * (b[:, 0] - c[:, 0])) / d
    return np.column_stack([ux, uy])


def _covers_xy(poly: geometry.Polygon, pts: np.ndarray) -> np.ndarray:
    shapely.prepare(poly.shape)
    return shapely.covers(poly.shape, shapely.points(pts[:, 0], pts[:, 1]))


def build_mesh_2d(
    boundary: geometry.Polygon,
    cutoff: float,
    max_edge,
    min_angle: float = 21.0,
    offset=(0.5, 2.0),
    n_initial=(16, 16),
) -> Mesh2d:
    """Refined triangulation of the boundary plus an outer extension band.

    ``cutoff`` is the minimum seed-point spacing; during size-driven splits
    the effective vertex-distance floor is min(cutoff, max_edge/2) for the
    local region, since the two requirements cannot both hold otherwise.
    """
    max_edge = (float(max_edge[0]), float(max_edge[1]))
    offset = (float(offset[0]), float(offset[1]))
    if cutoff <= 0:
        raise InvalidGeometryError("cutoff must be positive")
    if max_edge[0] > max_edge[1]:
        raise InvalidGeometryError("inner max_edge must not exceed outer")
    if not 0 < min_angle < 34:
        raise InvalidGeometryError("min_angle must be in (0, 34) degrees")
    if not 0 < offset[0] <= offset[1]:
        raise InvalidGeometryError("offsets must be positive and ordered")

    inner_poly = geometry.dilate(boundary, offset[0])
    # Convex outer extension: a concave far boundary would force sliver
    # triangles between Delaunay hull chords and the ring, which no interior
    # insertion can repair at the requested angle bound.
    hull = geometry.dilate(boundary, offset[1]).shape.convex_hull
    outer_poly = geometry.Polygon(np.asarray(hull.exterior.coords)[:-1])

    def ring_seeds(poly, n_init, edge_cap):
        ring = poly.exterior
        per = float(poly.shape.exterior.length)
        spacing = min(edge_cap, per / max(n_init, 3))
        spacing = max(spacing, cutoff)
        return _densify_ring(ring, spacing)

    seeds = np.vstack([
        ring_seeds(boundary, n_initial[0], max_edge[0]),
        ring_seeds(inner_poly, n_initial[0], max_edge[0]),
        ring_seeds(outer_poly, n_initial[1], max_edge[1]),
    ])
    points = _merge_close(seeds, cutoff)
    if len(points) < 3:
        raise InvalidGeometryError("boundary too small for the requested cutoff")

    # cutoff > max_edge is over-constrained (an edge can never be shorter
    # than the spacing of its endpoints), so the spacing request dominates:
    # the effective size target is max(max_edge, cutoff) per region.  This
    # also makes the vertex count decrease when the cutoff is coarsened,
    # which is what an interactive mesh-design loop expects.
    eff_edge = (max(max_edge[0], cutoff), max(max_edge[1], cutoff))
    floors = (min(cutoff, 0.5 * eff_edge[0]), min(cutoff, 0.5 * eff_edge[1]))

    for round_no in range(_MAX_ROUNDS):
        dela = Delaunay(points)
        tri = dela.simplices
        a, b, c = points[tri[:, 0]], points[tri[:, 1]], points[tri[:, 2]]
        centroids = (a + b + c) / 3.0
        kept = _covers_xy(outer_poly, centroids)
        # Zero-area slivers from collinear boundary points carry no region.
        kept &= np.abs(_cross2(b - a, c - a)) > 1e-10

        ka, kb, kc = a[kept], b[kept], c[kept]
        edges = np.column_stack([
            np.linalg.norm(kc - kb, axis=1),
            np.linalg.norm(ka - kc, axis=1),
            np.linalg.norm(kb - ka, axis=1),
        ])
        e_sorted = np.sort(edges, axis=1)
        s, m, l = e_sorted[:, 0], e_sorted[:, 1], e_sorted[:, 2]
        cosv = np.clip((m**2 + l**2 - s**2) / (2 * m * l), -1.0, 1.0)
        minang = np.degrees(np.arccos(cosv))
        kcent = centroids[kept]
        is_inner = _covers_xy(inner_poly, kcent)
        limit = np.where(is_inner, eff_edge[0], eff_edge[1])
        floor = np.where(is_inner, floors[0], floors[1])

        angle_bad = minang < min_angle - 1e-12
        size_bad = l > limit * (1 + 1e-12)
        bad = angle_bad | size_bad
        if not np.any(bad):
            break

        cc = _circumcenters(ka[bad], kb[bad], kc[bad])
        # Fall back to the longest-edge midpoint when the circumcenter
        # escapes the domain (boundary encroachment).
        verts_bad = np.stack([ka[bad], kb[bad], kc[bad]], axis=1)
        longest_idx = np.argmax(
            np.column_stack([
                np.linalg.norm(verts_bad[:, 2] - verts_bad[:, 1], axis=1),
                np.linalg.norm(verts_bad[:, 0] - verts_bad[:, 2], axis=1),
                np.linalg.norm(verts_bad[:, 1] - verts_bad[:, 0], axis=1),
            ]),
            axis=1,
        )
        p1 = verts_bad[np.arange(len(verts_bad)), (longest_idx + 1) % 3]
        p2 = verts_bad[np.arange(len(verts_bad)), (longest_idx + 2) % 3]
        midpoints = 0.5 * (p1 + p2)
        invalid_cc = ~np.isfinite(cc).all(axis=1)
        inside_cc = np.zeros(len(cc), dtype=bool)
        ok = ~invalid_cc
        if np.any(ok):
            inside_cc[ok] = _covers_xy(outer_poly, cc[ok])
        use_cc = inside_cc & ~invalid_cc
        primary = np.where(use_cc[:, None], cc, midpoints)
        # Insertion radius: distance from the candidate to the vertices of
        # its own triangle (circumradius for circumcenters, half the longest
        # edge for midpoints).
        half_l = 0.5 * l[bad]
        prim_r = half_l.copy()
        if np.any(use_cc):
            prim_r[use_cc] = np.linalg.norm(cc[use_cc] - ka[bad][use_cc], axis=1)
        bad_floor = floor[bad]

        # Ruppert encroachment rule on the mesh hull: a candidate inside the
        # diametral circle of a hull boundary segment would wedge a sliver
        # between itself and that segment which no later insertion can
        # repair.  Split the segment at its midpoint instead.  qhull reports
        # hull edges between extreme vertices only, so subdivide each by the
        # collinear points already inserted on it.
        h_mid, h_rad = _hull_subsegments(points, dela.convex_hull)

        def redirect(cand, radius):
            if not len(h_mid):
                return cand, radius
            cand = cand.copy()
            radius = radius.copy()
            d2 = ((cand[:, None, :] - h_mid[None, :, :]) ** 2).sum(axis=2)
            pen = d2 - (h_rad[None, :] * (1 - 1e-9)) ** 2
            worst = np.argmin(pen, axis=1)
            enc = pen[np.arange(len(cand)), worst] < 0
            cand[enc] = h_mid[worst[enc]]
            radius[enc] = h_rad[worst[enc]]
            return cand, radius

        # Deterministic priority: worst angle first, then longest edge.
        order = np.lexsort((np.arange(len(primary)), -l[bad], minang[bad]))
        is_angle = angle_bad[bad][order]
        primary, prim_r = redirect(primary[order], prim_r[order])
        secondary, sec_r = redirect(midpoints[order], half_l[order])
        bad_floor = bad_floor[order]

        def floor_of(radius):
            # The region floor gates size-driven splits.  Angle-driven
            # (quality) splits must not be blocked by it or refinement
            # deadlocks where a coarse-floor region abuts fine geometry;
            # their spacing is instead bounded by the insertion radius,
            # which Ruppert's argument keeps at the local feature scale.
            return np.where(is_angle, np.minimum(bad_floor, 0.8 * radius),
                            bad_floor)

        tree = cKDTree(points)
        cand = primary
        cand_floor = floor_of(prim_r)
        sel = tree.query(cand)[0] >= cand_floor
        # Second chance for floor-blocked circumcenters: the longest-edge
        # midpoint sits inside the triangle's own spacing pattern.
        retry = ~sel
        cand[retry] = secondary[retry]
        sec_floor = floor_of(sec_r)
        cand_floor[retry] = sec_floor[retry]
        sel |= retry & (tree.query(secondary)[0] >= sec_floor)
        if not np.any(sel):
            # Deadlock: every candidate sits within the spacing floor of an
            # existing vertex.  Relax the floor for this round only so the
            # remaining bad triangles can still be split.
            cand_floor = 0.5 * cand_floor
            sel = tree.query(cand)[0] >= cand_floor
        cand = cand[sel]
        cand_floor = cand_floor[sel]

        accepted = np.ones(len(cand), dtype=bool)
        if len(cand) > 1:
            ctree = cKDTree(cand)
            for i, j in sorted(ctree.query_pairs(float(np.max(cand_floor, initial=0.0)))):
                if accepted[i] and accepted[j]:
                    if np.linalg.norm(cand[i] - cand[j]) < max(cand_floor[i], cand_floor[j]):
                        accepted[j] = False
        new_points = cand[accepted]
        if len(new_points) == 0:
            raise MeshRefinementError(
                "refinement stalled with bad triangles remaining",
                diagnostics={
                    "round": round_no,
                    "n_vertices": len(points),
                    "n_bad": int(np.sum(bad)),
                    "worst_angle": float(np.min(minang)),
                },
            )
        points = np.vstack([points, new_points])
        if len(points) > _MAX_VERTICES:
            raise MeshRefinementError(
                "vertex budget exceeded",
                diagnostics={"round": round_no, "n_vertices": len(points)},
            )
    else:
        raise MeshRefinementError(
            "refinement did not terminate",
            diagnostics={"rounds": _MAX_ROUNDS, "n_vertices": len(points)},
        )

    triangles = tri[kept]
    # Drop vertices that ended up in no kept triangle (possible in deep
    # concavities of the outer band).
    used = np.zeros(len(points), dtype=bool)
    used[triangles.ravel()] = True
    if not np.all(used):
        remap = -np.ones(len(points), dtype=int)
        remap[used] = np.arange(int(np.sum(used)))
        points = points[used]
        triangles = remap[triangles]

    markers = _covers_xy(inner_poly, points)
    params = {
        "cutoff": cutoff,
        "max_edge": list(max_edge),
        "min_angle": min_angle,
        "offset": list(offset),
        "n_initial": list(n_initial),
    }
    return Mesh2d(
        vertices=points,
        triangles=triangles,
        inner_marker=markers,
        params=params,
        boundary=boundary,
        inner_region=inner_poly,
        outer_region=outer_poly,
    )


def basis_eval(mesh: Mesh2d, pts) -> sp.csr_matrix:
    """Piecewise-linear basis weights: barycentric coordinates per point."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    tri_idx = mesh.locate(pts)
    missing = np.nonzero(tri_idx < 0)[0]
    if len(missing) > 0:
        raise PointNotCoveredError(
            f"{len(missing)} point(s) outside mesh cover, first index {missing[0]}",
            indices=missing,
        )
    tri = mesh.triangles[tri_idx]
    a = mesh.vertices[tri[:, 0]]
    b = mesh.vertices[tri[:, 1]]
    c = mesh.vertices[tri[:, 2]]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) \
        - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
    w1 = ((pts[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
          - (c[:, 0] - a[:, 0]) * (pts[:, 1] - a[:, 1])) / det
    w2 = ((b[:, 0] - a[:, 0]) * (pts[:, 1] - a[:, 1])
          - (pts[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])) / det
    w0 = 1.0 - w1 - w2
    weights = np.column_stack([w0, w1, w2])
    weights = np.clip(weights, 0.0, 1.0)
    weights /= weights.sum(axis=1, keepdims=True)
    rows = np.repeat(np.arange(len(pts)), 3)
    cols = tri.ravel()
    mat = sp.coo_matrix(
        (weights.ravel(), (rows, cols)), shape=(len(pts), mesh.n_vertices)
    )
    return mat.tocsr()


def assemble_fem(mesh: Mesh2d) -> FemMatrices:
    """Lumped mass, stiffness and G C^-1 G for the linear basis."""
    areas = mesh.triangle_areas()
    if np.any(areas <= 1e-14):
        raise AssemblyError("degenerate (zero-area) triangle in mesh")
    n = mesh.n_vertices
    tri = mesh.triangles
    a, b, c = (mesh.vertices[tri[:, i]] for i in range(3))
    # Gradient coefficients of the linear basis on each triangle.
    bvec = np.stack([b[:, 1] - c[:, 1], c[:, 1] - a[:, 1], a[:, 1] - b[:, 1]], axis=1)
    cvec = np.stack([c[:, 0] - b[:, 0], a[:, 0] - c[:, 0], b[:, 0] - a[:, 0]], axis=1)
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(tri[:, i])
            cols.append(tri[:, j])
            vals.append((bvec[:, i] * bvec[:, j] + cvec[:, i] * cvec[:, j]) / (4 * areas))
    g = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    cdiag = np.zeros(n)
    np.add.at(cdiag, tri.ravel(), np.repeat(areas / 3.0, 3))
    if np.any(cdiag <= 0):
        raise AssemblyError("vertex with empty support; mesh is inconsistent")
    g2 = (g.multiply(1.0 / cdiag[np.newaxis, :])) @ g
    return FemMatrices(c=cdiag, g=g, g2=g2.tocsr())


def fem_1d(mesh: Mesh1d) -> FemMatrices:
    """1D analogue of :func:`assemble_fem` via Gauss quadrature."""
    t = mesh.knot_vector()
    k = mesh.degree
    m = mesh.n_basis
    bp = mesh.breakpoints()
    splines = [BSpline(t, np.eye(m)[i], k, extrapolate=False) for i in range(m)]
    dsplines = [s.derivative() for s in splines]
    xg, wg = np.polynomial.legendre.leggauss(4)
    cdiag = np.zeros(m)
    g = np.zeros((m, m))
    for e in range(len(bp) - 1):
        lo, hi = bp[e], bp[e + 1]
        xs = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
        ws = 0.5 * (hi - lo) * wg
        vals = np.array([np.nan_to_num(s(xs)) for s in splines])
        dvals = np.array([np.nan_to_num(d(xs)) for d in dsplines])
        cdiag += vals @ ws
        g += (dvals * ws) @ dvals.T
    g = sp.csr_matrix(np.where(np.abs(g) < 1e-13, 0.0, g))
    g2 = (g.multiply(1.0 / cdiag[np.newaxis, :])) @ g
    return FemMatrices(c=cdiag, g=g, g2=g2.tocsr())


# ---------------------------------------------------------------------------
# Serialization: MESH2D v1 plain-text format.


def write_mesh(mesh: Mesh2d, path) -> None:
    with open(path, "w") as fh:
        fh.write("MESH2D v1\n")
        fh.write(f"VERTICES {mesh.n_vertices}\n")
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r}\n")
        fh.write(f"TRIANGLES {mesh.n_triangles}\n")
        for t in mesh.triangles:
            fh.write(f"{t[0]} {t[1]} {t[2]}\n")
        fh.write(f"MARKERS {mesh.n_vertices}\n")
        fh.write(" ".join("1" if x else "0" for x in mesh.inner_marker) + "\n")


def read_mesh(path) -> Mesh2d:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "MESH2D v1":
            raise InvalidGeometryError(f"unsupported mesh format: {header!r}")
        tag, n = fh.readline().split()
        assert tag == "VERTICES"
        vertices = np.array(
            [[float(v) for v in fh.readline().split()] for _ in range(int(n))]
        )
        tag, n = fh.readline().split()
        assert tag == "TRIANGLES"
        triangles = np.array(
            [[int(v) for v in fh.readline().split()] for _ in range(int(n))]
        )
        tag, n = fh.readline().split()
        assert tag == "MARKERS"
        markers = np.array([v == "1" for v in fh.readline().split()])
    return Mesh2d(vertices=vertices, triangles=triangles, inner_marker=markers)
