"""Model language: named components shared across point-pattern likelihoods.

All intercepts are explicit (there is no implicit default intercept).  The
Cox-process likelihood integrates the intensity with mesh-vertex nodes whose
weights are the barycentric dual cells clipped to the observation window, so
the node design matrix is the identity on spatial-field blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import shapely
import shapely.geometry as sgeom

from . import geometry
from .errors import CoverageError, DataError, InvalidGeometryError
from .meshing import Mesh2d, basis_eval, basis_eval_1d
from .spde import SpdeModel

log = logging.getLogger(__name__)

ETA_CLIP = 40.0  # overflow guard on the linear predictor
DEFAULT_FIXED_EFFECT_PRECISION = 1000.0

KIND_INTERCEPT = "intercept"
KIND_FIELD = "field"
KIND_LINEAR = "linear"
KIND_SMOOTH = "smooth"


@dataclass
class Component:
    """One named additive term of the log-intensity."""

    name: str
    kind: str
    spde: SpdeModel = None
    covariate: geometry.Raster = None
    prior_mean: float = 0.0
    prior_precision: float = 0.0

    @property
    def size(self) -> int:
        if self.kind in (KIND_INTERCEPT, KIND_LINEAR):
            return 1
        return self.spde.size

    @property
    def n_hyper(self) -> int:
        if self.kind in (KIND_FIELD, KIND_SMOOTH):
            return self.spde.n_hyper
        return 0

    @property
    def constrained(self) -> bool:
        return self.spde is not None and self.spde.constrain_sum_to_zero


def intercept(name: str) -> Component:
    """Improper flat prior (zero precision)."""
    return Component(name=name, kind=KIND_INTERCEPT)


def spatial_field(name: str, spde: SpdeModel) -> Component:
    return Component(name=name, kind=KIND_FIELD, spde=spde)


def linear_effect(name: str, covariate: geometry.Raster,
                  precision: float = DEFAULT_FIXED_EFFECT_PRECISION) -> Component:
    """beta * z(x) with a zero-mean Gaussian prior on beta."""
    return Component(name=name, kind=KIND_LINEAR, covariate=covariate,
                     prior_precision=precision)


def smooth_effect(name: str, covariate: geometry.Raster, spde: SpdeModel) -> Component:
    """1D SPDE / RW2 smooth over the covariate value."""
    return Component(name=name, kind=KIND_SMOOTH, covariate=covariate, spde=spde)


@dataclass
class LikelihoodDef:
    """One observed point pattern with its window and formula."""

    name: str
    points: np.ndarray
    sampler: geometry.Polygon
    formula: list

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)


@dataclass
class IntegrationScheme:
    nodes: np.ndarray
    weights: np.ndarray


def build_integration(mesh: Mesh2d, sampler: geometry.Polygon) -> IntegrationScheme:
    """Mesh-vertex nodes weighted by dual barycentric cells clipped to the window."""
    ring = sampler.exterior
    if np.any(mesh.locate(ring) < 0):
        raise CoverageError("sampler polygon escapes the mesh cover")
    weights = np.zeros(mesh.n_vertices)
    tri = mesh.triangles
    verts = mesh.vertices
    areas = mesh.triangle_areas()
    shapely.prepare(sampler.shape)
    tri_shapes = shapely.polygons(verts[tri])
    full = shapely.covers(sampler.shape, tri_shapes)
    empty = shapely.disjoint(sampler.shape, tri_shapes)
    np.add.at(weights, tri[full].ravel(), np.repeat(areas[full] / 3.0, 3))
    partial = np.nonzero(~full & ~empty)[0]
    for t in partial:
        a, b, c = verts[tri[t]]
        centroid = (a + b + c) / 3.0
        corners = [
            (tri[t, 0], a, b, c),
            (tri[t, 1], b, c, a),
            (tri[t, 2], c, a, b),
        ]
        for k, v, u, w in corners:
            quad = sgeom.Polygon([v, 0.5 * (v + u), centroid, 0.5 * (v + w)])
            weights[k] += quad.intersection(sampler.shape).area
    total = weights.sum()
    target = geometry.polygon_area(sampler)
    if abs(total - target) > 1e-6 * max(1.0, target):
        raise CoverageError(
            f"integration weights sum to {total}, expected {target}"
        )
    return IntegrationScheme(nodes=verts.copy(), weights=weights)


class ModelSpec:
    """Components plus likelihoods, with the latent-vector bookkeeping."""

    def __init__(self, components, likelihoods, mesh: Mesh2d):
        names = [c.name for c in components]
        if len(set(names)) != len(names):
            raise InvalidGeometryError("component names must be unique")
        if not likelihoods:
            raise InvalidGeometryError("at least one likelihood is required")
        by_name = dict(zip(names, components))
        for lik in likelihoods:
            for term in lik.formula:
                if term not in by_name:
                    raise InvalidGeometryError(
                        f"likelihood {lik.name!r} references unknown component {term!r}"
                    )
            inside = geometry.points_in_polygon(lik.points, lik.sampler)
            if not np.all(inside):
                bad = np.nonzero(~inside)[0]
                raise DataError(
                    f"{len(bad)} event(s) of pattern {lik.name!r} outside its window,"
                    f" first index {bad[0]}"
                )
        self.components = list(components)
        self.likelihoods = list(likelihoods)
        self.mesh = mesh
        self._by_name = by_name

        self.offsets = {}
        pos = 0
        for c in self.components:
            self.offsets[c.name] = pos
            pos += c.size
        self.latent_dim = pos

        self.hyper_layout = []
        for c in self.components:
            if c.n_hyper == 2:
                self.hyper_layout.append((c.name, "log_range"))
                self.hyper_layout.append((c.name, "log_sigma"))
            elif c.n_hyper == 1:
                self.hyper_layout.append((c.name, "log_sigma"))
        self.hyper_dim = len(self.hyper_layout)

        self._integration = {}
        for lik in self.likelihoods:
            key = id(lik.sampler)
            if key not in self._integration:
                self._integration[key] = build_integration(mesh, lik.sampler)
        self._design = [self._build_design(lik) for lik in self.likelihoods]

    def component(self, name: str) -> Component:
        return self._by_name[name]

    def block(self, name: str) -> slice:
        c = self._by_name[name]
        off = self.offsets[name]
        return slice(off, off + c.size)

    def integration(self, lik: LikelihoodDef) -> IntegrationScheme:
        return self._integration[id(lik.sampler)]

    # -- design matrices ---------------------------------------------------

    def _covariate_at(self, comp: Component, pts: np.ndarray):
        # Out-of-extent points (outer mesh extension beyond the covariate
        # raster) are treated as NODATA; they only matter where weights are 0.
        r = comp.covariate
        fx = (pts[:, 0] - r.origin[0]) / r.cellsize
        fy = (pts[:, 1] - r.origin[1]) / r.cellsize
        outside = (fx < 0) | (fx > r.ncols) | (fy < 0) | (fy > r.nrows)
        z = np.full(len(pts), r.nodata)
        if np.any(~outside):
            z[~outside] = geometry.raster_lookup(r, pts[~outside])
        return z, outside | (z == r.nodata)

    def _columns(self, comp: Component, pts: np.ndarray,
                 node_block: bool = False):
        """Design block of one component at the given points.

        ``node_block`` requests the integration-node block, which is the
        identity for 2D fields (nodes are the mesh vertices).  Returns
        (matrix, nodata_mask).
        """
        n = len(pts)
        if comp.kind == KIND_INTERCEPT:
            return sp.csr_matrix(np.ones((n, 1))), None
        if comp.kind == KIND_FIELD:
            if node_block:
                return sp.identity(comp.size, format="csr"), None
            return basis_eval(self.mesh, pts), None
        z, nodata = self._covariate_at(comp, pts)
        if comp.kind == KIND_LINEAR:
            vals = np.where(nodata, 0.0, z)
            return sp.csr_matrix(vals.reshape(-1, 1)), nodata
        vals = np.where(nodata, comp.spde.mesh.span[0], z)
        res = basis_eval_1d(comp.spde.mesh, vals)
        mat = res.matrix
        if np.any(nodata):
            mask = sp.diags((~nodata).astype(float))
            mat = (mask @ mat).tocsr()
        return mat, nodata

    def _build_design(self, lik: LikelihoodDef):
        scheme = self.integration(lik)
        w = scheme.weights.copy()
        ev_blocks, ip_blocks = [], []
        for comp in self.components:
            size = comp.size
            if comp.name in lik.formula:
                ev, ev_nodata = self._columns(comp, lik.points)
                ip, ip_nodata = self._columns(comp, scheme.nodes, node_block=True)
                if ev_nodata is not None and np.any(ev_nodata):
                    raise DataError(
                        f"covariate {comp.name!r} has NODATA under "
                        f"{int(np.sum(ev_nodata))} event(s) of {lik.name!r}"
                    )
                if ip_nodata is not None and np.any(ip_nodata & (w > 0)):
                    n_bad = int(np.sum(ip_nodata & (w > 0)))
                    log.warning(
                        "covariate %r: NODATA under %d integration node(s) of %r;"
                        " their weights are dropped", comp.name, n_bad, lik.name,
                    )
                    w = np.where(ip_nodata, 0.0, w)
            else:
                ev = sp.csr_matrix((len(lik.points), size))
                ip = sp.csr_matrix((len(scheme.nodes), size))
            ev_blocks.append(ev)
            ip_blocks.append(ip)
        a_ev = sp.hstack(ev_blocks, format="csr")
        a_ip = sp.hstack(ip_blocks, format="csr")
        return a_ev, a_ip, w

    def design(self, pattern: str):
        """(A_events, A_nodes, node weights) for one pattern."""
        for lik, d in zip(self.likelihoods, self._design):
            if lik.name == pattern:
                return d
        raise InvalidGeometryError(f"unknown pattern {pattern!r}")

    def design_at(self, pattern: str, pts) -> sp.csr_matrix:
        """Design matrix of a pattern's formula at arbitrary points."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        lik = next(l for l in self.likelihoods if l.name == pattern)
        blocks = []
        for comp in self.components:
            if comp.name in lik.formula:
                if comp.kind == KIND_FIELD:
                    blocks.append(basis_eval(self.mesh, pts))
                else:
                    mat, _ = self._columns(comp, pts)
                    blocks.append(mat)
            else:
                blocks.append(sp.csr_matrix((len(pts), comp.size)))
        return sp.hstack(blocks, format="csr")

    # -- likelihood --------------------------------------------------------

    def log_intensity(self, latent, pattern: str, pts) -> np.ndarray:
        a = self.design_at(pattern, pts)
        return np.asarray(a @ np.asarray(latent, dtype=float))

    def loglik(self, latent) -> float:
        x = np.asarray(latent, dtype=float)
        total = 0.0
        for a_ev, a_ip, w in self._design:
            eta_ev = a_ev @ x
            eta_ip = np.minimum(a_ip @ x, ETA_CLIP)
            total += float(np.sum(eta_ev) - w @ np.exp(eta_ip))
        return total

    def loglik_grad_hess(self, latent):
        """(gradient, negative Hessian) of the Cox log-likelihood."""
        x = np.asarray(latent, dtype=float)
        grad = np.zeros(self.latent_dim)
        neg_hess = sp.csr_matrix((self.latent_dim, self.latent_dim))
        for a_ev, a_ip, w in self._design:
            eta_ip = np.minimum(a_ip @ x, ETA_CLIP)
            mu = w * np.exp(eta_ip)
            grad += np.asarray(a_ev.sum(axis=0)).ravel() - a_ip.T @ mu
            neg_hess = neg_hess + a_ip.T @ sp.diags(mu) @ a_ip
        return grad, neg_hess.tocsr()

    # -- priors ------------------------------------------------------------

    def hyper_unpack(self, theta):
        """Per-component (range, sigma) on the natural scale."""
        theta = np.asarray(theta, dtype=float)
        out = {}
        i = 0
        for c in self.components:
            if c.n_hyper == 2:
                out[c.name] = (float(np.exp(theta[i])), float(np.exp(theta[i + 1])))
                i += 2
            elif c.n_hyper == 1:
                out[c.name] = (c.spde.prior.r0, float(np.exp(theta[i])))
                i += 1
        return out

    def hyper_init(self) -> np.ndarray:
        """Starting point for hyperparameter optimization (log scale)."""
        vals = []
        for c in self.components:
            if c.n_hyper == 2:
                vals.append(np.log(0.5 * c.spde.prior.r0))
                vals.append(np.log(0.5 * c.spde.prior.sigma0))
            elif c.n_hyper == 1:
                vals.append(np.log(0.5 * c.spde.prior.sigma0))
        return np.asarray(vals)

    def q_prior(self, theta):
        """(block-diagonal prior precision, list of proper blocks).

        Proper blocks are (slice, matrix) pairs whose log-determinants enter
        the evidence; flat intercept blocks are improper and excluded.
        """
        values = self.hyper_unpack(theta)
        blocks = []
        proper = []
        pos = 0
        for c in self.components:
            if c.kind == KIND_INTERCEPT:
                blocks.append(sp.csr_matrix(([c.prior_precision], ([0], [0])),
                                            shape=(1, 1)))
                if c.prior_precision > 0:
                    proper.append((slice(pos, pos + 1), blocks[-1]))
            elif c.kind == KIND_LINEAR:
                blocks.append(sp.csr_matrix(([c.prior_precision], ([0], [0])),
                                            shape=(1, 1)))
                if c.prior_precision > 0:
                    proper.append((slice(pos, pos + 1), blocks[-1]))
            else:
                r, sigma = values[c.name]
                q = c.spde.precision(r, sigma)
                blocks.append(q)
                proper.append((slice(pos, pos + c.size), q))
            pos += c.size
        return sp.block_diag(blocks, format="csc"), proper

    def hyper_logprior(self, theta) -> float:
        """log prior of theta = (log r, log sigma, ...), Jacobian included."""
        values = self.hyper_unpack(theta)
        total = 0.0
        for c in self.components:
            if c.n_hyper == 0:
                continue
            r, sigma = values[c.name]
            total += c.spde.hyper_logprior(r, sigma)
            total += np.log(sigma)  # d sigma / d log sigma
            if c.n_hyper == 2:
                total += np.log(r)
        return float(total)

    def constraint_matrix(self):
        """(A, e) stacking sum-to-zero rows of constrained components."""
        rows = []
        for c in self.components:
            if c.constrained:
                row = np.zeros(self.latent_dim)
                row[self.block(c.name)] = 1.0
                rows.append(row)
        if not rows:
            return None, None
        a = np.vstack(rows)
        return a, np.zeros(len(rows))
