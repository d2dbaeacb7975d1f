"""LGCP simulation: field sampling, Lewis-Shedler thinning, cluster injection.

All randomness flows through the counter-based Philox generator so scenarios
reproduce bit-identically across platforms for a fixed seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import DataError, LgcpError
from .inference import SymFactor
from .meshing import Mesh2d, basis_eval
from .spde import SpdeModel

LAMBDA_GRID = 256  # resolution of the intensity-bound search grid
LAMBDA_HEADROOM = 1.05


@dataclass
class SimScenario:
    """One simulation setup: window, baseline, optional field and cluster."""

    sampler: geometry.Polygon
    intercept: float = 0.0
    field_range: float = None
    field_sigma: float = None
    cluster_source: tuple = None
    cluster_n: int = 0
    cluster_sd: float = 0.5
    seed: int = 0

    @property
    def has_field(self) -> bool:
        return self.field_range is not None and self.field_sigma is not None


def sample_field(spde: SpdeModel, r: float, sigma: float, seed: int) -> np.ndarray:
    """One draw of the mesh-vertex weights with precision Q(r, sigma)."""
    rng = np.random.Generator(np.random.Philox([seed, 7]))
    q = spde.precision(r, sigma)
    f = SymFactor(q.tocsc())
    return f.sample(rng.standard_normal(q.shape[0]))


def simulate_lgcp(scn: SimScenario, mesh: Mesh2d, spde: SpdeModel = None) -> np.ndarray:
    """Point pattern from the scenario via thinning of a dominating process."""
    rng = np.random.Generator(np.random.Philox([scn.seed, 11]))
    w = None
    if scn.has_field:
        if spde is None:
            raise DataError("a field scenario needs the SPDE model for its mesh")
        w = sample_field(spde, scn.field_range, scn.field_sigma, scn.seed)

    def log_intensity(pts):
        eta = np.full(len(pts), scn.intercept)
        if w is not None:
            eta = eta + basis_eval(mesh, pts) @ w
        return eta

    xmin, ymin, xmax, ymax = scn.sampler.bounds()
    gx = np.linspace(xmin, xmax, LAMBDA_GRID)
    gy = np.linspace(ymin, ymax, LAMBDA_GRID)
    xx, yy = np.meshgrid(gx, gy)
    grid = np.column_stack([xx.ravel(), yy.ravel()])
    covered = mesh.locate(grid) >= 0
    eta_max = float(np.max(log_intensity(grid[covered])))
    if eta_max > 600:
        raise LgcpError("intensity bound overflows; rescale the scenario")
    lam_max = np.exp(eta_max) * LAMBDA_HEADROOM

    bbox_area = (xmax - xmin) * (ymax - ymin)
    n_prop = rng.poisson(lam_max * bbox_area)
    if n_prop == 0:
        return np.zeros((0, 2))
    props = np.column_stack([
        rng.uniform(xmin, xmax, n_prop),
        rng.uniform(ymin, ymax, n_prop),
    ])
    inside = geometry.points_in_polygon(props, scn.sampler)
    props = props[inside]
    u = rng.uniform(size=n_prop)[inside]
    keep = u < np.exp(log_intensity(props)) / lam_max
    return props[keep]


def inject_cluster(points, source, n: int, sd: float,
                   sampler: geometry.Polygon, seed: int = 0,
                   max_tries: int = 100) -> np.ndarray:
    """Append n Gaussian-perturbed copies of the source location.

    Each coordinate gets an independent N(0, sd^2) offset; points landing
    outside the window are redrawn (documented choice, capped per point).
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if n == 0:
        return points
    rng = np.random.Generator(np.random.Philox([seed, 13]))
    sx, sy = float(source[0]), float(source[1])
    new = []
    for _ in range(n):
        for _try in range(max_tries):
            p = (sx + rng.normal(0.0, sd), sy + rng.normal(0.0, sd))
            if geometry.point_in_polygon(p, sampler):
                new.append(p)
                break
        else:
            raise LgcpError(
                f"cluster rejection cap exceeded; source {source} is too far "
                "outside the window"
            )
    return np.vstack([points, np.asarray(new)])


def write_patterns_csv(path, patterns: dict) -> None:
    """Patterns as `x,y,pattern` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "pattern"])
        for name, pts in patterns.items():
            for x, y in np.asarray(pts, dtype=float).reshape(-1, 2):
                writer.writerow([repr(float(x)), repr(float(y)), name])


def read_pattern_csv(path) -> np.ndarray:
    """(n, 2) points from a two-column `x,y` CSV (header optional)."""
    pts = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "x"):
                continue
            try:
                pts.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}: malformed row at line {lineno}") from exc
    return np.asarray(pts, dtype=float).reshape(-1, 2)
