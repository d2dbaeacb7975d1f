"""Posterior surfaces and distance-effect curves.

All summaries are sampling based: one shared draw set per call, so nonlinear
links and shared-component cancellations are handled exactly per draw.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import CoverageError, InvalidGeometryError
from .inference import FitResult, sample_posterior
from .meshing import basis_eval_1d
from .model import KIND_FIELD, KIND_LINEAR, KIND_SMOOTH

DEFAULT_GRID = 128


@dataclass
class SurfaceSummary:
    """Aligned mean / sd / credible-bound rasters for one posterior quantity."""

    mean: geometry.Raster
    sd: geometry.Raster
    lower: geometry.Raster
    upper: geometry.Raster
    quantity: str


@dataclass
class EffectCurve:
    distances: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def prediction_grid(sampler: geometry.Polygon, n: int = DEFAULT_GRID) -> geometry.Raster:
    """Default n x n raster over the sampler bounding box."""
    return geometry.raster_from_bounds(sampler.bounds(), n, n)


def _grid_draw_matrix(fit: FitResult, pattern: str, grid: geometry.Raster,
                      sampler: geometry.Polygon):
    """(cell centers, in-window mask, design matrix on covered cells)."""
    centers = grid.cell_centers()
    inside = geometry.points_in_polygon(centers, sampler)
    covered = fit.spec.mesh.locate(centers) >= 0
    if np.any(inside & ~covered):
        raise CoverageError("prediction cells inside the window escape the mesh")
    mask = inside & covered
    a = fit.spec.design_at(pattern, centers[mask])
    return centers, mask, a


def _pack(grid: geometry.Raster, mask, stats, quantity) -> SurfaceSummary:
    def raster_of(vec):
        full = np.full(grid.nrows * grid.ncols, grid.nodata)
        full[mask] = vec
        return grid.copy_like(full.reshape(grid.nrows, grid.ncols))

    mean, sd, lo, hi = stats
    return SurfaceSummary(
        mean=raster_of(mean), sd=raster_of(sd),
        lower=raster_of(lo), upper=raster_of(hi), quantity=quantity,
    )


def _summaries(values: np.ndarray):
    """values is (n_draws, n_cells)."""
    return (
        np.mean(values, axis=0),
        np.std(values, axis=0, ddof=1),
        np.quantile(values, 0.025, axis=0),
        np.quantile(values, 0.975, axis=0),
    )


def predict_intensity(fit: FitResult, pattern: str, grid: geometry.Raster = None,
                      n_samples: int = 1000, seed: int = 0,
                      log_scale: bool = False) -> SurfaceSummary:
    """Posterior summaries of the (log-)intensity surface of one pattern."""
    lik = next(l for l in fit.spec.likelihoods if l.name == pattern)
    if grid is None:
        grid = prediction_grid(lik.sampler)
    _, mask, a = _grid_draw_matrix(fit, pattern, grid, lik.sampler)
    draws = sample_posterior(fit, n_samples, seed=seed)
    eta = draws @ a.T
    values = eta if log_scale else np.exp(eta)
    tag = "log-intensity" if log_scale else "intensity"
    return _pack(grid, mask, _summaries(values), tag)


def log_relative_risk(fit: FitResult, case_pattern: str, control_pattern: str,
                      grid: geometry.Raster = None, n_samples: int = 1000,
                      seed: int = 0) -> SurfaceSummary:
    """log lambda_case - log lambda_control per draw; shared terms cancel."""
    case = next(l for l in fit.spec.likelihoods if l.name == case_pattern)
    if grid is None:
        grid = prediction_grid(case.sampler)
    _, mask, a_case = _grid_draw_matrix(fit, case_pattern, grid, case.sampler)
    centers = grid.cell_centers()
    inside = geometry.points_in_polygon(centers, case.sampler)
    covered = fit.spec.mesh.locate(centers) >= 0
    mask2 = inside & covered
    a_ctrl = fit.spec.design_at(control_pattern, centers[mask2])
    draws = sample_posterior(fit, n_samples, seed=seed)
    values = draws @ a_case.T - draws @ a_ctrl.T
    return _pack(grid, mask, _summaries(values), "log-relative-risk")


def exceedance(fit: FitResult, component: str, threshold: float,
               grid: geometry.Raster = None, n_samples: int = 1000,
               seed: int = 0, sampler: geometry.Polygon = None) -> SurfaceSummary:
    """Posterior probability that a field effect exceeds the threshold."""
    comp = fit.spec.component(component)
    if comp.kind != KIND_FIELD:
        raise InvalidGeometryError(f"{component!r} is not a spatial field")
    if sampler is None:
        sampler = fit.spec.likelihoods[0].sampler
    if grid is None:
        grid = prediction_grid(sampler)
    centers = grid.cell_centers()
    inside = geometry.points_in_polygon(centers, sampler)
    covered = fit.spec.mesh.locate(centers) >= 0
    if np.any(inside & ~covered):
        raise CoverageError("prediction cells inside the window escape the mesh")
    mask = inside & covered
    from .meshing import basis_eval

    a = basis_eval(fit.spec.mesh, centers[mask])
    draws = sample_posterior(fit, n_samples, seed=seed)
    effect = draws[:, fit.spec.block(component)] @ a.T
    prob = np.mean(effect > threshold, axis=0)
    zeros = np.zeros_like(prob)
    return _pack(grid, mask, (prob, zeros, prob, prob), "exceedance")


def effect_curve(fit: FitResult, component: str, distances,
                 n_samples: int = 1000, seed: int = 0) -> EffectCurve:
    """Posterior effect vs covariate value for linear and smooth terms."""
    comp = fit.spec.component(component)
    distances = np.asarray(distances, dtype=float)
    if np.any(np.diff(distances) <= 0):
        raise InvalidGeometryError("distance grid must be increasing")
    draws = sample_posterior(fit, n_samples, seed=seed)
    block = draws[:, fit.spec.block(component)]
    if comp.kind == KIND_LINEAR:
        values = block * distances[None, :]
    elif comp.kind == KIND_SMOOTH:
        basis = basis_eval_1d(comp.spde.mesh, distances).matrix
        values = block @ basis.T
    else:
        raise InvalidGeometryError(f"{component!r} has no covariate effect")
    mean, _, lo, hi = _summaries(values)
    return EffectCurve(distances=distances, mean=mean, lower=lo, upper=hi)


# ---------------------------------------------------------------------------
# Emission: ESRI grids, CSV curves, SVG quick-looks.


def write_surface(surface: SurfaceSummary, prefix) -> list:
    """One ASCII grid per statistic plus an SVG quick-look of the mean."""
    paths = []
    for stat in ("mean", "sd", "lower", "upper"):
        path = f"{prefix}_{stat}.asc"
        geometry.write_ascii_grid(getattr(surface, stat), path)
        paths.append(path)
    svg_path = f"{prefix}.svg"
    render_raster_svg(surface.mean, svg_path,
                      title=f"{surface.quantity} (posterior mean)")
    paths.append(svg_path)
    return paths


def write_curve(curve: EffectCurve, prefix) -> list:
    csv_path = f"{prefix}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["distance", "mean", "lower", "upper"])
        for row in zip(curve.distances, curve.mean, curve.lower, curve.upper):
            writer.writerow([repr(float(v)) for v in row])
    svg_path = f"{prefix}.svg"
    render_curve_svg(curve, svg_path)
    return [csv_path, svg_path]


def render_raster_svg(raster: geometry.Raster, path, title="") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    vals = np.ma.masked_equal(raster.values, raster.nodata)
    fig, ax = plt.subplots(figsize=(6, 5))
    x0, y0 = raster.origin
    extent = (x0, x0 + raster.ncols * raster.cellsize,
              y0, y0 + raster.nrows * raster.cellsize)
    im = ax.imshow(vals, origin="upper", extent=extent, cmap="viridis")
    fig.colorbar(im, ax=ax, label=f"min {vals.min():.3g} / max {vals.max():.3g}")
    ax.set_title(title)
    ax.set_xlabel("x (km)")
    ax.set_ylabel("y (km)")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def render_curve_svg(curve: EffectCurve, path, title="") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(curve.distances, curve.lower, curve.upper,
                    alpha=0.3, label="95% credible band")
    ax.plot(curve.distances, curve.mean, label="posterior mean")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("effect")
    ax.set_title(title)
    ax.legend()
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
