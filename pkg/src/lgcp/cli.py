"""Declarative pipeline driver: ingest, mesh, fit, predict, simulate, serve.

The run configuration is a TOML file (grammar in ``docs/config.md``); the
model choice is a closed menu mirroring the case-control workflow: two
baseline intensities, shared and specific spatial fields, and three forms of
distance-to-source exposure effect.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import json
import logging
import os
import pathlib
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click
import numpy as np

from . import geometry, inference, meshing, model, predict, simulate, spde
from .errors import ConfigError, DataError, LgcpError

log = logging.getLogger("lgcp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

MODEL_KINDS = (
    "univariate",
    "shared-only",
    "shared+specific",
    "+linear-dist",
    "+spde1d-dist",
    "+rw2-dist",
)

DIST_KINDS = ("+linear-dist", "+spde1d-dist", "+rw2-dist")


def fixtures_dir() -> pathlib.Path:
    return pathlib.Path(importlib.resources.files("lgcp") / "fixtures")


def fixture_path(name: str) -> pathlib.Path:
    path = fixtures_dir() / name
    if not path.exists():
        raise ConfigError(f"unknown bundled fixture {name!r}")
    return path


def _resolve(path: str, base: pathlib.Path) -> pathlib.Path:
    if path.startswith("fixture:"):
        return fixture_path(path.split(":", 1)[1])
    p = pathlib.Path(path)
    return p if p.is_absolute() else base / p


@dataclasses.dataclass
class PriorConfig:
    field_range: tuple = (10.0, 0.99)
    field_sigma: tuple = (1.0, 0.01)
    dist1d_range: tuple = (2.0, 0.99)
    dist1d_sigma: tuple = (1.0, 0.01)
    rw2_fixed_range: float = 10.0
    rw2_sigma: tuple = (1.0, 0.01)
    beta_precision: float = 1000.0


@dataclasses.dataclass
class RunConfig:
    """Validated run description; all paths resolved to absolute."""

    controls: pathlib.Path
    cases: pathlib.Path
    boundary: pathlib.Path
    source: tuple  # (x, y) or None
    cutoff: float = 0.4
    max_edge: tuple = (0.6, 1.2)
    min_angle: float = 27.0
    offset: tuple = (0.5, 2.0)
    n_initial: tuple = (16, 16)
    mesh1d_knots: int = 20
    mesh1d_degree: int = 2
    mesh1d_to: float = None  # default: ceiling of max source distance
    model_kind: str = "shared+specific"
    priors: PriorConfig = dataclasses.field(default_factory=PriorConfig)
    strategy: str = "eb"
    seed: int = 0
    n_samples: int = 1000
    max_eval: int = 250
    out_dir: pathlib.Path = pathlib.Path("out")
    simulate: dict = None


def _pair(raw, name, types=float):
    try:
        a, b = raw
        return (types(a), types(b))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a pair, got {raw!r}") from exc


def _prob_pair(raw, name):
    value, prob = _pair(raw, name)
    if not 0 < prob < 1:
        raise ConfigError(f"{name}: probability {prob} outside (0, 1)")
    if value <= 0:
        raise ConfigError(f"{name}: scale {value} must be positive")
    return (value, prob)


def load_config(path, seed=None, out=None) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    path = pathlib.Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    base = path.parent.resolve()
    data = raw.get("data", {})
    for key in ("controls", "cases", "boundary"):
        if key not in data:
            raise ConfigError(f"[data] section missing {key!r}")

    source = None
    if "source" in data:
        src = data["source"]
        if isinstance(src, str):
            with open(_resolve(src, base)) as fh:
                obj = json.load(fh)
            source = (float(obj["x"]), float(obj["y"]))
        else:
            source = _pair(src, "data.source")

    mesh = raw.get("mesh", {})
    mesh1d = raw.get("mesh1d", {})
    mdl = raw.get("model", {})
    kind = mdl.get("kind", "shared+specific")
    if kind not in MODEL_KINDS:
        raise ConfigError(
            f"model.kind {kind!r} not in menu {', '.join(MODEL_KINDS)}")
    if kind in DIST_KINDS and source is None:
        raise ConfigError(f"model.kind {kind!r} needs data.source")

    pri = raw.get("priors", {})
    priors = PriorConfig()
    if "field" in pri:
        f = pri["field"]
        if "range" in f:
            priors.field_range = _prob_pair(f["range"], "priors.field.range")
        if "sigma" in f:
            priors.field_sigma = _prob_pair(f["sigma"], "priors.field.sigma")
    if "dist1d" in pri:
        f = pri["dist1d"]
        if "range" in f:
            priors.dist1d_range = _prob_pair(f["range"], "priors.dist1d.range")
        if "sigma" in f:
            priors.dist1d_sigma = _prob_pair(f["sigma"], "priors.dist1d.sigma")
    if "rw2" in pri:
        f = pri["rw2"]
        if "sigma" in f:
            priors.rw2_sigma = _prob_pair(f["sigma"], "priors.rw2.sigma")
        if "fixed_range" in f:
            priors.rw2_fixed_range = float(f["fixed_range"])
    if "beta" in pri and "precision" in pri["beta"]:
        priors.beta_precision = float(pri["beta"]["precision"])
        if priors.beta_precision <= 0:
            raise ConfigError("priors.beta.precision must be positive")

    inf = raw.get("inference", {})
    strategy = inf.get("strategy", "eb")
    if strategy not in ("eb", "grid"):
        raise ConfigError(f"inference.strategy {strategy!r} not eb|grid")

    out_dir = raw.get("output", {}).get("directory", "out")

    cfg = RunConfig(
        controls=_resolve(data["controls"], base),
        cases=_resolve(data["cases"], base),
        boundary=_resolve(data["boundary"], base),
        source=source,
        cutoff=float(mesh.get("cutoff", 0.4)),
        max_edge=_pair(mesh.get("max_edge", (0.6, 1.2)), "mesh.max_edge"),
        min_angle=float(mesh.get("min_angle", 27.0)),
        offset=_pair(mesh.get("offset", (0.5, 2.0)), "mesh.offset"),
        n_initial=_pair(mesh.get("n_initial", (16, 16)), "mesh.n_initial", int),
        mesh1d_knots=int(mesh1d.get("n_knots", 20)),
        mesh1d_degree=int(mesh1d.get("degree", 2)),
        mesh1d_to=float(mesh1d["to"]) if "to" in mesh1d else None,
        model_kind=kind,
        priors=priors,
        strategy=strategy,
        seed=int(seed if seed is not None else inf.get("seed", 0)),
        n_samples=int(inf.get("n_samples", 1000)),
        max_eval=int(inf.get("max_eval", 250)),
        out_dir=pathlib.Path(out) if out else _resolve(out_dir, base),
        simulate=raw.get("simulate"),
    )
    for name in ("controls", "cases", "boundary"):
        p = getattr(cfg, name)
        if not p.exists():
            raise DataError(f"{name} file does not exist: {p}")
    return cfg


def config_echo(cfg: RunConfig) -> dict:
    """The configuration as a TOML-shaped dict (manifest round-trip)."""
    return {
        "data": {
            "controls": str(cfg.controls),
            "cases": str(cfg.cases),
            "boundary": str(cfg.boundary),
            **({"source": list(cfg.source)} if cfg.source else {}),
        },
        "mesh": mesh_config_fragment(cfg),
        "mesh1d": {
            "n_knots": cfg.mesh1d_knots,
            "degree": cfg.mesh1d_degree,
            **({"to": cfg.mesh1d_to} if cfg.mesh1d_to is not None else {}),
        },
        "model": {"kind": cfg.model_kind},
        "priors": {
            "field": {"range": list(cfg.priors.field_range),
                      "sigma": list(cfg.priors.field_sigma)},
            "dist1d": {"range": list(cfg.priors.dist1d_range),
                       "sigma": list(cfg.priors.dist1d_sigma)},
            "rw2": {"sigma": list(cfg.priors.rw2_sigma),
                    "fixed_range": cfg.priors.rw2_fixed_range},
            "beta": {"precision": cfg.priors.beta_precision},
        },
        "inference": {"strategy": cfg.strategy, "seed": cfg.seed,
                      "n_samples": cfg.n_samples, "max_eval": cfg.max_eval},
        "output": {"directory": str(cfg.out_dir)},
    }


def mesh_config_fragment(cfg: RunConfig) -> dict:
    return {
        "cutoff": cfg.cutoff,
        "max_edge": list(cfg.max_edge),
        "min_angle": cfg.min_angle,
        "offset": list(cfg.offset),
        "n_initial": list(cfg.n_initial),
    }


# ---------------------------------------------------------------------------
# Pipeline stages


def ingest(cfg: RunConfig):
    """(patterns, boundary, source) with count report and outside warnings."""
    with open(cfg.boundary) as fh:
        boundary = geometry.polygon_from_geojson(json.load(fh))
    patterns = {
        "controls": simulate.read_pattern_csv(cfg.controls),
        "cases": simulate.read_pattern_csv(cfg.cases),
    }
    counts = {}
    warnings = []
    for name, pts in patterns.items():
        counts[name] = len(pts)
        if len(pts) == 0:
            warnings.append(f"{name}: empty point pattern")
            continue
        outside = np.nonzero(~geometry.points_in_polygon(pts, boundary))[0]
        if len(outside):
            warnings.append(
                f"{name}: dropped {len(outside)} point(s) outside the boundary "
                f"(indices {outside[:10].tolist()}{'...' if len(outside) > 10 else ''})"
            )
            keep = np.ones(len(pts), dtype=bool)
            keep[outside] = False
            patterns[name] = pts[keep]
    for msg in warnings:
        log.warning("%s", msg)
    log.info("ingested %d controls, %d cases", counts["controls"], counts["cases"])
    return patterns, boundary, cfg.source, counts, warnings


def build_mesh(cfg: RunConfig, boundary) -> meshing.Mesh2d:
    return meshing.build_mesh_2d(
        boundary, cutoff=cfg.cutoff, max_edge=cfg.max_edge,
        min_angle=cfg.min_angle, offset=cfg.offset, n_initial=cfg.n_initial,
    )


def distance_covariate(cfg: RunConfig, boundary, mesh) -> tuple:
    """(raster, dmax): distance to source over the extended region."""
    pad = cfg.offset[1] + 0.5
    rast = geometry.raster_from_bounds(geometry.dilate(boundary, pad).bounds(),
                                       256, 256)
    dist = geometry.distance_raster(cfg.source, rast)
    dmax = float(np.ceil(np.hypot(
        mesh.vertices[:, 0] - cfg.source[0],
        mesh.vertices[:, 1] - cfg.source[1]).max()))
    return dist, dmax


def build_spec(cfg: RunConfig, patterns, boundary, mesh) -> model.ModelSpec:
    """ModelSpec for the configured menu entry."""
    fem = meshing.assemble_fem(mesh)
    p = cfg.priors

    def field():
        prior = spde.PcPrior(p.field_range[0], p.field_range[1],
                             p.field_sigma[0], p.field_sigma[1])
        return spde.matern_2d(mesh, fem, prior)

    comps = [model.intercept("alpha_controls"), model.intercept("alpha_cases")]
    controls_f = ["alpha_controls"]
    cases_f = ["alpha_cases"]
    kind = cfg.model_kind

    if kind == "univariate":
        comps += [model.spatial_field("s_controls", field()),
                  model.spatial_field("s_cases", field())]
        controls_f += ["s_controls"]
        cases_f += ["s_cases"]
    else:
        comps.append(model.spatial_field("s_shared", field()))
        controls_f += ["s_shared"]
        cases_f += ["s_shared"]
        if kind != "shared-only":
            comps.append(model.spatial_field("s_specific", field()))
            cases_f += ["s_specific"]

    if kind in DIST_KINDS:
        dist, dmax = distance_covariate(cfg, boundary, mesh)
        if cfg.mesh1d_to is not None:
            dmax = cfg.mesh1d_to
        if kind == "+linear-dist":
            comps.append(model.linear_effect("dist", dist,
                                             precision=p.beta_precision))
        else:
            m1 = meshing.build_mesh_1d(0.0, dmax, cfg.mesh1d_knots,
                                       degree=cfg.mesh1d_degree)
            f1 = meshing.fem_1d(m1)
            if kind == "+spde1d-dist":
                prior1 = spde.PcPrior(p.dist1d_range[0], p.dist1d_range[1],
                                      p.dist1d_sigma[0], p.dist1d_sigma[1])
                sp1 = spde.matern_1d(m1, f1, prior1)
            else:
                sp1 = spde.rw2_model(m1, f1,
                                     fixed_range=p.rw2_fixed_range,
                                     sigma_prior=p.rw2_sigma)
            comps.append(model.smooth_effect("dist", dist, sp1))
        cases_f += ["dist"]

    likelihoods = [
        model.LikelihoodDef("controls", patterns["controls"], boundary, controls_f),
        model.LikelihoodDef("cases", patterns["cases"], boundary, cases_f),
    ]
    return model.ModelSpec(comps, likelihoods, mesh)


def run_pipeline(cfg: RunConfig) -> dict:
    """Full run: mesh, fit, predict, manifest.  Returns the manifest dict."""
    t_start = time.time()
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    failed_marker = out / "FAILED"
    if failed_marker.exists():
        failed_marker.unlink()
    artifacts = []

    try:
        patterns, boundary, source, counts, warnings = ingest(cfg)

        mesh = build_mesh(cfg, boundary)
        mesh_path = out / "mesh.txt"
        meshing.write_mesh(mesh, mesh_path)
        artifacts.append(mesh_path)
        log.info("mesh: %d vertices, min angle %.2f deg",
                 mesh.n_vertices, float(mesh.min_angles().min()))

        spec = build_spec(cfg, patterns, boundary, mesh)
        t_fit = time.time()
        fit = inference.fit_model(spec, strategy=cfg.strategy,
                                  max_eval=cfg.max_eval)
        fit_seconds = time.time() - t_fit
        draws = inference.sample_posterior(fit, cfg.n_samples, seed=cfg.seed)
        fit.summaries = inference.summarize(fit, draws, seed=cfg.seed)

        fit_json = out / "fit.json"
        inference.write_fit_json(fit, fit_json, extra={"counts": counts})
        fit_bin = out / "fit.lgfit"
        inference.write_fit_binary(fit, fit_bin)
        artifacts += [fit_json, fit_bin]

        for name in ("controls", "cases"):
            surf = predict.predict_intensity(fit, name, n_samples=cfg.n_samples,
                                             seed=cfg.seed)
            artifacts += [pathlib.Path(p) for p in
                          predict.write_surface(surf, out / f"intensity_{name}")]
        rr = predict.log_relative_risk(fit, "cases", "controls",
                                       n_samples=cfg.n_samples, seed=cfg.seed)
        artifacts += [pathlib.Path(p) for p in
                      predict.write_surface(rr, out / "log_relative_risk")]

        if cfg.model_kind in DIST_KINDS:
            _, dmax = distance_covariate(cfg, boundary, mesh)
            if cfg.mesh1d_to is not None:
                dmax = cfg.mesh1d_to
            curve = predict.effect_curve(fit, "dist",
                                         np.linspace(0.0, dmax, 101),
                                         n_samples=cfg.n_samples, seed=cfg.seed)
            artifacts += [pathlib.Path(p) for p in
                          predict.write_curve(curve, out / "distance_effect")]

        import scipy
        import shapely as _shapely
        manifest = {
            "config": config_echo(cfg),
            "counts": counts,
            "warnings": warnings,
            "seed": cfg.seed,
            "versions": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "shapely": _shapely.__version__,
            },
            "mesh": {
                "n_vertices": int(mesh.n_vertices),
                "min_angle": float(mesh.min_angles().min()),
            },
            "fit_seconds": fit_seconds,
            "total_seconds": time.time() - t_start,
            "artifacts": [str(a) for a in artifacts],
        }
        manifest_path = out / "manifest.json"
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=1)
        for a in artifacts:
            if not a.exists() or a.stat().st_size == 0:
                raise LgcpError(f"declared artifact missing or empty: {a}")
        return manifest
    except Exception as exc:
        with open(failed_marker, "w") as fh:
            fh.write(f"{type(exc).__name__}: {exc}\n")
        raise


def cmd_simulate(cfg: RunConfig) -> dict:
    """Simulate patterns per the [simulate] config section."""
    sim = cfg.simulate or {}
    with open(cfg.boundary) as fh:
        boundary = geometry.polygon_from_geojson(json.load(fh))
    mesh = build_mesh(cfg, boundary)
    scn = simulate.SimScenario(
        sampler=boundary,
        intercept=float(sim.get("intercept", 0.0)),
        field_range=float(sim["field_range"]) if "field_range" in sim else None,
        field_sigma=float(sim["field_sigma"]) if "field_sigma" in sim else None,
        seed=cfg.seed,
    )
    spde_model = None
    if scn.has_field:
        fem = meshing.assemble_fem(mesh)
        p = cfg.priors
        spde_model = spde.matern_2d(mesh, fem, spde.PcPrior(
            p.field_range[0], p.field_range[1],
            p.field_sigma[0], p.field_sigma[1]))
    pts = simulate.simulate_lgcp(scn, mesh, spde_model)
    patterns = {"simulated": pts}
    n_inject = int(sim.get("cluster_n", 0))
    if n_inject:
        src = sim.get("cluster_source", cfg.source)
        if src is None:
            raise ConfigError("simulate.cluster_n set but no cluster source")
        patterns["simulated"] = simulate.inject_cluster(
            pts, src, n_inject, float(sim.get("cluster_sd", 0.5)),
            boundary, seed=cfg.seed)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "patterns.csv"
    simulate.write_patterns_csv(path, patterns)
    report = {"counts": {k: len(v) for k, v in patterns.items()},
              "path": str(path)}
    log.info("simulated %s", report["counts"])
    return report


# ---------------------------------------------------------------------------
# Command-line interface


def _run(func, *args):
    """Error-to-exit-code mapping shared by all subcommands."""
    try:
        return func(*args)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except LgcpError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML run configuration.")
@click.option("--seed", type=int, default=None, help="Override inference.seed.")
@click.option("--out", type=click.Path(), default=None,
              help="Override output.directory.")
@click.option("--threads", type=int, default=None,
              help="Linear-algebra thread cap (best effort).")
@click.pass_context
def main(ctx, config_path, seed, out, threads):
    """Case-control point-pattern inference pipeline."""
    logging.basicConfig(
        level=os.environ.get("LGCP_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    ctx.obj = {"config": config_path, "seed": seed, "out": out}


def _load(ctx) -> RunConfig:
    if not ctx.obj["config"]:
        raise ConfigError("--config is required for this command")
    return load_config(ctx.obj["config"], seed=ctx.obj["seed"],
                       out=ctx.obj["out"])


@main.command()
@click.pass_context
def mesh(ctx):
    """Build the 2-D mesh and write it to the output directory."""
    def go():
        cfg = _load(ctx)
        with open(cfg.boundary) as fh:
            boundary = geometry.polygon_from_geojson(json.load(fh))
        m = build_mesh(cfg, boundary)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        path = cfg.out_dir / "mesh.txt"
        meshing.write_mesh(m, path)
        stats = {
            "n_vertices": int(m.n_vertices),
            "n_triangles": int(len(m.triangles)),
            "min_angle": float(m.min_angles().min()),
            "max_edge": float(m.edge_lengths().max()),
            "path": str(path),
        }
        click.echo(json.dumps(stats, indent=1))
    _run(go)


@main.command()
@click.pass_context
def fit(ctx):
    """Run the full pipeline: ingest, mesh, fit, predict, manifest."""
    def go():
        manifest = run_pipeline(_load(ctx))
        click.echo(json.dumps({
            "counts": manifest["counts"],
            "fit_seconds": manifest["fit_seconds"],
            "total_seconds": manifest["total_seconds"],
            "out": manifest["config"]["output"]["directory"],
        }, indent=1))
    _run(go)


@main.command(name="predict")
@click.option("--fit-dir", type=click.Path(), default=None,
              help="Directory holding fit.json/fit.lgfit (default: output dir).")
@click.pass_context
def predict_cmd(ctx, fit_dir):
    """Re-emit surfaces and curves from a saved fit."""
    def go():
        cfg = _load(ctx)
        src_dir = pathlib.Path(fit_dir) if fit_dir else cfg.out_dir
        fit_obj = load_fit(cfg, src_dir)
        out = cfg.out_dir
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name in ("controls", "cases"):
            surf = predict.predict_intensity(fit_obj, name,
                                             n_samples=cfg.n_samples,
                                             seed=cfg.seed)
            written += predict.write_surface(surf, out / f"intensity_{name}")
        rr = predict.log_relative_risk(fit_obj, "cases", "controls",
                                       n_samples=cfg.n_samples, seed=cfg.seed)
        written += predict.write_surface(rr, out / "log_relative_risk")
        click.echo(json.dumps({"written": [str(w) for w in written]}, indent=1))
    _run(go)


def load_fit(cfg: RunConfig, fit_dir: pathlib.Path) -> inference.FitResult:
    """Reconstruct a plug-in FitResult from fit.json + fit.lgfit."""
    with open(fit_dir / "fit.json") as fh:
        meta = json.load(fh)
    mode, q_post = inference.read_fit_binary(fit_dir / "fit.lgfit")
    patterns, boundary, _, _, _ = ingest(cfg)
    mesh = build_mesh(cfg, boundary)
    spec = build_spec(cfg, patterns, boundary, mesh)
    if len(mode) != spec.latent_dim:
        raise DataError(
            f"saved fit has latent dimension {len(mode)}; the configuration "
            f"rebuilds {spec.latent_dim} - config/fit mismatch")
    factor = inference.SymFactor(q_post.tocsc())
    constraint = spec.constraint_matrix()
    lg = inference.LatentGaussian(
        mode=mode, q_post=q_post, factor=factor, loglik_at_mode=0.0,
        iterations=0,
        constraint=constraint if constraint[0] is not None else None,
    )
    theta = np.asarray(meta["theta_mode"], dtype=float)
    hyper = inference.HyperPosterior(
        mode=theta, hessian=np.asarray(meta["theta_hessian"], dtype=float),
        grid=[(theta, 0.0, 1.0)], strategy="eb",
    )
    return inference.FitResult(spec=spec, hyper=hyper, latent=lg,
                               summaries=meta.get("summaries"))


@main.command(name="simulate")
@click.pass_context
def simulate_cmd(ctx):
    """Simulate point patterns per the [simulate] config section."""
    def go():
        report = cmd_simulate(_load(ctx))
        click.echo(json.dumps(report, indent=1))
    _run(go)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8756, show_default=True, type=int)
@click.pass_context
def serve(ctx, host, port):
    """Serve the mesh-design HTTP API (and the explorer UI if built)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
