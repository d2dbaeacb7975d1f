"""Local HTTP facade over the 2-D mesh builder.

Powers the interactive mesh-design UI: the browser posts parameter sets and
renders the returned triangulation.  Stateless by construction, so identical
requests produce byte-identical responses.
"""

from __future__ import annotations

import concurrent.futures
import json
import pathlib

import numpy as np
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import geometry, meshing
from .errors import LgcpError, MeshRefinementError

TRIANGLE_CAP = 200_000
MESH_BUDGET_SECONDS = 5.0

FIXTURE_BOUNDARIES = {"chorley": "chorley_boundary.geojson"}

DEFAULTS = {
    "cutoff": 0.4,
    "max_edge": [0.6, 1.2],
    "min_angle": 27.0,
    "offset": [0.5, 2.0],
    "n_initial": [16, 16],
}


def _field_errors(body: dict) -> dict:
    """Field-name -> message for everything wrong with the request."""
    errors = {}
    if not isinstance(body, dict):
        return {"body": "request body must be a JSON object"}
    if "boundary" not in body:
        errors["boundary"] = "required: GeoJSON object or fixture name"
    else:
        b = body["boundary"]
        if isinstance(b, str):
            pass  # fixture name, resolved later (404 when unknown)
        elif isinstance(b, dict):
            try:
                geometry.polygon_from_geojson(b)
            except (LgcpError, KeyError, TypeError, ValueError) as exc:
                errors["boundary"] = f"invalid GeoJSON polygon: {exc}"
        else:
            errors["boundary"] = "must be a GeoJSON object or fixture name"

    def positive(name):
        if name in body:
            try:
                v = float(body[name])
            except (TypeError, ValueError):
                errors[name] = "must be a number"
                return
            if v <= 0:
                errors[name] = "must be positive"

    def positive_pair(name, integral=False):
        if name in body:
            v = body[name]
            ok = (isinstance(v, (list, tuple)) and len(v) == 2
                  and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                          and x > 0 for x in v))
            if ok and integral:
                ok = all(float(x).is_integer() for x in v)
            if not ok:
                kind = "positive integers" if integral else "positive numbers"
                errors[name] = f"must be a pair of {kind}"

    positive("cutoff")
    positive_pair("max_edge")
    positive("min_angle")
    if "min_angle" in body and "min_angle" not in errors:
        if float(body["min_angle"]) >= 34.0:
            errors["min_angle"] = "termination is only guaranteed below 34 degrees"
    positive_pair("offset")
    positive_pair("n_initial", integral=True)
    unknown = set(body) - {"boundary", *DEFAULTS}
    for name in sorted(unknown):
        errors[name] = "unknown parameter"
    return errors


def _resolve_boundary(b):
    """Polygon from an inline GeoJSON dict or a fixture name (None = 404)."""
    if isinstance(b, dict):
        return geometry.polygon_from_geojson(b)
    fname = FIXTURE_BOUNDARIES.get(b)
    if fname is None:
        return None
    import importlib.resources

    path = pathlib.Path(importlib.resources.files("lgcp") / "fixtures" / fname)
    with open(path) as fh:
        return geometry.polygon_from_geojson(json.load(fh))


def _mesh_response(mesh: meshing.Mesh2d) -> dict:
    inner_tri = np.all(mesh.inner_marker[mesh.triangles], axis=1)
    inner_edges = mesh.edge_lengths()[inner_tri]
    stats = {
        "n_vertices": int(mesh.n_vertices),
        "n_triangles": int(mesh.n_triangles),
        "min_angle": float(mesh.min_angles().min()),
        "max_inner_edge": float(inner_edges.max()) if inner_edges.size else 0.0,
        "area": float(mesh.triangle_areas().sum()),
    }
    truncated = mesh.n_triangles > TRIANGLE_CAP
    payload = {"stats": stats, "truncated": truncated}
    if not truncated:
        payload["vertices"] = mesh.vertices.tolist()
        payload["triangles"] = mesh.triangles.tolist()
        payload["inner_marker"] = mesh.inner_marker.tolist()
    return payload


def create_app() -> FastAPI:
    app = FastAPI(title="lgcp mesh service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],  # loopback desk tool; origin is always local
        allow_methods=["*"],
        allow_headers=["*"],
    )
    # One worker: a mesh build is CPU-bound, and queueing beats thrashing.
    executor = concurrent.futures.ThreadPoolExecutor(max_workers=1)

    @app.get("/fixtures")
    def fixtures():
        return {"fixtures": sorted(FIXTURE_BOUNDARIES)}

    @app.post("/mesh")
    async def mesh(request: dict):
        errors = _field_errors(request)
        if errors:
            return JSONResponse({"errors": errors}, status_code=400)
        boundary = _resolve_boundary(request["boundary"])
        if boundary is None:
            return JSONResponse(
                {"errors": {"boundary": f"unknown fixture {request['boundary']!r}"}},
                status_code=404)
        params = {k: request.get(k, v) for k, v in DEFAULTS.items()}

        def build():
            return meshing.build_mesh_2d(
                boundary,
                cutoff=float(params["cutoff"]),
                max_edge=tuple(map(float, params["max_edge"])),
                min_angle=float(params["min_angle"]),
                offset=tuple(map(float, params["offset"])),
                n_initial=tuple(map(int, params["n_initial"])),
            )

        future = executor.submit(build)
        try:
            result = future.result(timeout=MESH_BUDGET_SECONDS)
        except concurrent.futures.TimeoutError:
            return JSONResponse(
                {"error": "mesh construction exceeded "
                          f"{MESH_BUDGET_SECONDS:g} s; coarsen the parameters"},
                status_code=504)
        except MeshRefinementError as exc:
            return JSONResponse(
                {"error": str(exc), "diagnostics": exc.diagnostics},
                status_code=422)
        except LgcpError as exc:
            return JSONResponse({"errors": {"request": str(exc)}},
                                status_code=400)
        return _mesh_response(result)

    bundle = pathlib.Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if bundle.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=bundle, html=True), name="ui")
    return app
