"""Planar primitives: points, polygons with holes, and regular rasters.

Coordinates are kilometres throughout.  Polygon predicates and clipping are
backed by shapely; areas are also computed directly with the shoelace formula
so the two routes can cross-check each other in tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import shapely
import shapely.geometry as sgeom

from .errors import InvalidGeometryError, OutOfExtentError

NODATA_DEFAULT = -9999.0


def _as_ring(vertices) -> np.ndarray:
    ring = np.asarray(vertices, dtype=float)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise InvalidGeometryError(f"ring must be (n, 2), got {ring.shape}")
    if len(ring) > 1 and np.allclose(ring[0], ring[-1]):
        ring = ring[:-1]
    if not np.all(np.isfinite(ring)):
        raise InvalidGeometryError("ring coordinates must be finite")
    if len(np.unique(ring, axis=0)) < 3:
        raise InvalidGeometryError("ring needs at least 3 distinct vertices")
    return ring


def _ring_signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with optional holes.

    The exterior ring is stored counter-clockwise and holes clockwise;
    rings are open (last vertex != first).  Boundary points count as inside.
    """

    exterior: np.ndarray
    holes: tuple = ()
    _shape: sgeom.Polygon = field(default=None, repr=False, compare=False)

    def __init__(self, exterior, holes=()):
        ext = _as_ring(exterior)
        if _ring_signed_area(ext) < 0:
            ext = ext[::-1]
        hole_rings = []
        for h in holes:
            ring = _as_ring(h)
            if _ring_signed_area(ring) > 0:
                ring = ring[::-1]
            hole_rings.append(ring)
        ext.setflags(write=False)
        for ring in hole_rings:
            ring.setflags(write=False)
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", tuple(hole_rings))
        shape = sgeom.Polygon(ext, [r for r in hole_rings])
        if not shape.is_valid:
            raise InvalidGeometryError(f"invalid polygon: {shapely.is_valid_reason(shape)}")
        if shape.area <= 0:
            raise InvalidGeometryError("polygon area must be positive")
        object.__setattr__(self, "_shape", shape)

    @property
    def shape(self) -> sgeom.Polygon:
        return self._shape

    def bounds(self):
        """(xmin, ymin, xmax, ymax)."""
        return self._shape.bounds

    def __eq__(self, other):
        if not isinstance(other, Polygon):
            return NotImplemented
        return self._shape.equals(other._shape)


def polygon_area(p: Polygon) -> float:
    """Shoelace area of the exterior minus the holes, in km^2."""
    area = _ring_signed_area(p.exterior)
    for h in p.holes:
        area += _ring_signed_area(h)  # holes are clockwise: negative
    return area


def point_in_polygon(pt, p: Polygon) -> bool:
    """True iff pt is inside the exterior and outside all holes.

    Boundary points count as inside (events are digitized at 0.1 km and may
    land exactly on boundary vertices).
    """
    return bool(p.shape.covers(sgeom.Point(float(pt[0]), float(pt[1]))))


def points_in_polygon(pts, p: Polygon) -> np.ndarray:
    """Vectorized :func:`point_in_polygon` over an (n, 2) array."""
    pts = np.asarray(pts, dtype=float)
    if len(pts) == 0:
        return np.zeros(0, dtype=bool)
    shapely.prepare(p.shape)
    geoms = shapely.points(pts[:, 0], pts[:, 1])
    return shapely.covers(p.shape, geoms)


def _polygonize(shape) -> list[Polygon]:
    parts = []
    if shape.is_empty:
        return parts
    geoms = shape.geoms if hasattr(shape, "geoms") else [shape]
    for g in geoms:
        if isinstance(g, sgeom.Polygon) and g.area > 1e-12:
            parts.append(
                Polygon(np.asarray(g.exterior.coords)[:-1],
                        [np.asarray(r.coords)[:-1] for r in g.interiors])
            )
    return parts


def clip_polygon(subject: Polygon, clip: Polygon) -> list[Polygon]:
    """Intersection of two polygons as a (possibly empty) list of parts."""
    inter = subject.shape.intersection(clip.shape)
    return _polygonize(inter)


def clip_area(subject: Polygon, clip: Polygon) -> float:
    """Area of the intersection, without materializing part polygons."""
    return float(subject.shape.intersection(clip.shape).area)


def dilate(p: Polygon, distance: float, quad_segs: int = 2) -> Polygon:
    """Minkowski offset with rounded corners (8-segment arcs by default)."""
    buffered = p.shape.buffer(distance, quad_segs=quad_segs)
    parts = _polygonize(buffered)
    if len(parts) != 1:
        raise InvalidGeometryError("dilation produced a non-simple region")
    return parts[0]


@dataclass
class Raster:
    """Regular grid of values with georeferencing.

    ``values`` is (nrows, ncols) with row 0 at the top (north), matching the
    ESRI ASCII layout.  ``origin`` is the lower-left corner of the grid.
    ``nodata`` is an explicit sentinel, never silently treated as 0.
    """

    origin: tuple
    cellsize: float
    values: np.ndarray
    nodata: float = NODATA_DEFAULT

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InvalidGeometryError("raster values must be 2-D")
        if self.cellsize <= 0:
            raise InvalidGeometryError("cellsize must be positive")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def cell_centers(self) -> np.ndarray:
        """(nrows*ncols, 2) array of cell-center coordinates, row-major."""
        x0, y0 = self.origin
        cs = self.cellsize
        xs = x0 + (np.arange(self.ncols) + 0.5) * cs
        ys = y0 + (self.nrows - np.arange(self.nrows) - 0.5) * cs
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def copy_like(self, values) -> "Raster":
        return Raster(self.origin, self.cellsize, np.asarray(values, dtype=float),
                      nodata=self.nodata)

    def is_nodata(self) -> np.ndarray:
        return self.values == self.nodata


def raster_from_bounds(bounds, ncols: int, nrows: int, fill=0.0,
                       nodata=NODATA_DEFAULT) -> Raster:
    """Template raster covering ``bounds`` with square cells.

    The cell size is chosen so the grid covers the bounding box in both
    directions; the grid may overhang on one side.
    """
    xmin, ymin, xmax, ymax = bounds
    cs = max((xmax - xmin) / ncols, (ymax - ymin) / nrows)
    vals = np.full((nrows, ncols), fill, dtype=float)
    return Raster((xmin, ymin), cs, vals, nodata=nodata)


def distance_raster(source, template: Raster) -> Raster:
    """Euclidean distance (km) from every cell center to ``source``."""
    centers = template.cell_centers()
    d = np.hypot(centers[:, 0] - float(source[0]), centers[:, 1] - float(source[1]))
    return template.copy_like(d.reshape(template.nrows, template.ncols))


def raster_lookup(r: Raster, pts, bilinear: bool = False) -> np.ndarray:
    """Raster values at points; nearest cell by default, bilinear on request.

    Raises :class:`OutOfExtentError` identifying offending point indices.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    x0, y0 = r.origin
    cs = r.cellsize
    fx = (pts[:, 0] - x0) / cs
    fy = (pts[:, 1] - y0) / cs
    bad = (fx < 0) | (fx > r.ncols) | (fy < 0) | (fy > r.nrows)
    if np.any(bad):
        idx = np.nonzero(bad)[0]
        raise OutOfExtentError(
            f"{len(idx)} point(s) outside raster extent, first index {idx[0]}",
            indices=idx,
        )
    if not bilinear:
        col = np.clip(fx.astype(int), 0, r.ncols - 1)
        row_from_bottom = np.clip(fy.astype(int), 0, r.nrows - 1)
        row = r.nrows - 1 - row_from_bottom
        return r.values[row, col]
    # Bilinear on cell centers, clamped at the edges.
    gx = np.clip(fx - 0.5, 0.0, r.ncols - 1.0)
    gy = np.clip(fy - 0.5, 0.0, r.nrows - 1.0)
    c0 = np.floor(gx).astype(int)
    b0 = np.floor(gy).astype(int)
    c1 = np.minimum(c0 + 1, r.ncols - 1)
    b1 = np.minimum(b0 + 1, r.nrows - 1)
    tx = gx - c0
    ty = gy - b0
    rows0 = r.nrows - 1 - b0
    rows1 = r.nrows - 1 - b1
    v00 = r.values[rows0, c0]
    v10 = r.values[rows0, c1]
    v01 = r.values[rows1, c0]
    v11 = r.values[rows1, c1]
    return (v00 * (1 - tx) * (1 - ty) + v10 * tx * (1 - ty)
            + v01 * (1 - tx) * ty + v11 * tx * ty)


# ---------------------------------------------------------------------------
# Serialization: GeoJSON polygons, ESRI ASCII grids.

def polygon_to_geojson(p: Polygon) -> dict:
    def close(ring):
        return [list(map(float, v)) for v in np.vstack([ring, ring[:1]])]

    coords = [close(p.exterior)] + [close(h) for h in p.holes]
    return {"type": "Polygon", "coordinates": coords}


def polygon_from_geojson(obj: dict) -> Polygon:
    if obj.get("type") == "Feature":
        obj = obj["geometry"]
    if obj.get("type") == "FeatureCollection":
        obj = obj["features"][0]["geometry"]
    if obj.get("type") != "Polygon":
        raise InvalidGeometryError(f"expected GeoJSON Polygon, got {obj.get('type')}")
    rings = obj["coordinates"]
    return Polygon(rings[0], rings[1:])


def write_polygon_geojson(p: Polygon, path) -> None:
    with open(path, "w") as fh:
        json.dump(polygon_to_geojson(p), fh)


def read_polygon_geojson(path) -> Polygon:
    with open(path) as fh:
        return polygon_from_geojson(json.load(fh))


def write_ascii_grid(r: Raster, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"ncols {r.ncols}\n")
        fh.write(f"nrows {r.nrows}\n")
        fh.write(f"xllcorner {float(r.origin[0])!r}\n")
        fh.write(f"yllcorner {float(r.origin[1])!r}\n")
        fh.write(f"cellsize {float(r.cellsize)!r}\n")
        fh.write(f"NODATA_value {float(r.nodata)!r}\n")
        for row in r.values:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_ascii_grid(path) -> Raster:
    header = {}
    values = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].lower()
            if len(parts) == 2 and key in (
                "ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"
            ):
                header[key] = float(parts[1])
            else:
                values.extend(float(v) for v in parts)
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if len(values) != ncols * nrows:
        raise InvalidGeometryError(
            f"grid has {len(values)} values, expected {ncols * nrows}"
        )
    vals = np.asarray(values, dtype=float).reshape(nrows, ncols)
    return Raster(
        (header["xllcorner"], header["yllcorner"]),
        header["cellsize"],
        vals,
        nodata=header.get("nodata_value", NODATA_DEFAULT),
    )
