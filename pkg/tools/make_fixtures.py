"""Generate the bundled Chorley-style fixtures.

Synthesizes a smooth study boundary, 978 control locations and 58 case
locations from a shared clustered intensity, plus the pollution-source
location.  Coordinates are kilometre eastings/northings in the same frame
as the classic south-Lancashire dataset.  Everything is driven by the
counter-based Philox generator so reruns are bit-identical.

Run from the repository root:

    python3 tools/make_fixtures.py
"""

from __future__ import annotations

import csv
import json
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "lgcp" / "fixtures"

SOURCE = (354.5, 413.6)  # disused incinerator (km)
N_CONTROLS = 978
N_CASES = 58

# Population mixture: three town clusters plus a diffuse rural background.
# The source location sits between clusters, in a low-density area, so a
# handful of extra cases nearby is a detectable anomaly.
TOWNS = [
    # (weight, mean_x, mean_y, sd_x, sd_y) -- placed at staggered distances
    # from the source so distance-effect models are well identified
    (0.26, 367.0, 420.5, 1.6, 1.4),
    (0.20, 353.5, 422.5, 1.2, 1.0),
    (0.20, 350.6, 409.2, 1.4, 1.2),
]
BACKGROUND_WEIGHT = 1.0 - sum(t[0] for t in TOWNS)

CENTRE = (358.5, 415.5)


def boundary_ring(n: int = 64) -> np.ndarray:
    """Smooth CCW blob: perturbed ellipse, no sharp corners."""
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    radius = (10.5
              + 1.3 * np.sin(2.0 * theta + 0.7)
              + 0.8 * np.cos(3.0 * theta - 0.4))
    x = CENTRE[0] + 1.25 * radius * np.cos(theta)
    y = CENTRE[1] + 0.88 * radius * np.sin(theta)
    return np.column_stack([np.round(x, 3), np.round(y, 3)])


def in_ring(ring: np.ndarray, pts: np.ndarray) -> np.ndarray:
    import shapely

    poly = shapely.polygons(ring)
    return shapely.covers(poly, shapely.points(pts))


def sample_population(ring: np.ndarray, n: int, stream: int) -> np.ndarray:
    """n points from the mixture intensity, clipped to the boundary."""
    rng = np.random.Generator(np.random.Philox([20260823, stream]))
    xmin, ymin = ring.min(axis=0)
    xmax, ymax = ring.max(axis=0)
    out = []
    while len(out) < n:
        u = rng.uniform()
        if u < BACKGROUND_WEIGHT:
            p = rng.uniform((xmin, ymin), (xmax, ymax))
        else:
            acc = BACKGROUND_WEIGHT
            for w, mx, my, sx, sy in TOWNS:
                acc += w
                if u < acc:
                    p = rng.normal((mx, my), (sx, sy))
                    break
        # events are digitized at 0.1 km resolution; containment must hold
        # for the rounded coordinates actually written out
        p = np.round(p, 1)
        if in_ring(ring, p.reshape(1, 2))[0]:
            out.append(p)
    return np.asarray(out)


def write_csv(path: pathlib.Path, pts: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in pts:
            writer.writerow([f"{x:.1f}", f"{y:.1f}"])


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    ring = boundary_ring()
    if not in_ring(ring, np.asarray(SOURCE).reshape(1, 2))[0]:
        raise SystemExit("source fell outside the boundary; adjust the ring")

    geojson = {
        "type": "Feature",
        "properties": {"name": "chorley"},
        "geometry": {
            "type": "Polygon",
            "coordinates": [[list(map(float, p)) for p in ring]
                            + [[float(ring[0, 0]), float(ring[0, 1])]]],
        },
    }
    with open(OUT / "chorley_boundary.geojson", "w") as fh:
        json.dump(geojson, fh, indent=1)

    lung = sample_population(ring, N_CONTROLS, stream=101)
    larynx = sample_population(ring, N_CASES, stream=211)
    write_csv(OUT / "chorley_lung.csv", lung)
    write_csv(OUT / "chorley_larynx.csv", larynx)

    with open(OUT / "chorley_source.json", "w") as fh:
        json.dump({"name": "incinerator", "x": SOURCE[0], "y": SOURCE[1]}, fh)

    d_lung = np.hypot(*(lung - SOURCE).T)
    print(f"controls {len(lung)}, cases {len(larynx)}")
    print(f"controls within 2 km of source: {(d_lung < 2).sum()}")
    print(f"boundary bbox: {ring.min(axis=0)} .. {ring.max(axis=0)}")


if __name__ == "__main__":
    main()
