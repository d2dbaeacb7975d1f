import json
import pathlib

import numpy as np
import pytest

from lgcp import geometry, meshing, model, simulate, spde

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "src" / "lgcp" / "fixtures"


@pytest.fixture(scope="session")
def unit_square():
    return geometry.Polygon([[0, 0], [1, 0], [1, 1], [0, 1]])


@pytest.fixture(scope="session")
def square10():
    return geometry.Polygon([[0, 0], [10, 0], [10, 10], [0, 10]])


@pytest.fixture(scope="session")
def mesh10(square10):
    """Coarse-but-honest mesh over the 10x10 window, shared by many tests."""
    return meshing.build_mesh_2d(square10, cutoff=0.3, max_edge=(0.8, 1.6),
                                 min_angle=27.0, offset=(0.5, 2.0))


@pytest.fixture(scope="session")
def fem10(mesh10):
    return meshing.assemble_fem(mesh10)


@pytest.fixture(scope="session")
def spde10(mesh10, fem10):
    return spde.matern_2d(mesh10, fem10, spde.PcPrior(5.0, 0.99, 1.0, 0.01))


@pytest.fixture(scope="session")
def chorley_boundary():
    with open(FIXTURES / "chorley_boundary.geojson") as fh:
        return geometry.polygon_from_geojson(json.load(fh))


@pytest.fixture(scope="session")
def chorley_lung():
    return simulate.read_pattern_csv(FIXTURES / "chorley_lung.csv")


@pytest.fixture(scope="session")
def chorley_larynx():
    return simulate.read_pattern_csv(FIXTURES / "chorley_larynx.csv")


@pytest.fixture(scope="session")
def chorley_source():
    with open(FIXTURES / "chorley_source.json") as fh:
        src = json.load(fh)
    return (src["x"], src["y"])


@pytest.fixture(scope="session")
def homog_points(square10):
    """500 uniform points in the 10x10 window (homogeneous pattern)."""
    rng = np.random.Generator(np.random.Philox(1234))
    return rng.uniform(0.0, 10.0, size=(500, 2))


@pytest.fixture(scope="session")
def homog_spec(square10, mesh10, homog_points):
    return model.ModelSpec(
        [model.intercept("alpha")],
        [model.LikelihoodDef("pat", homog_points, square10, ["alpha"])],
        mesh10,
    )
