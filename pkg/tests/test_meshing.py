import numpy as np
import pytest

from lgcp import geometry, meshing
from lgcp.errors import InvalidGeometryError, PointNotCoveredError


class TestMesh1d:
    def test_twenty_knots_spacing(self):
        m = meshing.build_mesh_1d(0.0, 22.0, 20, degree=2)
        assert len(m.knots) == 20
        assert np.allclose(np.diff(m.knots), 22.0 / 19)

    def test_two_knots(self):
        m = meshing.build_mesh_1d(0.0, 1.0, 2, degree=1)
        assert m.knots.tolist() == [0.0, 1.0]

    def test_uniform_spacing(self):
        m = meshing.build_mesh_1d(-3.0, 5.0, 33)
        d = np.diff(m.knots)
        assert np.allclose(d, d[0], rtol=1e-12)

    def test_invalid_range(self):
        with pytest.raises(InvalidGeometryError):
            meshing.build_mesh_1d(1.0, 1.0, 5)
        with pytest.raises(InvalidGeometryError):
            meshing.build_mesh_1d(0.0, 1.0, 1)


class TestBasis1d:
    def test_degree1_knot_indicator(self):
        m = meshing.build_mesh_1d(0.0, 4.0, 5, degree=1)
        res = meshing.basis_eval_1d(m, [2.0])
        row = res.matrix.toarray()[0]
        assert row[2] == pytest.approx(1.0)
        assert np.count_nonzero(row) == 1

    def test_degree1_midpoint(self):
        m = meshing.build_mesh_1d(0.0, 4.0, 5, degree=1)
        row = meshing.basis_eval_1d(m, [2.5]).matrix.toarray()[0]
        assert row[2] == pytest.approx(0.5)
        assert row[3] == pytest.approx(0.5)

    def test_degree2_partition_of_unity(self):
        m = meshing.build_mesh_1d(0.0, 22.0, 20, degree=2)
        rng = np.random.Generator(np.random.Philox(11))
        vals = rng.uniform(0.0, 22.0, 1000)
        rows = np.asarray(meshing.basis_eval_1d(m, vals).matrix.sum(axis=1)).ravel()
        assert np.allclose(rows, 1.0, atol=1e-12)

    def test_basis_count_matches_knots(self):
        for degree in (1, 2):
            m = meshing.build_mesh_1d(0.0, 1.0, 20, degree=degree)
            res = meshing.basis_eval_1d(m, [0.5])
            assert res.matrix.shape[1] == 20

    def test_out_of_range_clamped_with_flag(self):
        m = meshing.build_mesh_1d(0.0, 1.0, 5, degree=2)
        res = meshing.basis_eval_1d(m, [-0.5, 0.5, 2.0])
        assert res.clamped.tolist() == [True, False, True]
        assert np.allclose(
            res.matrix.toarray()[0], meshing.basis_eval_1d(m, [0.0]).matrix.toarray()[0])


class TestBuildMesh2d:
    def test_square_coverage(self, square10, mesh10):
        # triangulated area covers at least the offset-extended square
        inner = geometry.dilate(square10, 0.5)
        total = mesh10.triangle_areas().sum()
        assert total >= geometry.polygon_area(inner) - 1e-6

    def test_min_angle_invariant(self, mesh10):
        assert mesh10.min_angles().min() >= 27.0 - 1e-9

    def test_positive_orientation(self, mesh10):
        assert np.all(mesh10.triangle_areas() > 0)

    def test_inner_edge_limit(self, mesh10, square10):
        inner = geometry.dilate(square10, 0.5)
        tri = mesh10.triangles
        cent = mesh10.vertices[tri].mean(axis=1)
        is_inner = geometry.points_in_polygon(cent, inner)
        assert mesh10.edge_lengths()[is_inner].max() <= 0.8 * (1 + 1e-9)

    def test_vertex_spacing_floor(self, mesh10):
        from scipy.spatial import cKDTree
        d, _ = cKDTree(mesh10.vertices).query(mesh10.vertices, k=2)
        # documented floor: min(cutoff, max_edge/2) per region
        assert d[:, 1].min() >= min(0.3, 0.4) - 1e-9

    def test_doubling_cutoff_monotone(self, square10):
        kw = dict(max_edge=(0.4, 0.8), min_angle=27.0, offset=(0.3, 1.0))
        fine = meshing.build_mesh_2d(square10, cutoff=0.1, **kw)
        coarse = meshing.build_mesh_2d(square10, cutoff=0.2, **kw)
        coarser = meshing.build_mesh_2d(square10, cutoff=0.4, **kw)
        assert coarse.n_vertices <= fine.n_vertices
        assert coarser.n_vertices <= coarse.n_vertices

    def test_deterministic(self, square10):
        kw = dict(cutoff=0.2, max_edge=(0.5, 1.0), min_angle=27.0, offset=(0.3, 1.0))
        m1 = meshing.build_mesh_2d(square10, **kw)
        m2 = meshing.build_mesh_2d(square10, **kw)
        assert np.array_equal(m1.vertices, m2.vertices)
        assert np.array_equal(m1.triangles, m2.triangles)
        assert np.array_equal(m1.inner_marker, m2.inner_marker)

    def test_chorley_parameters(self, chorley_boundary):
        m = meshing.build_mesh_2d(chorley_boundary, cutoff=0.4,
                                  max_edge=(0.6, 1.2), min_angle=27.0,
                                  offset=(0.5, 2.0), n_initial=(16, 16))
        assert m.min_angles().min() >= 27.0
        inner = geometry.dilate(chorley_boundary, 0.5)
        cent = m.vertices[m.triangles].mean(axis=1)
        is_inner = geometry.points_in_polygon(cent, inner)
        assert m.edge_lengths()[is_inner].max() <= 0.6 * (1 + 1e-9)

    def test_invalid_parameters(self, square10):
        with pytest.raises(InvalidGeometryError):
            meshing.build_mesh_2d(square10, cutoff=-1, max_edge=(0.5, 1.0))
        with pytest.raises(InvalidGeometryError):
            meshing.build_mesh_2d(square10, cutoff=0.1, max_edge=(1.0, 0.5))
        with pytest.raises(InvalidGeometryError):
            meshing.build_mesh_2d(square10, cutoff=0.1, max_edge=(0.5, 1.0),
                                  min_angle=35.0)

    def test_io_round_trip(self, tmp_path, mesh10):
        path = tmp_path / "m.txt"
        meshing.write_mesh(mesh10, path)
        with open(path) as fh:
            assert fh.readline().startswith("MESH2D v1")
        back = meshing.read_mesh(path)
        assert np.allclose(back.vertices, mesh10.vertices)
        assert np.array_equal(back.triangles, mesh10.triangles)
        assert np.array_equal(back.inner_marker, mesh10.inner_marker)


class TestBasisEval2d:
    def test_row_at_vertex(self, mesh10):
        k = 17
        a = meshing.basis_eval(mesh10, mesh10.vertices[[k]])
        row = a.toarray()[0]
        assert row[k] == pytest.approx(1.0)
        assert row.sum() == pytest.approx(1.0)

    def test_barycenter(self, mesh10):
        t = mesh10.triangles[0]
        bc = mesh10.vertices[t].mean(axis=0)
        row = meshing.basis_eval(mesh10, [bc]).toarray()[0]
        assert np.allclose(sorted(row[t]), [1 / 3] * 3, atol=1e-9)

    def test_edge_midpoint(self, mesh10):
        t = mesh10.triangles[0]
        mid = 0.5 * (mesh10.vertices[t[0]] + mesh10.vertices[t[1]])
        row = meshing.basis_eval(mesh10, [mid]).toarray()[0]
        assert row[t[0]] + row[t[1]] == pytest.approx(1.0, abs=1e-9)

    def test_rows_nonneg_sum_one(self, mesh10):
        rng = np.random.Generator(np.random.Philox(23))
        pts = rng.uniform(0, 10, size=(200, 2))
        a = meshing.basis_eval(mesh10, pts)
        arr = a.toarray()
        assert arr.min() >= -1e-12
        assert np.allclose(arr.sum(axis=1), 1.0, atol=1e-12)
        assert np.all((arr > 0).sum(axis=1) <= 3)

    def test_outside_raises_with_index(self, mesh10):
        with pytest.raises(PointNotCoveredError) as exc:
            meshing.basis_eval(mesh10, [[5.0, 5.0], [100.0, 100.0]])
        assert exc.value.indices == [1]


class TestFem:
    def test_right_triangle_stiffness(self):
        # hand integration of linear basis gradients on legs-1 right triangle
        m = meshing.Mesh2d(
            vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            triangles=np.array([[0, 1, 2]]),
            inner_marker=np.array([True, True, True]),
        )
        fem = meshing.assemble_fem(m)
        expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
        assert np.allclose(fem.g.toarray(), expected)
        assert np.allclose(fem.c, [1 / 6, 1 / 6, 1 / 6])

    def test_mass_sums_to_area(self, mesh10, fem10):
        assert fem10.c.sum() == pytest.approx(mesh10.triangle_areas().sum(), rel=1e-9)
        assert np.all(fem10.c > 0)

    def test_stiffness_annihilates_constants(self, fem10):
        ones = np.ones(fem10.size)
        gmax = np.abs(fem10.g.toarray()).max()
        assert np.abs(fem10.g @ ones).max() < 1e-9 * gmax

    def test_stiffness_psd(self, fem10):
        rng = np.random.Generator(np.random.Philox(31))
        for _ in range(20):
            v = rng.standard_normal(fem10.size)
            assert v @ (fem10.g @ v) >= -1e-9

    def test_fem_1d_hand_values(self):
        m = meshing.Mesh1d(np.array([0.0, 1.0]), degree=1)
        fem = meshing.fem_1d(m)
        assert np.allclose(fem.g.toarray(), [[1, -1], [-1, 1]])

    def test_fem_1d_interior_mass(self):
        h = 0.5
        m = meshing.build_mesh_1d(0.0, 2.0, 5, degree=1)
        fem = meshing.fem_1d(m)
        assert fem.c[2] == pytest.approx(h)

    def test_fem_1d_mass_sums_to_length(self):
        m = meshing.build_mesh_1d(0.0, 22.0, 20, degree=2)
        fem = meshing.fem_1d(m)
        assert fem.c.sum() == pytest.approx(22.0, rel=1e-9)

    def test_fem_1d_row_sums_zero(self):
        m = meshing.build_mesh_1d(0.0, 5.0, 12, degree=2)
        fem = meshing.fem_1d(m)
        gmax = np.abs(fem.g.toarray()).max()
        assert np.abs(fem.g @ np.ones(fem.size)).max() < 1e-9 * gmax
