import numpy as np
import pytest
import scipy.sparse as sp

from lgcp import geometry, meshing, model, spde
from lgcp.errors import DataError, InvalidGeometryError


@pytest.fixture(scope="module")
def dist_raster():
    # distance-to-center covariate covering the whole mesh extension
    base = geometry.raster_from_bounds((-3.0, -3.0, 13.0, 13.0), 128, 128)
    return geometry.distance_raster((5.0, 5.0), base)


@pytest.fixture(scope="module")
def dist_spde():
    m = meshing.build_mesh_1d(0.0, 16.0, 20, degree=2)
    fem = meshing.fem_1d(m)
    return spde.matern_1d(m, fem, spde.PcPrior(2.0, 0.99, 1.0, 0.01))


class TestIntegration:
    def test_weights_sum_to_window_area(self, mesh10, square10):
        scheme = model.build_integration(mesh10, square10)
        assert scheme.weights.sum() == pytest.approx(100.0, rel=1e-9)

    def test_nodes_are_vertices(self, mesh10, square10):
        scheme = model.build_integration(mesh10, square10)
        assert np.array_equal(scheme.nodes, mesh10.vertices)

    def test_far_nodes_zero_weight(self, mesh10, square10):
        scheme = model.build_integration(mesh10, square10)
        far = np.min(
            np.abs(mesh10.vertices[:, None, :] -
                   np.array([[0, 0], [10, 10]])[None]), axis=(1, 2))
        outside = ((mesh10.vertices[:, 0] < -1) | (mesh10.vertices[:, 0] > 11) |
                   (mesh10.vertices[:, 1] < -1) | (mesh10.vertices[:, 1] > 11))
        assert np.all(scheme.weights[outside] == 0.0)
        assert np.all(scheme.weights >= 0.0)

    def test_sub_window(self, mesh10):
        half = geometry.Polygon([[0, 0], [10, 0], [10, 5], [0, 5]])
        scheme = model.build_integration(mesh10, half)
        assert scheme.weights.sum() == pytest.approx(50.0, rel=1e-9)


class TestSpecLayout:
    def test_latent_dim_and_blocks(self, square10, mesh10, homog_points, dist_raster):
        comps = [
            model.intercept("a"),
            model.spatial_field("s", spde.matern_2d(
                mesh10, meshing.assemble_fem(mesh10),
                spde.PcPrior(5.0, 0.99, 1.0, 0.01))),
            model.linear_effect("d", dist_raster),
        ]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["a", "s", "d"])
        spec = model.ModelSpec(comps, [lik], mesh10)
        n = mesh10.n_vertices
        assert spec.latent_dim == 1 + n + 1
        assert spec.block("a") == slice(0, 1)
        assert spec.block("s") == slice(1, 1 + n)
        assert spec.block("d") == slice(1 + n, 2 + n)
        assert spec.hyper_dim == 2
        assert spec.hyper_layout == [("s", "log_range"), ("s", "log_sigma")]

    def test_hyper_unpack_and_init(self, homog_spec, square10, mesh10,
                                   homog_points, fem10):
        comps = [
            model.intercept("a"),
            model.spatial_field("s", spde.matern_2d(
                mesh10, fem10, spde.PcPrior(10.0, 0.99, 1.0, 0.01))),
        ]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["a", "s"])
        spec = model.ModelSpec(comps, [lik], mesh10)
        vals = spec.hyper_unpack([np.log(3.0), np.log(0.5)])
        assert vals["s"][0] == pytest.approx(3.0)
        assert vals["s"][1] == pytest.approx(0.5)
        init = spec.hyper_init()
        assert init.tolist() == pytest.approx([np.log(5.0), np.log(0.5)])

    def test_duplicate_names_rejected(self, square10, mesh10, homog_points):
        comps = [model.intercept("a"), model.intercept("a")]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["a"])
        with pytest.raises(InvalidGeometryError):
            model.ModelSpec(comps, [lik], mesh10)

    def test_unknown_formula_term_rejected(self, square10, mesh10, homog_points):
        lik = model.LikelihoodDef("pat", homog_points, square10, ["nope"])
        with pytest.raises(InvalidGeometryError):
            model.ModelSpec([model.intercept("a")], [lik], mesh10)

    def test_outside_event_rejected(self, square10, mesh10):
        lik = model.LikelihoodDef("pat", [[5.0, 5.0], [20.0, 20.0]],
                                  square10, ["a"])
        with pytest.raises(DataError):
            model.ModelSpec([model.intercept("a")], [lik], mesh10)


class TestLoglik:
    def test_hand_value_intercept_only(self, homog_spec, homog_points):
        # ell(alpha) = N alpha - |W| e^alpha with |W| = 100
        alpha = -0.3
        n = len(homog_points)
        expect = n * alpha - 100.0 * np.exp(alpha)
        assert homog_spec.loglik([alpha]) == pytest.approx(expect, rel=1e-9)

    def test_gradient_zero_at_mle(self, homog_spec, homog_points):
        alpha_hat = np.log(len(homog_points) / 100.0)
        grad, neg_hess = homog_spec.loglik_grad_hess([alpha_hat])
        assert grad[0] == pytest.approx(0.0, abs=1e-9)
        assert neg_hess.toarray()[0, 0] == pytest.approx(len(homog_points), rel=1e-9)

    def test_gradient_matches_finite_difference(self, square10, mesh10,
                                                homog_points, fem10):
        comps = [
            model.intercept("a"),
            model.spatial_field("s", spde.matern_2d(
                mesh10, fem10, spde.PcPrior(5.0, 0.99, 1.0, 0.01))),
        ]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["a", "s"])
        spec = model.ModelSpec(comps, [lik], mesh10)
        rng = np.random.Generator(np.random.Philox(99))
        x = 0.1 * rng.standard_normal(spec.latent_dim)
        grad, neg_hess = spec.loglik_grad_hess(x)
        h = 1e-6
        for k in [0, 1, spec.latent_dim // 2, spec.latent_dim - 1]:
            e = np.zeros_like(x)
            e[k] = h
            fd = (spec.loglik(x + e) - spec.loglik(x - e)) / (2 * h)
            assert grad[k] == pytest.approx(fd, rel=1e-4, abs=1e-6)

    def test_hessian_is_neg_curvature(self, homog_spec):
        x = np.array([0.2])
        h = 1e-5
        fd = (homog_spec.loglik(x + h) - 2 * homog_spec.loglik(x)
              + homog_spec.loglik(x - h)) / h**2
        _, neg_hess = homog_spec.loglik_grad_hess(x)
        assert neg_hess.toarray()[0, 0] == pytest.approx(-fd, rel=1e-4)

    def test_two_patterns_additive(self, square10, mesh10, homog_points):
        comps = [model.intercept("a"), model.intercept("b")]
        lik1 = model.LikelihoodDef("p1", homog_points, square10, ["a"])
        lik2 = model.LikelihoodDef("p2", homog_points[:100], square10, ["b"])
        spec = model.ModelSpec(comps, [lik1, lik2], mesh10)
        spec1 = model.ModelSpec([comps[0]], [lik1], mesh10)
        x = np.array([0.1, -0.4])
        got = spec.loglik(x)
        part2 = 100 * (-0.4) - 100.0 * np.exp(-0.4)
        assert got == pytest.approx(spec1.loglik(x[:1]) + part2, rel=1e-9)


class TestDesign:
    def test_intercept_column(self, homog_spec, homog_points):
        a_ev, a_ip, w = homog_spec.design("pat")
        assert a_ev.shape == (len(homog_points), 1)
        assert np.all(a_ev.toarray() == 1.0)

    def test_field_node_block_identity(self, square10, mesh10, homog_points, fem10):
        comps = [model.spatial_field("s", spde.matern_2d(
            mesh10, fem10, spde.PcPrior(5.0, 0.99, 1.0, 0.01)))]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["s"])
        spec = model.ModelSpec(comps, [lik], mesh10)
        _, a_ip, _ = spec.design("pat")
        assert (a_ip != sp.identity(mesh10.n_vertices)).nnz == 0

    def test_linear_column_is_covariate(self, square10, mesh10, homog_points,
                                        dist_raster):
        comps = [model.intercept("a"), model.linear_effect("d", dist_raster)]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["a", "d"])
        spec = model.ModelSpec(comps, [lik], mesh10)
        a_ev, _, _ = spec.design("pat")
        col = a_ev.toarray()[:, 1]
        expect = geometry.raster_lookup(dist_raster, homog_points)
        assert np.allclose(col, expect)

    def test_smooth_block_partition_of_unity(self, square10, mesh10,
                                             homog_points, dist_raster,
                                             dist_spde):
        comps = [model.intercept("a"),
                 model.smooth_effect("d", dist_raster, dist_spde)]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["a", "d"])
        spec = model.ModelSpec(comps, [lik], mesh10)
        a_ev, _, _ = spec.design("pat")
        block = a_ev.toarray()[:, spec.block("d")]
        assert np.allclose(block.sum(axis=1), 1.0, atol=1e-9)

    def test_log_intensity_matches_design(self, homog_spec):
        pts = [[2.0, 3.0], [7.5, 1.0]]
        eta = homog_spec.log_intensity([0.7], "pat", pts)
        assert np.allclose(eta, 0.7)

    def test_unknown_pattern(self, homog_spec):
        with pytest.raises(InvalidGeometryError):
            homog_spec.design("nope")


class TestPriors:
    def test_q_prior_blocks(self, square10, mesh10, homog_points, fem10,
                            dist_raster):
        comps = [
            model.intercept("a"),
            model.spatial_field("s", spde.matern_2d(
                mesh10, fem10, spde.PcPrior(5.0, 0.99, 1.0, 0.01))),
            model.linear_effect("d", dist_raster, precision=1000.0),
        ]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["a", "s", "d"])
        spec = model.ModelSpec(comps, [lik], mesh10)
        q, proper = spec.q_prior(spec.hyper_init())
        assert q.shape == (spec.latent_dim, spec.latent_dim)
        # intercept block improper (flat), so excluded from proper list
        assert q[0, 0] == 0.0
        assert len(proper) == 2
        assert q[spec.latent_dim - 1, spec.latent_dim - 1] == 1000.0
        expected = comps[1].spde.precision(2.5, 0.5)
        sub = q[spec.block("s"), spec.block("s")]
        assert abs(sub - expected).max() < 1e-10

    def test_hyper_logprior_jacobian(self, square10, mesh10, homog_points, fem10):
        prior = spde.PcPrior(5.0, 0.99, 1.0, 0.01)
        comps = [model.spatial_field("s", spde.matern_2d(mesh10, fem10, prior))]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["s"])
        spec = model.ModelSpec(comps, [lik], mesh10)
        r, s = 3.0, 0.7
        got = spec.hyper_logprior([np.log(r), np.log(s)])
        expect = spde.pc_prior_logdens(r, s, prior) + np.log(r) + np.log(s)
        assert got == pytest.approx(expect, rel=1e-12)

    def test_constraint_matrix_none(self, homog_spec):
        a, e = homog_spec.constraint_matrix()
        assert a is None and e is None

    def test_constraint_matrix_rw2(self, square10, mesh10, homog_points,
                                   dist_raster):
        m1 = meshing.build_mesh_1d(0.0, 16.0, 20, degree=2)
        rw2 = spde.rw2_model(m1, meshing.fem_1d(m1))
        comps = [model.intercept("a"),
                 model.smooth_effect("d", dist_raster, rw2)]
        lik = model.LikelihoodDef("pat", homog_points, square10, ["a", "d"])
        spec = model.ModelSpec(comps, [lik], mesh10)
        a, e = spec.constraint_matrix()
        assert a.shape == (1, spec.latent_dim)
        assert np.all(a[0, spec.block("d")] == 1.0)
        assert a[0, 0] == 0.0
        assert e.tolist() == [0.0]
