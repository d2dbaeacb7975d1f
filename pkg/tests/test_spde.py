import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from lgcp import meshing, spde
from lgcp.errors import InvalidGeometryError


class TestParams:
    def test_kappa_hand_value(self):
        # nu = 1 in 2D, kappa = sqrt(8 nu) / range
        p = spde.MaternParams(range=10.0, sigma=1.0, d=2)
        assert p.kappa == pytest.approx(math.sqrt(8.0) / 10.0)
        assert p.kappa == pytest.approx(0.282842712, abs=1e-8)

    def test_tau_hand_value(self):
        # sigma^2 = 1 / (4 pi kappa^2 tau^2) for nu = 1, d = 2
        p = spde.MaternParams(range=10.0, sigma=1.0, d=2)
        expect = 1.0 / (math.sqrt(4 * math.pi) * p.kappa)
        assert p.tau == pytest.approx(expect, rel=1e-12)
        assert p.tau == pytest.approx(0.997355, abs=1e-5)

    def test_round_trip(self):
        for r, s, d in [(10, 1, 2), (2.5, 0.3, 2), (4, 2, 1)]:
            kappa, tau = spde.params_from_range_sigma(r, s, d=d)
            r2, s2 = spde.range_sigma_from_params(kappa, tau, d=d)
            assert r2 == pytest.approx(r, rel=1e-12)
            assert s2 == pytest.approx(s, rel=1e-12)

    def test_smoothness(self):
        assert spde.smoothness(2) == pytest.approx(1.0)
        assert spde.smoothness(1) == pytest.approx(1.5)

    def test_invalid(self):
        with pytest.raises(InvalidGeometryError):
            spde.MaternParams(range=-1.0, sigma=1.0)
        with pytest.raises(InvalidGeometryError):
            spde.smoothness(3)


class TestMaternCov:
    def test_sigma2_at_zero(self):
        p = spde.MaternParams(range=5.0, sigma=2.0)
        assert spde.matern_cov(0.0, p) == pytest.approx(4.0)

    def test_correlation_at_nominal_range(self):
        # defining property of the nominal range: correlation ~ 0.14 there
        p = spde.MaternParams(range=5.0, sigma=1.0)
        c = spde.matern_cov(5.0, p)
        assert c == pytest.approx(0.14, abs=0.01)

    def test_monotone_decreasing(self):
        p = spde.MaternParams(range=5.0, sigma=1.0)
        d = np.linspace(0, 20, 100)
        c = spde.matern_cov(d, p)
        assert np.all(np.diff(c) < 0)
        assert c[-1] < 0.01


class TestPcPrior:
    def test_lambda_hand_values(self):
        pr = spde.PcPrior(10.0, 0.99, 1.0, 0.01)
        assert pr.lambda_range(2) == pytest.approx(-math.log(0.99) * 10.0)
        assert pr.lambda_sigma == pytest.approx(-math.log(0.01))

    def test_density_integrates_to_one(self):
        # separable density: integrate each marginal factor numerically
        pr = spde.PcPrior(10.0, 0.99, 1.0, 0.01)
        s = np.linspace(1e-6, 10.0, 20001)
        base_r = 7.0
        dens_s = np.exp([spde.pc_prior_logdens(base_r, x, pr) for x in s])
        lam_r = pr.lambda_range(2)
        range_factor = math.exp(
            math.log(1.0) + math.log(lam_r) + (-2.0) * math.log(base_r)
            - lam_r / base_r)
        assert np.trapezoid(dens_s / range_factor, s) == pytest.approx(1.0, abs=1e-3)
        r = np.geomspace(1e-5, 1e6, 200001)
        dens_r = lam_r * r**-2.0 * np.exp(-lam_r / r)
        assert np.trapezoid(dens_r, r) == pytest.approx(1.0, abs=1e-3)

    def test_tail_calibration(self):
        # P(sigma > sigma0) = alpha_sigma under the exponential marginal
        pr = spde.PcPrior(10.0, 0.99, 1.0, 0.01)
        assert math.exp(-pr.lambda_sigma * 1.0) == pytest.approx(0.01, rel=1e-12)
        # P(range < r0) = alpha_r under the Frechet-type range marginal
        lam = pr.lambda_range(2)
        assert math.exp(-lam * 10.0 ** (-1.0)) == pytest.approx(0.99, rel=1e-12)

    def test_fixed_range_drops_range_factor(self):
        pr = spde.PcPrior(10.0, 0.99, 1.0, 0.01, fixed_range=True)
        a = spde.pc_prior_logdens(5.0, 0.7, pr)
        b = spde.pc_prior_logdens(50.0, 0.7, pr)
        assert a == pytest.approx(b)

    def test_invalid_ranges(self):
        pr = spde.PcPrior(10.0, 0.99, 1.0, 0.01)
        assert spde.pc_prior_logdens(-1.0, 1.0, pr) == -math.inf
        assert spde.pc_prior_logdens(1.0, 0.0, pr) == -math.inf


class TestPrecision:
    def test_symmetry_and_spd(self, spde10):
        q = spde10.precision(3.0, 1.0)
        assert abs(q - q.T).max() < 1e-10
        rng = np.random.Generator(np.random.Philox(17))
        for _ in range(10):
            v = rng.standard_normal(q.shape[0])
            assert v @ (q @ v) > 0

    def test_constant_vector_value(self, spde10, fem10):
        # G annihilates constants, so Q 1 = tau^2 kappa^4 C 1
        kappa, tau = spde.params_from_range_sigma(3.0, 1.0)
        q = spde10.precision(3.0, 1.0)
        ones = np.ones(q.shape[0])
        assert np.allclose(q @ ones, tau**2 * kappa**4 * fem10.c, atol=1e-8)

    def test_marginal_variance_interior(self, mesh10, spde10):
        # Q^-1 diagonal ~ sigma^2 away from the outer boundary
        q = spde10.precision(2.0, 1.0).tocsc()
        lu = spla.splu(q)
        n = q.shape[0]
        eye_cols = np.eye(n)
        inv_diag = np.einsum("ij,ij->j", eye_cols, lu.solve(eye_cols))
        center = np.linalg.norm(mesh10.vertices - [5.0, 5.0], axis=1) < 2.0
        mean_var = inv_diag[center].mean()
        assert mean_var == pytest.approx(1.0, rel=0.2)

    def test_empirical_correlation_matches_matern(self, mesh10, spde10):
        q = spde10.precision(3.0, 1.0).tocsc()
        lu = spla.splu(q)
        k = int(np.argmin(np.linalg.norm(mesh10.vertices - [5.0, 5.0], axis=1)))
        e = np.zeros(q.shape[0])
        e[k] = 1.0
        col = lu.solve(e)
        corr = col / col[k]
        d = np.linalg.norm(mesh10.vertices - mesh10.vertices[k], axis=1)
        p = spde.MaternParams(range=3.0, sigma=1.0)
        band = (d > 2.5) & (d < 3.5)
        expect = spde.matern_cov(d[band], p)
        assert np.mean(np.abs(corr[band] - expect)) < 0.05

    def test_invalid_kappa(self, fem10):
        from lgcp.errors import AssemblyError
        with pytest.raises(AssemblyError):
            spde.precision_alpha2(fem10, -1.0, 1.0)


class TestModels:
    def test_matern_2d_shape(self, mesh10, spde10):
        assert spde10.size == mesh10.n_vertices
        assert spde10.n_hyper == 2
        assert not spde10.constrain_sum_to_zero

    def test_matern_1d(self):
        m = meshing.build_mesh_1d(0.0, 22.0, 20, degree=2)
        fem = meshing.fem_1d(m)
        mod = spde.matern_1d(m, fem, spde.PcPrior(2.0, 0.99, 1.0, 0.01))
        assert mod.size == 20
        assert mod.d == 1
        assert mod.n_hyper == 2
        assert mod.constrain_sum_to_zero
        q = mod.precision(2.0, 1.0)
        assert q.shape == (20, 20)
        assert abs(q - q.T).max() < 1e-10

    def test_matern_1d_marginal_variance(self):
        m = meshing.build_mesh_1d(-30.0, 52.0, 200, degree=1)
        fem = meshing.fem_1d(m)
        mod = spde.matern_1d(m, fem, spde.PcPrior(2.0, 0.99, 1.0, 0.01))
        q = mod.precision(4.0, 1.5).tocsc()
        inv = np.linalg.inv(q.toarray())
        interior = (m.knots > -10.0) & (m.knots < 32.0)
        assert np.diag(inv)[interior].mean() == pytest.approx(1.5**2, rel=0.1)

    def test_rw2_single_hyper(self):
        m = meshing.build_mesh_1d(0.0, 22.0, 20, degree=2)
        fem = meshing.fem_1d(m)
        mod = spde.rw2_model(m, fem)
        assert mod.n_hyper == 1
        assert mod.prior.fixed_range
        assert mod.constrain_sum_to_zero
        # prior density independent of the (fixed) range argument
        assert mod.hyper_logprior(10.0, 0.5) == pytest.approx(
            mod.hyper_logprior(99.0, 0.5))

    def test_rw2_smoothness_penalty(self):
        # at a large fixed range the precision penalizes curvature:
        # quadratic trends cost much less than oscillation
        m = meshing.build_mesh_1d(0.0, 22.0, 40, degree=1)
        fem = meshing.fem_1d(m)
        mod = spde.rw2_model(m, fem, fixed_range=10.0)
        q = mod.precision(10.0, 1.0)
        lin = m.knots / 22.0
        osc = np.cos(m.knots * 2.0)
        assert lin @ (q @ lin) < 0.01 * (osc @ (q @ osc))
