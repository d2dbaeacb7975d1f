import numpy as np
import pytest

from lgcp import geometry, simulate
from lgcp.errors import DataError, LgcpError


class TestSampleField:
    def test_reproducible(self, spde10):
        a = simulate.sample_field(spde10, 4.0, 1.0, seed=5)
        b = simulate.sample_field(spde10, 4.0, 1.0, seed=5)
        c = simulate.sample_field(spde10, 4.0, 1.0, seed=6)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_marginal_sd_scale(self, spde10, mesh10):
        draws = np.stack([
            simulate.sample_field(spde10, 3.0, 0.8, seed=s) for s in range(40)
        ])
        center = np.linalg.norm(mesh10.vertices - [5.0, 5.0], axis=1) < 2.0
        sd = draws[:, center].std()
        assert sd == pytest.approx(0.8, rel=0.25)


class TestSimulateLgcp:
    def test_homogeneous_count(self, square10, mesh10):
        # intercept log 5 over |W| = 100: E[N] = 500; average multiple seeds
        counts = [
            len(simulate.simulate_lgcp(
                simulate.SimScenario(sampler=square10, intercept=np.log(5.0),
                                     seed=s), mesh10))
            for s in range(20)
        ]
        assert np.mean(counts) == pytest.approx(500.0, rel=0.05)

    def test_points_inside_window(self, square10, mesh10):
        scn = simulate.SimScenario(sampler=square10, intercept=1.0, seed=3)
        pts = simulate.simulate_lgcp(scn, mesh10)
        assert np.all(geometry.points_in_polygon(pts, square10))

    def test_deterministic(self, square10, mesh10):
        scn = simulate.SimScenario(sampler=square10, intercept=1.5, seed=11)
        a = simulate.simulate_lgcp(scn, mesh10)
        b = simulate.simulate_lgcp(scn, mesh10)
        assert np.array_equal(a, b)

    def test_field_scenario_needs_spde(self, square10, mesh10):
        scn = simulate.SimScenario(sampler=square10, intercept=0.0,
                                   field_range=4.0, field_sigma=1.0, seed=1)
        with pytest.raises(DataError):
            simulate.simulate_lgcp(scn, mesh10)

    def test_field_increases_clustering(self, square10, mesh10, spde10):
        # a strong field overdisperses quadrat counts relative to Poisson
        def quadrat_var_ratio(pts):
            h, _, _ = np.histogram2d(pts[:, 0], pts[:, 1],
                                     bins=5, range=[[0, 10], [0, 10]])
            return h.var() / h.mean()

        ratios_f, ratios_h = [], []
        for s in range(8):
            f = simulate.simulate_lgcp(
                simulate.SimScenario(sampler=square10, intercept=1.0,
                                     field_range=3.0, field_sigma=1.2, seed=s),
                mesh10, spde10)
            hpts = simulate.simulate_lgcp(
                simulate.SimScenario(sampler=square10, intercept=1.0, seed=s),
                mesh10)
            ratios_f.append(quadrat_var_ratio(f))
            ratios_h.append(quadrat_var_ratio(hpts))
        assert np.mean(ratios_f) > 2.0 * np.mean(ratios_h)

    def test_overflow_guard(self, square10, mesh10):
        scn = simulate.SimScenario(sampler=square10, intercept=700.0, seed=0)
        with pytest.raises(LgcpError):
            simulate.simulate_lgcp(scn, mesh10)


class TestInjectCluster:
    def test_count_and_location(self, square10):
        base = np.array([[1.0, 1.0]])
        out = simulate.inject_cluster(base, (5.0, 5.0), 20, 0.5, square10,
                                      seed=42)
        assert out.shape == (21, 2)
        assert np.array_equal(out[0], base[0])
        d = np.linalg.norm(out[1:] - [5.0, 5.0], axis=1)
        assert d.max() < 3.0
        assert d.mean() < 1.2

    def test_zero_noop(self, square10):
        base = np.array([[1.0, 1.0]])
        out = simulate.inject_cluster(base, (5.0, 5.0), 0, 0.5, square10)
        assert np.array_equal(out, base)

    def test_respects_window(self, square10):
        out = simulate.inject_cluster(np.zeros((0, 2)), (0.1, 0.1), 200, 1.0,
                                      square10, seed=7)
        assert np.all(geometry.points_in_polygon(out, square10))

    def test_far_source_rejected(self, square10):
        with pytest.raises(LgcpError):
            simulate.inject_cluster(np.zeros((0, 2)), (50.0, 50.0), 1, 0.5,
                                    square10, seed=0)

    def test_deterministic(self, square10):
        a = simulate.inject_cluster(np.zeros((0, 2)), (5.0, 5.0), 10, 0.5,
                                    square10, seed=9)
        b = simulate.inject_cluster(np.zeros((0, 2)), (5.0, 5.0), 10, 0.5,
                                    square10, seed=9)
        assert np.array_equal(a, b)


class TestPatternCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.Generator(np.random.Philox(55))
        pts = rng.uniform(0, 10, size=(30, 2))
        path = tmp_path / "p.csv"
        simulate.write_patterns_csv(path, {"cases": pts})
        back = simulate.read_pattern_csv(path)
        assert np.array_equal(back, pts)

    def test_headerless(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("1.5,2.5\n3.5,4.5\n")
        back = simulate.read_pattern_csv(path)
        assert back.tolist() == [[1.5, 2.5], [3.5, 4.5]]

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("x,y\n1.0,2.0\noops,3.0\n")
        with pytest.raises(DataError):
            simulate.read_pattern_csv(path)
