import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rbbm.beam_model import BeamParams
from rbbm.geometry import Pose, ScanGeometry, SegmentMap, rectangle, simulate_ideal_scan
from rbbm.metrics import default_edges, hellinger_distance
from rbbm.scan_model import (GridSpec, LocalRegion, RegionShape, Scan, ScanMode,
                             ScanModelConfig, beam_marginal, beam_marginal_binned, cell_seed,
                             fit_gaussian_scan, inflated_sigma, log_mean_exp, probability_map,
                             sample_region_poses, scan_loglik_gaussian_baseline,
                             scan_loglik_independent, scan_loglik_sample_based)
from rbbm.scenarios import CORNER_REGION, room_with_box

ROOM = SegmentMap(rectangle(0.0, 0.0, 4.0, 3.0), 10.0)
POSE = Pose(1.0, 1.2, 0.3)
GEOM = ScanGeometry.fan(7, math.radians(180.0))
PURE = BeamParams(0.05, 0.0, 0.0, 0.0, 10.0)
MIXED = BeamParams(0.05, 0.3, 0.1, 0.02, 10.0)


def noisy_scan(pose=POSE, seed=0, sd=0.03):
    z = simulate_ideal_scan(ROOM, pose, GEOM)
    z = z + np.random.default_rng(seed).normal(0, sd, z.size)
    return Scan(np.clip(z, 0, 10.0), GEOM)


class TestRegion:
    def test_diameter(self):
        r = LocalRegion(0.1, 0.2, euclid_weight=2.0, angular_weight=0.5)
        assert r.diameter == pytest.approx(2 * (2 * 0.1 + 0.5 * 0.2))

    def test_inflated_sigma(self):
        assert inflated_sigma(0.01, LocalRegion(), C=20) == 0.01
        r = LocalRegion(0.01, math.radians(5))
        assert inflated_sigma(0.01, r) == pytest.approx(0.01 * (1 + 20 * math.sqrt(r.diameter)))

    @pytest.mark.parametrize("kw", [dict(trans_sigma=-1), dict(euclid_weight=0,
                                                               angular_weight=0)])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            LocalRegion(**kw)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ScanModelConfig(L=0)
        with pytest.raises(ValueError):
            ScanModelConfig(mode="sometimes")


class TestRegionSampling:
    def test_gaussian_moments(self):
        poses = sample_region_poses(POSE, LocalRegion(0.1, 0.05), 20_000, 3)
        assert poses.shape == (20_000, 3)
        np.testing.assert_allclose(poses.mean(axis=0), [1.0, 1.2, 0.3], atol=3e-3)
        np.testing.assert_allclose(poses.std(axis=0), [0.1, 0.1, 0.05], rtol=0.03)

    def test_disk_support(self):
        r = LocalRegion(0.1, 0.05, shape=RegionShape.DISK)
        poses = sample_region_poses(POSE, r, 5000, 3)
        assert np.all(np.hypot(poses[:, 0] - 1.0, poses[:, 1] - 1.2) <= 0.1 + 1e-12)
        assert np.all(np.abs(poses[:, 2] - 0.3) <= 0.05 + 1e-12)
        # uniform on the disk: radius^2 is uniform
        rr = np.hypot(poses[:, 0] - 1.0, poses[:, 1] - 1.2) ** 2 / 0.01
        assert stats.kstest(rr, "uniform").pvalue > 1e-3

    def test_zero_region_repeats_pose(self):
        poses = sample_region_poses(POSE, LocalRegion(), 4, 0)
        np.testing.assert_allclose(poses, np.tile([1.0, 1.2, 0.3], (4, 1)), atol=1e-15)

    def test_seeded(self):
        a = sample_region_poses(POSE, CORNER_REGION, 10, 42)
        b = sample_region_poses(POSE, CORNER_REGION, 10, 42)
        np.testing.assert_array_equal(a, b)


class TestScan:
    def test_shape_checked(self):
        with pytest.raises(ValueError):
            Scan(np.ones(3), GEOM)

    def test_range_checked(self):
        with pytest.raises(ValueError):
            scan_loglik_independent(Scan(np.full(7, 11.0), GEOM), POSE, ROOM, PURE)

    def test_log_mean_exp(self):
        v = np.array([-1000.0, -1001.0, -1002.0])
        assert log_mean_exp(v) == pytest.approx(-1000 + math.log((1 + math.e ** -1
                                                                   + math.e ** -2) / 3))


class TestCollapse:
    def test_single_pose_static_is_gaussian_product(self):
        scan = noisy_scan()
        cfg = ScanModelConfig(L=1, C=20.0, mode=ScanMode.STATIC)
        got = scan_loglik_sample_based(scan, POSE, ROOM, PURE, LocalRegion(), cfg, 0)
        z_star = simulate_ideal_scan(ROOM, POSE, GEOM)
        ref = stats.norm.logpdf(scan.z, z_star, 0.05).sum()
        assert got == pytest.approx(ref, abs=1e-10)
        assert scan_loglik_independent(scan, POSE, ROOM, PURE) == pytest.approx(ref, abs=1e-10)

    def test_dynamic_single_pose_is_independent_mixture(self):
        scan = noisy_scan()
        cfg = ScanModelConfig(L=3, mode=ScanMode.DYNAMIC)
        got = scan_loglik_sample_based(scan, POSE, ROOM, MIXED, LocalRegion(), cfg, 0)
        assert got == pytest.approx(scan_loglik_independent(scan, POSE, ROOM, MIXED), abs=1e-10)

    def test_degenerate_gaussian_baseline(self):
        scan = noisy_scan()
        got = scan_loglik_gaussian_baseline(scan, POSE, ROOM, PURE, LocalRegion(), 10, 0)
        z_star = simulate_ideal_scan(ROOM, POSE, GEOM)
        assert got == pytest.approx(stats.norm.logpdf(scan.z, z_star, 0.05).sum(), abs=1e-8)

    def test_baseline_needs_two_samples(self):
        with pytest.raises(ValueError):
            fit_gaussian_scan(ROOM, POSE, GEOM, PURE, CORNER_REGION, 1, 0)


class TestSampleBased:
    def test_matches_hand_average(self):
        scan = noisy_scan()
        region = LocalRegion(0.02, 0.02)
        cfg = ScanModelConfig(L=20, C=5.0)
        poses = sample_region_poses(POSE, region, 20, 9)
        sigma = 0.05 * (1 + 5 * math.sqrt(region.diameter))
        per_pose = [stats.norm.logpdf(scan.z, simulate_ideal_scan(ROOM, Pose(*p), GEOM),
                                      sigma).sum() for p in poses]
        ref = math.log(np.mean(np.exp(per_pose)))
        got = scan_loglik_sample_based(scan, POSE, ROOM, PURE, region, cfg, 9)
        assert got == pytest.approx(ref, rel=1e-10)

    def test_true_pose_beats_distant_pose(self):
        scan = noisy_scan()
        cfg = ScanModelConfig(L=50)
        good = scan_loglik_sample_based(scan, POSE, ROOM, PURE, CORNER_REGION, cfg, 1)
        bad = scan_loglik_sample_based(scan, Pose(3.0, 2.0, 2.0), ROOM, PURE, CORNER_REGION,
                                       cfg, 1)
        assert good > bad

    def test_dynamic_is_robust_to_outliers(self):
        z = noisy_scan().z.copy()
        z[2] = 0.3
        scan = Scan(z, GEOM)
        region = LocalRegion(0.005, 0.005)
        static = scan_loglik_sample_based(scan, POSE, ROOM, MIXED, region,
                                          ScanModelConfig(L=20), 0)
        dynamic = scan_loglik_sample_based(scan, POSE, ROOM, MIXED, region,
                                           ScanModelConfig(L=20, mode=ScanMode.DYNAMIC), 0)
        assert np.isfinite(dynamic) and dynamic > static


class TestMarginals:
    @pytest.fixture(scope="class")
    @staticmethod
    def scenario():
        return room_with_box()

    def test_static_mass(self, scenario):
        cfg = ScanModelConfig(L=150)
        grid = np.linspace(0, 5, 5001)
        params = BeamParams(0.01, 0.0, 0.0, 0.0, 5.0)
        for b in (scenario.grazing_beam, scenario.smooth_beam):
            m = beam_marginal(b, scenario.pose, scenario.segmap, params, CORNER_REGION, cfg,
                              grid, 0, scenario.geometry)
            assert m.mass() == pytest.approx(1.0, abs=2e-3)
            # the baseline is unbounded, so only its in-range share is on the grid
            g = beam_marginal(b, scenario.pose, scenario.segmap, params, CORNER_REGION, cfg,
                              grid, 0, scenario.geometry, "gaussian")
            fit = fit_gaussian_scan(scenario.segmap, scenario.pose, scenario.geometry, params,
                                    CORNER_REGION, 150, 0)
            dist = stats.norm(fit.mean[b], math.sqrt(fit.cov[b, b]))
            assert g.mass() == pytest.approx(dist.cdf(5) - dist.cdf(0), abs=1e-5)

    def test_dynamic_mass(self, scenario):
        params = BeamParams(0.01, 0.3, 0.1, 0.05, 5.0)
        cfg = ScanModelConfig(L=150, mode=ScanMode.DYNAMIC)
        m = beam_marginal(scenario.smooth_beam, scenario.pose, scenario.segmap, params,
                          CORNER_REGION, cfg, np.linspace(0, 5, 20001), 0, scenario.geometry)
        assert m.atom == pytest.approx(0.05)
        assert m.mass() == pytest.approx(1.0, abs=2e-3)

    def test_grazing_beam_is_bimodal(self, scenario):
        params = BeamParams(0.01, 0.0, 0.0, 0.0, 5.0)
        cfg = ScanModelConfig(L=150)
        grid = np.linspace(0, 5, 2001)
        args = (scenario.grazing_beam, scenario.pose, scenario.segmap, params, CORNER_REGION,
                cfg, grid, 0, scenario.geometry)
        assert beam_marginal(*args).local_maxima().size >= 2
        assert beam_marginal(*args, model="gaussian").local_maxima().size == 1

    def test_smooth_beam_has_one_dominant_mode(self, scenario):
        params = BeamParams(0.01, 0.0, 0.0, 0.0, 5.0)
        m = beam_marginal(scenario.smooth_beam, scenario.pose, scenario.segmap, params,
                          CORNER_REGION, ScanModelConfig(L=150), np.linspace(0, 5, 2001), 0,
                          scenario.geometry)
        peaks = np.interp(m.local_maxima(), m.z, m.density)
        assert np.sum(peaks > 0.1 * peaks.max()) == 1

    def test_binned_matches_gridded(self, scenario):
        params = BeamParams(0.01, 0.0, 0.0, 0.0, 5.0)
        cfg = ScanModelConfig(L=150)
        edges = default_edges(5.0, 50)
        binned = beam_marginal_binned(scenario.grazing_beam, scenario.pose, scenario.segmap,
                                      params, CORNER_REGION, cfg, edges, 0, scenario.geometry)
        grid = np.linspace(0, 5, 50_001)
        m = beam_marginal(scenario.grazing_beam, scenario.pose, scenario.segmap, params,
                          CORNER_REGION, cfg, grid, 0, scenario.geometry)
        cell = np.minimum((grid / 0.1).astype(int), 49)
        ref = np.bincount(cell, weights=m.density * (grid[1] - grid[0]), minlength=50)
        np.testing.assert_allclose(binned.mass, ref / ref.sum(), atol=2e-4)

    def test_binned_dynamic_sums_to_one(self, scenario):
        params = BeamParams(0.01, 0.4, 0.1, 0.05, 5.0)
        out = beam_marginal_binned(scenario.grazing_beam, scenario.pose, scenario.segmap,
                                   params, CORNER_REGION,
                                   ScanModelConfig(L=50, mode=ScanMode.DYNAMIC),
                                   default_edges(5.0, 100), 0, scenario.geometry)
        assert out.mass.sum() == pytest.approx(1.0)
        assert out.mass[-1] >= 0.05

    def test_sample_model_closer_to_reference(self, scenario):
        params = BeamParams(0.01, 0.0, 0.0, 0.0, 5.0)
        edges = default_edges(5.0, 100)
        b = scenario.grazing_beam
        common = (scenario.pose, scenario.segmap, params, CORNER_REGION)
        ref = beam_marginal_binned(b, *common, ScanModelConfig(L=10_000), edges, 99,
                                   scenario.geometry)
        cfg = ScanModelConfig(L=150)
        sample = beam_marginal_binned(b, *common, cfg, edges, 0, scenario.geometry)
        gauss = beam_marginal_binned(b, *common, cfg, edges, 0, scenario.geometry, "gaussian")
        assert hellinger_distance(sample, ref) < hellinger_distance(gauss, ref)

    def test_csv(self, scenario, tmp_path):
        m = beam_marginal(0, scenario.pose, scenario.segmap, PURE, CORNER_REGION,
                          ScanModelConfig(L=5), np.linspace(0, 5, 11), 0, scenario.geometry)
        m.to_csv(tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "z,density" and len(lines) == 12

    def test_bad_inputs(self, scenario):
        with pytest.raises(IndexError):
            beam_marginal(99, scenario.pose, scenario.segmap, PURE, CORNER_REGION,
                          ScanModelConfig(), np.linspace(0, 5, 5), 0, scenario.geometry)
        with pytest.raises(ValueError):
            beam_marginal(0, scenario.pose, scenario.segmap, PURE, CORNER_REGION,
                          ScanModelConfig(), np.linspace(0, 5, 5), 0, scenario.geometry, "gp")


class TestProbabilityMap:
    SPEC = GridSpec(0.5, 3.5, 7, 0.5, 2.5, 5, heading=0.3)

    def test_peak_near_true_pose(self):
        scan = noisy_scan(sd=0.01)
        pm = probability_map(scan, ROOM, PURE, LocalRegion(0.05, 0.02),
                             ScanModelConfig(L=30), self.SPEC, 0)
        j, i = np.unravel_index(np.argmax(pm.loglik), pm.loglik.shape)
        assert abs(pm.xs[i] - 1.0) <= 0.5 and abs(pm.ys[j] - 1.2) <= 0.5
        assert pm.loglik.shape == (5, 7)

    def test_parallel_matches_serial(self):
        scan = noisy_scan()
        args = (scan, ROOM, MIXED, LocalRegion(0.05, 0.02),
                ScanModelConfig(L=10, mode=ScanMode.DYNAMIC), self.SPEC, 5)
        a = probability_map(*args)
        b = probability_map(*args, n_jobs=4)
        np.testing.assert_array_equal(a.loglik, b.loglik)

    def test_cell_seeds_distinct(self):
        draws = {np.random.default_rng(cell_seed(1, k)).integers(2 ** 62) for k in range(100)}
        assert len(draws) == 100

    def test_heading_average(self):
        scan = noisy_scan()
        spec = GridSpec(1.0, 1.0, 1, 1.2, 1.2, 1, headings=(0.3, 0.3))
        pm = probability_map(scan, ROOM, PURE, LocalRegion(), ScanModelConfig(L=1), spec, 0)
        assert pm.loglik[0, 0] == pytest.approx(scan_loglik_independent(scan, POSE, ROOM, PURE))

    def test_csv(self, tmp_path):
        pm = probability_map(noisy_scan(), ROOM, PURE, LocalRegion(), ScanModelConfig(L=1),
                             GridSpec(1, 2, 2, 1, 3, 3), 0)
        pm.to_csv(tmp_path / "p.csv", log=True)
        rows = (tmp_path / "p.csv").read_text().splitlines()
        assert rows[0] == "y\\x,1.0,2.0"
        assert len(rows) == 4
        assert float(rows[1].split(",")[1]) == pm.loglik[0, 0]


@settings(max_examples=25)
@given(x=st.floats(0.3, 3.7), y=st.floats(0.3, 2.7), h=st.floats(-3.1, 3.1),
       seed=st.integers(0, 1000))
def test_sample_based_finite_and_seeded(x, y, h, seed):
    scan = noisy_scan()
    cfg = ScanModelConfig(L=10, mode=ScanMode.DYNAMIC)
    a = scan_loglik_sample_based(scan, Pose(x, y, h), ROOM, MIXED, CORNER_REGION, cfg, seed)
    b = scan_loglik_sample_based(scan, Pose(x, y, h), ROOM, MIXED, CORNER_REGION, cfg, seed)
    assert np.isfinite(a) and a == b
