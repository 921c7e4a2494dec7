import math

import numpy as np
import pytest

from probevolume.estimator import estimate_probe_volume, extra_record_prob, min_records
from probevolume.footprint_data import CordonSpec, crop_to_cordon
from probevolume.probe_simulator import (
    ScenarioConfig,
    SiteConfig,
    load_site_preset,
    run_regression_experiment,
    run_scenario,
    simulate_footprints,
    simulate_pass,
    summarize,
)
from probevolume.speed_model import SpeedComponent, SpeedDistribution


class TestSimulatePass:
    def test_offset_zero(self):
        # records at 0+, 30, 60, 90
        assert simulate_pass(30.0, 100.0, 1.0, 0.0) == 4

    def test_offset_near_t(self):
        # first record at ~30 m: records at 30-, 60-, 90-
        assert simulate_pass(30.0, 100.0, 1.0, 1.0 - 1e-9) == 3

    def test_expected_count_over_offsets(self):
        # E[count] over uniform offsets must equal 100/(30*1) = 10/3
        offsets = (np.arange(10_000) + 0.5) / 10_000
        counts = [simulate_pass(30.0, 100.0, 1.0, float(o)) for o in offsets]
        assert np.mean(counts) == pytest.approx(10.0 / 3.0, abs=1e-3)

    def test_count_in_allowed_set(self):
        rng = np.random.default_rng(12)
        for _ in range(500):
            s = float(rng.uniform(0.5, 45.0))
            d = float(rng.uniform(5.0, 400.0))
            t = float(rng.uniform(0.5, 6.0))
            off = float(rng.uniform(0.0, t))
            count = simulate_pass(s, d, t, off)
            n_min = min_records(s, d, t)
            assert count in (0, n_min, n_min + 1)
            if count == 0:
                assert s * t > d

    def test_rejects_bad_offset(self):
        with pytest.raises(ValueError):
            simulate_pass(30.0, 100.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            simulate_pass(30.0, 100.0, 1.0, -0.1)

    def test_mean_count_matches_unbiasedness(self):
        # empirical mean over offsets ~ U[0,t) equals n_min + p
        rng = np.random.default_rng(99)
        s, d, t = 23.7, 210.0, 3.0
        offs = rng.uniform(0.0, t, 200_000)
        counts = np.array([simulate_pass(s, d, t, float(o)) for o in offs])
        want = min_records(s, d, t) + extra_record_prob(s, d, t)
        sigma = counts.std() / math.sqrt(counts.size)
        assert abs(counts.mean() - want) < 3.5 * sigma + 1e-9


class TestRunScenario:
    def test_zero_probes(self, park):
        samples, summary = run_scenario(
            ScenarioConfig(d=300.0, t=4.0, m=0, dist=park, trials=100, seed=1)
        )
        assert np.all(samples == 0.0)
        assert summary.mean == 0.0

    def test_deterministic(self, park):
        cfg = ScenarioConfig(d=300.0, t=4.0, m=2, dist=park, trials=2000, seed=77)
        a, _ = run_scenario(cfg)
        b, _ = run_scenario(cfg)
        assert np.array_equal(a, b)

    def test_histogram_total_is_trials(self, park):
        cfg = ScenarioConfig(d=40.0, t=1.0, m=3, dist=park, trials=5000, seed=5)
        _, summary = run_scenario(cfg)
        assert int(summary.hist_counts.sum()) == 5000

    def test_scenario1_statistics(self, park):
        cfg = ScenarioConfig(d=300.0, t=4.0, m=1, dist=park, trials=10**5, seed=42)
        _, summary = run_scenario(cfg)
        assert summary.mean == pytest.approx(1.0, abs=0.01)
        assert summary.variance == pytest.approx(0.019, rel=0.05)
        assert summary.cv == pytest.approx(0.137, abs=0.005)

    def test_summarize_validates(self):
        s = summarize(np.array([1.0, 1.0, 1.0]))
        assert s.variance == 0.0


class TestFootprints:
    def test_emitted_m_hat_matches_estimator(self, park, tmp_path):
        from probevolume.footprint_data import read_footprints_csv, write_footprints_csv

        cfg = ScenarioConfig(d=300.0, t=4.0, m=5, dist=park, trials=1, seed=2718)
        records, internal = simulate_footprints(cfg)
        path = tmp_path / "f.csv"
        write_footprints_csv(path, records)
        back = read_footprints_csv(path)
        crop = crop_to_cordon(back.records, CordonSpec(0.0, 300.0), t=4.0)
        est = estimate_probe_volume(crop.sample)
        assert est.m_hat == internal  # bit-for-bit through the CSV round trip

    def test_out_of_cordon_records_present(self, park):
        cfg = ScenarioConfig(d=300.0, t=4.0, m=4, dist=park, trials=1, seed=9)
        records, _ = simulate_footprints(cfg)
        positions = np.array([r.position for r in records])
        assert np.any(positions <= 0.0)
        assert np.any(positions > 300.0)


def _uniform_sites(n, m=20, d=40.0, adt=200.0):
    dist = SpeedDistribution((SpeedComponent(20.0, 1e-9, 1.0),), 0.0, 40.0)
    return [
        SiteConfig(site_id=str(i), adt=adt, m=m, d=d, dist=dist, t=1.0)
        for i in range(n)
    ]


class TestRegressionExperiment:
    def test_identical_realizations_make_ols_equal_wls(self):
        # with identical (m_hat, volume) rows the pair fit beta = y/x holds
        # under any weights, so the two methods coincide exactly
        from probevolume import kernels

        x = np.full(4, 2.5)
        y = np.full(4, 200.0)
        uniform = np.ones(4)
        skewed = np.array([0.1, 3.0, 7.0, 0.5])
        assert kernels.all_pairs_mape(x, y, uniform) == kernels.all_pairs_mape(x, y, skewed)
        assert kernels.all_pairs_mape(x, y, uniform) == 0.0

    def test_near_deterministic_sites_agree(self):
        # point-mass speeds at a d multiple: m_hat is m up to the 1e-9 spread
        report = run_regression_experiment(_uniform_sites(3), trials=2, seed=0)
        for a, b in zip(report.mape_ols, report.mape_wls):
            assert a == pytest.approx(b, abs=1e-9)
        assert report.mean_mape_ols == pytest.approx(0.0, abs=1e-9)

    def test_rerun_is_bit_identical(self, park):
        sites = load_site_preset("table2")[:6]
        a = run_regression_experiment(sites, trials=3, seed=11)
        b = run_regression_experiment(sites, trials=3, seed=11)
        assert a == b

    def test_pair_count_all_pairs(self):
        report = run_regression_experiment(_uniform_sites(5), trials=1, seed=1)
        assert report.n_pairs == 10
        smoke = run_regression_experiment(
            _uniform_sites(5), trials=1, seed=1, all_pairs=False
        )
        assert smoke.n_pairs == 4

    def test_validation(self):
        with pytest.raises(ValueError, match="3 sites"):
            run_regression_experiment(_uniform_sites(2), trials=1, seed=0)
        with pytest.raises(ValueError, match="trials"):
            run_regression_experiment(_uniform_sites(3), trials=0, seed=0)
        with pytest.raises(ValueError, match="m must be"):
            SiteConfig("x", adt=10.0, m=0, d=10.0, dist=_uniform_sites(3)[0].dist, t=1.0)


class TestSitePreset:
    def test_loads_34_sites(self):
        sites = load_site_preset("table2")
        assert len(sites) == 34
        assert all(site.t == 1.0 for site in sites)
        by_id = {site.site_id: site for site in sites}
        assert by_id["4945"].adt == 763 and by_id["4945"].m == 107 and by_id["4945"].d == 14
        assert by_id["5121"].d == 41 and by_id["5121"].m == 75
        assert by_id["9249"].d == 7
        # 30 mph sites use the slower modelled distribution
        assert by_id["5121"].dist.components[0].mean == pytest.approx(13.41)
        assert by_id["4945"].dist.components[0].mean == pytest.approx(26.82)
