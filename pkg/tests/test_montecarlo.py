"""Shot-noise sampling, repeated trials, sweeps and backends."""

import numpy as np
import pytest

from povmdt import (
    CouplingConfig,
    EntryScenario,
    ShotModel,
    SweepSpec,
    exact_entry_tables,
    make_parametric_element,
    make_sic_povm,
    refinement_trials,
    run_trials,
    sample_counts,
    variance_sweep,
)
from povmdt import _kernels
from povmdt.estimator import tables_to_flat
from povmdt.protocol import SETTINGS

THETA_SIC = np.arccos(1 / np.sqrt(3))
N_REF = 12790


def point_x_scenario():
    """Reference scenario: theta=0, eta=1/2, g=pi/4, normalized entry."""
    elem = make_parametric_element(0.0, 0.5, 0.0)
    return EntryScenario(elem, 1, 0, np.pi / 4, scale=0.5)


@pytest.fixture
def sic_tables(sic):
    cfg = CouplingConfig.symmetric(np.pi / 4)
    return exact_entry_tables(sic.element(2), 1, 0, cfg)


class TestShotModel:
    def test_validation(self):
        with pytest.raises(ValueError, match="n_per_setting"):
            ShotModel(0)
        with pytest.raises(ValueError, match="statistics"):
            ShotModel(10, "gaussian")


class TestSampleCounts:
    def test_large_n_recovers_exact_tables(self, sic_tables):
        shot = ShotModel(10**9, "poisson", seed=5)
        sampled = sample_counts(sic_tables, shot)
        for s in SETTINGS:
            assert np.abs(sampled[s] - sic_tables[s]).max() < 1e-4

    def test_poisson_mean(self, sic_tables):
        n, trials = N_REF, 2000
        seeds = np.random.SeedSequence(9).generate_state(trials)
        acc = np.zeros(36)
        for s in seeds:
            acc += tables_to_flat(sample_counts(sic_tables, ShotModel(n, "poisson", int(s))))
        mean = acc / trials
        w = tables_to_flat(sic_tables)
        tol = 3 * np.sqrt(np.maximum(w, 1e-12) / (n * trials))
        assert (np.abs(mean - w) < np.maximum(tol, 1e-9)).all()

    def test_poisson_variance(self, sic_tables):
        """Cell variance tracks W/n, the counting-noise model."""
        n, trials = 500, 4000
        seeds = np.random.SeedSequence(21).generate_state(trials)
        cells = np.array(
            [tables_to_flat(sample_counts(sic_tables, ShotModel(n, "poisson", int(s))))
             for s in seeds]
        )
        w = tables_to_flat(sic_tables)
        big = w > 0.05
        ratio = cells.var(axis=0, ddof=1)[big] / (w[big] / n)
        assert (np.abs(ratio - 1) < 0.1).all()

    def test_multinomial_mode(self, sic_tables):
        shot = ShotModel(1000, "multinomial", seed=1)
        sampled = sample_counts(sic_tables, shot)
        for s in SETTINGS:
            counts = sampled[s] * 1000
            np.testing.assert_allclose(counts, np.round(counts), atol=1e-9)
            assert counts.sum() <= 1000

    def test_deterministic(self, sic_tables):
        shot = ShotModel(5000, "poisson", seed=77)
        a = sample_counts(sic_tables, shot)
        b = sample_counts(sic_tables, shot)
        for s in SETTINGS:
            np.testing.assert_array_equal(a[s], b[s])


class TestRunTrials:
    def test_deterministic_summary(self):
        scn = point_x_scenario()
        shot = ShotModel(N_REF, "poisson", seed=13)
        a = run_trials(scn, shot, 500)
        b = run_trials(scn, shot, 500)
        assert a == b

    def test_single_trial_flags_missing_variance(self):
        scn = point_x_scenario()
        s = run_trials(scn, ShotModel(N_REF, "poisson", seed=1), 1)
        assert np.isnan(s.sample_var_re) and np.isnan(s.sample_var_im)
        assert s.trials == 1

    def test_sample_variance_tracks_prediction(self):
        scn = point_x_scenario()
        s = run_trials(scn, ShotModel(N_REF, "poisson", seed=40), 4000)
        sample_total = s.sample_var_re + s.sample_var_im
        assert abs(sample_total - s.predicted_var) / s.predicted_var < 0.1

    def test_multinomial_statistics_agree(self):
        scn = point_x_scenario()
        s = run_trials(scn, ShotModel(N_REF, "multinomial", seed=8), 4000)
        sample_total = s.sample_var_re + s.sample_var_im
        assert abs(sample_total - s.predicted_var) / s.predicted_var < 0.1

    def test_metadata_recorded(self):
        scn = point_x_scenario()
        s = run_trials(scn, ShotModel(100, "poisson", seed=0), 10)
        assert s.backend in ("numba", "numpy")
        assert s.rng in ("numba-mt19937", "numpy-pcg64")


class TestBackends:
    def test_numpy_backend_selected_by_env(self, monkeypatch):
        monkeypatch.setenv(_kernels.ENV_VAR, "numpy")
        assert _kernels.active_backend() == "numpy"
        scn = point_x_scenario()
        s = run_trials(scn, ShotModel(N_REF, "poisson", seed=40), 2000)
        assert s.backend == "numpy" and s.rng == "numpy-pcg64"
        total = s.sample_var_re + s.sample_var_im
        assert abs(total - s.predicted_var) / s.predicted_var < 0.15

    @pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba not installed")
    def test_backends_statistically_consistent(self, monkeypatch):
        scn = point_x_scenario()
        shot = ShotModel(N_REF, "poisson", seed=4)
        monkeypatch.setenv(_kernels.ENV_VAR, "numba")
        a = run_trials(scn, shot, 3000)
        monkeypatch.setenv(_kernels.ENV_VAR, "numpy")
        b = run_trials(scn, shot, 3000)
        assert a.predicted_var == b.predicted_var
        se = np.sqrt(a.predicted_var / 3000)
        assert abs(a.mean - b.mean) < 6 * se

    def test_invalid_backend_rejected(self, monkeypatch):
        monkeypatch.setenv(_kernels.ENV_VAR, "fortran")
        with pytest.raises(ValueError, match="numba"):
            _kernels.active_backend()

    def test_multinomial_always_routes_to_numpy(self, monkeypatch):
        """numba's multinomial draw is O(n); the dispatcher pins it to numpy."""
        if not _kernels.HAS_NUMBA:
            pytest.skip("numba not installed")
        monkeypatch.setenv(_kernels.ENV_VAR, "numba")
        assert _kernels.effective_backend("multinomial") == "numpy"
        assert _kernels.effective_backend("poisson") == "numba"
        scn = point_x_scenario()
        s = run_trials(scn, ShotModel(2000, "multinomial", seed=6), 50)
        assert s.backend == "numpy" and s.rng == "numpy-pcg64"


class TestVarianceSweep:
    def test_g_grid_minimum_at_strong_coupling(self):
        """On the four-point grid the theta_sic curve bottoms out at pi/4."""
        spec = SweepSpec(
            axis="g",
            grid=(np.pi / 16, np.pi / 8, np.pi / 4, 3 * np.pi / 8),
            trials=0,
            shot=ShotModel(N_REF, "poisson", seed=0),
            theta=THETA_SIC,
            eta=0.5,
        )
        rows = variance_sweep(spec)
        transfer = [r["var_transfer"] for r in rows]
        assert int(np.argmin(transfer)) == 2
        analytic = [r["var_analytic"] for r in rows]
        np.testing.assert_allclose(transfer, analytic, rtol=1e-9)

    def test_theta_grid_strong_coupling_law(self):
        thetas = (0.0, np.pi / 4, THETA_SIC, np.pi)
        spec = SweepSpec(
            axis="theta", grid=thetas, trials=0,
            shot=ShotModel(N_REF, "poisson", seed=0), g=np.pi / 4, eta=0.5,
        )
        rows = variance_sweep(spec)
        for theta, row in zip(thetas, rows):
            want = (1 + 2 * np.sin(theta) ** 2) / (0.5 * N_REF)
            assert abs(row["var_transfer"] - want) / want < 1e-9
            assert np.isfinite(row["var_transfer"])

    def test_xi_grid_constant_variance(self, sic):
        spec = SweepSpec(
            axis="xi", grid=(1.0, 0.7, 0.3, 0.0), trials=0,
            shot=ShotModel(N_REF, "poisson", seed=0),
            povm=sic, label=2, j=1, k=0, g=np.pi / 4,
        )
        rows = variance_sweep(spec)
        vals = [r["var_transfer"] for r in rows]
        assert max(vals) - min(vals) < 1e-12

    def test_empirical_column_and_determinism(self):
        spec = SweepSpec(
            axis="theta", grid=(0.0, 0.9), trials=400,
            shot=ShotModel(N_REF, "poisson", seed=3), g=np.pi / 4, eta=0.5,
        )
        rows1 = variance_sweep(spec)
        rows2 = variance_sweep(spec)
        assert rows1 == rows2
        for r in rows1:
            assert abs(r["var_empirical"] - r["var_transfer"]) / r["var_transfer"] < 0.3

    def test_validation(self):
        shot = ShotModel(10, "poisson", seed=0)
        with pytest.raises(ValueError, match="axis"):
            SweepSpec(axis="q", grid=(0.1,), trials=0, shot=shot)
        with pytest.raises(ValueError, match="non-empty"):
            SweepSpec(axis="g", grid=(), trials=0, shot=shot)
        with pytest.raises(ValueError, match="strictly inside"):
            SweepSpec(axis="g", grid=(0.0, 0.3), trials=0, shot=shot)
        with pytest.raises(ValueError, match="povm"):
            SweepSpec(axis="xi", grid=(1.0,), trials=0, shot=shot)


class TestConvergence:
    def test_error_scales_as_inverse_sqrt_n(self):
        """Sample variance slope vs n is -1 (std slope -1/2) on log-log."""
        scn = point_x_scenario()
        ns = [1000, 10000, 100000, 1000000]
        variances = []
        for i, n in enumerate(ns):
            s = run_trials(scn, ShotModel(n, "poisson", seed=100 + i), 600)
            variances.append(s.sample_var_re + s.sample_var_im)
        slope = np.polyfit(np.log(ns), np.log(variances), 1)[0]
        assert abs(slope + 1.0) < 0.2


class TestRefinementTrials:
    def test_refined_below_raw(self, sic):
        study = refinement_trials(
            sic, 1, 0, np.pi / 4, ShotModel(N_REF, "poisson", seed=17), trials=3000
        )
        for lab in study.labels:
            raw_tot = sum(study.raw_sample_var[lab])
            ref_tot = sum(study.refined_sample_var[lab])
            assert ref_tot < raw_tot
            pred_ratio = study.refined[lab].total_variance / study.raw[lab].total_variance
            assert abs(ref_tot / raw_tot - pred_ratio) < 0.1

    def test_deterministic(self, sic):
        shot = ShotModel(1000, "poisson", seed=2)
        a = refinement_trials(sic, 1, 0, np.pi / 4, shot, trials=200)
        b = refinement_trials(sic, 1, 0, np.pi / 4, shot, trials=200)
        assert a.raw_sample_var == b.raw_sample_var
        assert a.refined_sample_var == b.refined_sample_var
