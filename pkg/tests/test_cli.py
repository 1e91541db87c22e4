import json

import numpy as np
import pytest

from hdls.cli import (RunConfig, ingest_csv, log_returns, main, pve,
                      remove_factors, run)
from hdls.errors import DomainError, ParseError
from hdls.model import family, grid_from_factors, grid_to_config
from hdls.synth import PanelData

AR1 = family("ar", 1)
AR1_TWOVAR_CFG = grid_to_config(
    grid_from_factors(AR1, [([0.5], [1.0])], [1.0, 2.0], [0.5, 0.5]))


class TestIngest:
    def test_plain_numeric(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("1,2\n3,4\n")
        panel = ingest_csv(path)
        np.testing.assert_allclose(panel.values, [[1, 2], [3, 4]])

    def test_header_and_id_column(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("name,t1,t2\naaa,1,2\nbbb,3,4\n")
        panel = ingest_csv(path)
        np.testing.assert_allclose(panel.values, [[1, 2], [3, 4]])

    def test_id_column_only(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("aaa,1,2\nbbb,3,4\n")
        panel = ingest_csv(path)
        np.testing.assert_allclose(panel.values, [[1, 2], [3, 4]])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(ParseError):
            ingest_csv(path)

    def test_ragged_rows_located(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("1,2\n3,4,5\n")
        with pytest.raises(ParseError, match="row 2"):
            ingest_csv(path)

    def test_bad_cell_located(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("1,2\n3,oops\n")
        with pytest.raises(ParseError, match="row 2, column 2"):
            ingest_csv(path)

    def test_round_trip_with_export(self, tmp_path):
        from hdls.synth import export_csv
        rng = np.random.default_rng(0)
        panel = PanelData(rng.standard_normal((4, 9)))
        path = tmp_path / "g.csv"
        export_csv(panel, path)
        back = ingest_csv(path)
        np.testing.assert_allclose(back.values, panel.values, rtol=1e-15)

    def test_constant_row_warns(self, tmp_path, caplog):
        path = tmp_path / "h.csv"
        path.write_text("1,1,1\n1,2,3\n")
        with caplog.at_level("WARNING", logger="hdls"):
            ingest_csv(path)
        assert any("constant" in r.message for r in caplog.records)


class TestLogReturns:
    def test_single_step(self):
        panel = PanelData(np.array([[1.0, np.e]]))
        out = log_returns(panel)
        np.testing.assert_allclose(out.values, [[1.0]], rtol=1e-12)

    def test_constant_prices(self):
        out = log_returns(PanelData(np.array([[2.0, 2.0, 2.0]])))
        np.testing.assert_allclose(out.values, [[0.0, 0.0]], atol=1e-15)

    def test_percent_return(self):
        out = log_returns(PanelData(np.array([[100.0, 101.0]])))
        assert out.values[0, 0] == pytest.approx(np.log(1.01), rel=1e-12)

    def test_nonpositive_located(self):
        with pytest.raises(DomainError, match="row 1, column 2"):
            log_returns(PanelData(np.array([[1.0, 0.0]])))


class TestRemoveFactors:
    def test_full_removal_is_zero(self):
        rng = np.random.default_rng(1)
        panel = PanelData(rng.standard_normal((4, 7)))
        out = remove_factors(panel, 4)
        np.testing.assert_allclose(out.values, 0.0, atol=1e-10)

    def test_zero_keeps_centered(self):
        rng = np.random.default_rng(2)
        panel = PanelData(rng.standard_normal((3, 9)))
        out = remove_factors(panel, 0)
        np.testing.assert_allclose(out.values.mean(axis=1), 0.0, atol=1e-12)

    def test_rank_one_panel_killed_by_one_factor(self):
        u = np.array([[1.0], [2.0], [-1.0]])
        v = np.linspace(1, 2, 6)[None, :]
        panel = PanelData(u @ v)
        out = remove_factors(panel, 1)
        np.testing.assert_allclose(out.values, 0.0, atol=1e-10)

    def test_residual_orthogonal_to_removed_terms(self):
        rng = np.random.default_rng(3)
        panel = PanelData(rng.standard_normal((5, 11)))
        centered = panel.values - panel.values.mean(axis=1, keepdims=True)
        u, sv, vt = np.linalg.svd(centered, full_matrices=False)
        out = remove_factors(panel, 2)
        for k in range(2):
            term = sv[k] * np.outer(u[:, k], vt[k])
            assert abs(np.sum(out.values * term)) < 1e-8

    def test_out_of_range(self):
        panel = PanelData(np.ones((2, 3)))
        with pytest.raises(DomainError):
            remove_factors(panel, 3)


class TestPve:
    def test_rank_one(self):
        u = np.array([[1.0], [2.0]])
        v = np.array([[1.0, -1.0, 2.0]])
        ratios = pve(PanelData(u @ v))
        assert ratios[0] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(ratios[1:], 0.0, atol=1e-12)

    def test_isotropic_iid(self):
        rng = np.random.default_rng(4)
        ratios = pve(PanelData(rng.standard_normal((100, 400))))
        assert ratios.max() < 0.1

    def test_uniform_for_identity_like(self):
        panel = PanelData(np.eye(6) - 1.0 / 6)
        ratios = pve(PanelData(np.eye(6)))
        np.testing.assert_allclose(ratios[: 5], ratios[0], rtol=1e-10)

    def test_sums_to_one_and_sorted(self):
        rng = np.random.default_rng(5)
        ratios = pve(PanelData(rng.standard_normal((8, 20))))
        assert ratios.sum() == pytest.approx(1.0, rel=1e-12)
        assert np.all(np.diff(ratios) <= 1e-15)


@pytest.fixture
def sim_config(tmp_path):
    cfg = {"grid": AR1_TWOVAR_CFG, "p": 6, "n": 32, "burn_in": 200}
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(cfg))
    return path


class TestRunPipeline:
    def test_simulate_deterministic(self, tmp_path, sim_config):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        for out in (out1, out2):
            rc = run(RunConfig("simulate", config=str(sim_config),
                               output=str(out), seed=7, plot=False))
            assert rc == 0
        assert (out1 / "panel.csv").read_text() == \
            (out2 / "panel.csv").read_text()

    def test_estimate_closes_pipeline(self, tmp_path, sim_config):
        simdir = tmp_path / "sim"
        run(RunConfig("simulate", config=str(sim_config), output=str(simdir),
                      seed=3, plot=False))
        est_cfg = {
            "grid": AR1_TWOVAR_CFG,
            "gfamily": "constant",
            "theta_nodes": 128,
            "max_iters": 8,
            "n_starts": 1,
        }
        cfg_path = tmp_path / "est.json"
        cfg_path.write_text(json.dumps(est_cfg))
        outdir = tmp_path / "est"
        rc = run(RunConfig("estimate", config=str(cfg_path),
                           input=str(simdir / "panel.csv"),
                           output=str(outdir), seed=1, plot=True))
        assert rc == 0
        result = json.loads((outdir / "fit_result.json").read_text())
        w = np.asarray(result["omega_hat"])
        assert w.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(w >= -1e-12)
        assert (outdir / "cdf_sigma2.csv").exists()
        # report paths render figures next to the delimited output
        assert (outdir / "cdf.png").stat().st_size > 0
        assert (outdir / "loss_trace.png").stat().st_size > 0

    def test_lsd_outputs(self, tmp_path):
        cfg = {"grid": AR1_TWOVAR_CFG, "c": 0.25, "gfamily": "constant",
               "iters": None, "theta_nodes": 128,
               "density": {"x_min": 0.0, "x_max": 8.0, "points": 16}}
        cfg_path = tmp_path / "lsd.json"
        cfg_path.write_text(json.dumps(cfg))
        outdir = tmp_path / "lsd"
        rc = run(RunConfig("lsd", config=str(cfg_path), output=str(outdir),
                           plot=True))
        assert rc == 0
        lines = (outdir / "transforms.csv").read_text().splitlines()
        assert lines[0] == "g,z_re,z_im,grid_point,value_re,value_im"
        assert len(lines) == 1 + 60 * (1 + 2)  # S plus one K row per atom
        dens = (outdir / "density.csv").read_text().splitlines()
        assert len(dens) == 17
        assert (outdir / "density.png").stat().st_size > 0

    def test_sdm_outputs(self, tmp_path, sim_config):
        simdir = tmp_path / "sim"
        run(RunConfig("simulate", config=str(sim_config), output=str(simdir),
                      seed=5, plot=False))
        cfg_path = tmp_path / "sdm.json"
        cfg_path.write_text(json.dumps({"grid": AR1_TWOVAR_CFG,
                                        "theta_points": 3}))
        outdir = tmp_path / "sdm"
        rc = run(RunConfig("sdm", config=str(cfg_path),
                           input=str(simdir / "panel.csv"),
                           output=str(outdir), plot=True))
        assert rc == 0
        assert (outdir / "u_hat.csv").exists()
        atoms = json.loads((outdir / "atoms.json").read_text())
        assert sum(a["multiplicity"] for a in atoms) == 6
        assert (outdir / "sdm.png").stat().st_size > 0

    def test_select_structure(self, tmp_path, sim_config):
        simdir = tmp_path / "sim"
        run(RunConfig("simulate", config=str(sim_config), output=str(simdir),
                      seed=9, plot=False))
        iid_cfg = grid_to_config(grid_from_factors(
            family("iid"), [], [1.0, 2.0], [0.5, 0.5]))
        sel = {"candidates": [{"label": "AR(1)", "grid": AR1_TWOVAR_CFG},
                              {"label": "Ind", "grid": iid_cfg}],
               "B": 2, "taus": [0, 1], "fit": None, "burn_in": 100}
        cfg_path = tmp_path / "sel.json"
        cfg_path.write_text(json.dumps(sel))
        outdir = tmp_path / "sel"
        rc = run(RunConfig("select", config=str(cfg_path),
                           input=str(simdir / "panel.csv"),
                           output=str(outdir), seed=2, plot=True))
        assert rc == 0
        report = json.loads((outdir / "report.json").read_text())
        assert set(report["rankings"]) == {"0", "1"}
        ranking = (outdir / "ranking.csv").read_text().splitlines()
        assert ranking[0] == "ordering,lag0,lag1"
        assert (outdir / "ranking.png").stat().st_size > 0

    def test_select_four_candidates_all_lags(self, tmp_path):
        # ARMA(1,1) synthetic panel scored against the four-family list
        arma_cfg = grid_to_config(grid_from_factors(
            family("arma11"), [([-0.35], [1.0]), ([0.65], [1.0])],
            [1.0, 2.0], [0.5, 0.5]))
        sim = {"grid": arma_cfg, "p": 12, "n": 48, "burn_in": 150}
        sim_path = tmp_path / "sim.json"
        sim_path.write_text(json.dumps(sim))
        simdir = tmp_path / "sim"
        run(RunConfig("simulate", config=str(sim_path), output=str(simdir),
                      seed=13, plot=False))
        ar2_cfg = grid_to_config(grid_from_factors(
            family("ar", 2), [([0.3], [1.0]), ([-0.2], [1.0])],
            [1.0, 2.0], [0.5, 0.5]))
        ar1_cfg = grid_to_config(grid_from_factors(
            family("ar", 1), [([0.25], [1.0])], [1.0, 2.0], [0.5, 0.5]))
        iid_cfg = grid_to_config(grid_from_factors(
            family("iid"), [], [1.0, 2.0], [0.5, 0.5]))
        sel = {"candidates": [
                   {"label": "Ind", "grid": iid_cfg},
                   {"label": "AR(1)", "grid": ar1_cfg},
                   {"label": "AR(2)", "grid": ar2_cfg},
                   {"label": "ARMA_Ind(1,1)", "grid": arma_cfg}],
               "B": 2, "taus": [0, 1, 2, 3, 4, 5], "fit": None,
               "burn_in": 100}
        cfg_path = tmp_path / "sel4.json"
        cfg_path.write_text(json.dumps(sel))
        outdir = tmp_path / "sel4"
        rc = run(RunConfig("select", config=str(cfg_path),
                           input=str(simdir / "panel.csv"),
                           output=str(outdir), seed=3, plot=False))
        assert rc == 0
        report = json.loads((outdir / "report.json").read_text())
        assert set(report["rankings"]) == {str(t) for t in range(6)}
        for ranking in report["rankings"].values():
            assert len(ranking.split(" ≺ ")) == 4

    def test_corrhist(self, tmp_path, sim_config):
        simdir = tmp_path / "sim"
        run(RunConfig("simulate", config=str(sim_config), output=str(simdir),
                      seed=4, plot=False))
        outdir = tmp_path / "corr"
        rc = run(RunConfig("corrhist", input=str(simdir / "panel.csv"),
                           output=str(outdir), plot=False))
        assert rc == 0
        lines = (outdir / "correlations.csv").read_text().splitlines()
        assert len(lines) == 1 + 6 * 5 // 2

    def test_figures_rendered_when_enabled(self, tmp_path, sim_config):
        simdir = tmp_path / "sim"
        run(RunConfig("simulate", config=str(sim_config), output=str(simdir),
                      seed=4, plot=False))
        outdir = tmp_path / "corrfig"
        rc = run(RunConfig("corrhist", input=str(simdir / "panel.csv"),
                           output=str(outdir), plot=True))
        assert rc == 0
        assert (outdir / "corrhist.png").stat().st_size > 0

    def test_price_pipeline_end_to_end(self, tmp_path):
        # synthetic prices -> log returns -> factor removal -> fit -> select
        from hdls.synth import SimSpec, export_csv, simulate_time_domain
        ar1 = family("ar", 1)
        truth = grid_from_factors(ar1, [([0.4], [1.0])], [1.0], [1.0])
        rng = np.random.default_rng(8)
        p, n = 12, 120
        returns = simulate_time_domain(
            SimSpec(ar1, truth, p, n, seed=18)).values * 0.01
        # one strong common factor on top of the idiosyncratic returns
        loadings = rng.uniform(0.5, 1.5, size=(p, 1))
        factor = 0.05 * rng.standard_normal((1, n))
        prices = 100.0 * np.exp(np.cumsum(returns + loadings @ factor,
                                          axis=1))
        price_path = tmp_path / "prices.csv"
        export_csv(PanelData(prices), price_path)

        est_cfg = {"grid": grid_to_config(grid_from_factors(
                       ar1, [([0.0, 0.4], [0.5, 0.5])],
                       [5e-5, 1e-4, 2e-4], [1 / 3] * 3)),
                   "gfamily": "constant", "theta_nodes": 128,
                   "max_iters": 10, "n_starts": 1,
                   "preprocess": {"log_returns": True, "remove_factors": 1}}
        est_path = tmp_path / "est.json"
        est_path.write_text(json.dumps(est_cfg))
        est_out = tmp_path / "est"
        rc = run(RunConfig("estimate", config=str(est_path),
                           input=str(price_path), output=str(est_out),
                           seed=1, plot=False))
        assert rc == 0
        assert (est_out / "pve.csv").exists()
        # the injected factor dominates the raw returns
        first_pve = float((est_out / "pve.csv").read_text()
                          .splitlines()[1].split(",")[1])
        assert first_pve > 0.3

        sel_cfg = {"candidates": [
                       {"label": "Ind", "grid": grid_to_config(
                           grid_from_factors(family("iid"), [],
                                             [1e-4], [1.0]))},
                       {"label": "AR(1)", "grid": est_cfg["grid"]}],
                   "B": 2, "taus": [0, 1], "fit": None, "burn_in": 100,
                   "preprocess": {"log_returns": True, "remove_factors": 1}}
        sel_path = tmp_path / "sel.json"
        sel_path.write_text(json.dumps(sel_cfg))
        sel_out = tmp_path / "sel"
        rc = run(RunConfig("select", config=str(sel_path),
                           input=str(price_path), output=str(sel_out),
                           seed=2, plot=False))
        assert rc == 0
        assert (sel_out / "ranking.csv").exists()

    def test_missing_input_raises(self, tmp_path):
        with pytest.raises(DomainError):
            run(RunConfig("corrhist", input=str(tmp_path / "missing.csv"),
                          output=str(tmp_path)))

    def test_main_error_is_single_line_json(self, tmp_path, capsys):
        rc = main(["corrhist", "--input", str(tmp_path / "nope.csv"),
                   "--output", str(tmp_path)])
        assert rc == 1
        err = capsys.readouterr().err.strip()
        payload = json.loads(err)
        assert "error" in payload and "message" in payload
        assert "\n" not in err

    def test_main_happy_path(self, tmp_path, sim_config, capsys):
        rc = main(["simulate", "--config", str(sim_config), "--output",
                   str(tmp_path / "m"), "--seed", "11", "--no-plot"])
        assert rc == 0
