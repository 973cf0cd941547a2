import json

import numpy as np
import pytest

from fdbbd import cli
from fdbbd.harness import (ExperimentConfig, load_config, read_csv, run_experiment,
                           run_oracle_suite, summarize, trial_seed, write_csv, write_outputs)
from fdbbd.signals import ParameterError

SMALL = {"n": 64, "mu": 50, "max_iter": 30}


def small_cfg(tmp_path, experiment="noise_sweep", **kw):
    grids = kw.pop("grids", {"snr_db": [None, 20], "k": [2, 3]})
    params = {**SMALL, "s": 2, **kw.pop("params", {})}
    return ExperimentConfig(experiment, grids=grids, params=params, trials=kw.pop("trials", 2),
                            seed=kw.pop("seed", 3), output_dir=str(tmp_path), **kw)


def test_config_validation():
    with pytest.raises(ParameterError):
        ExperimentConfig("fig7")
    with pytest.raises(ParameterError):
        ExperimentConfig("noise_sweep", trials=0)
    with pytest.raises(ParameterError):
        ExperimentConfig("noise_sweep", seed=2**64)
    with pytest.raises(ParameterError):
        ExperimentConfig("noise_sweep", grids={"k": []})


def test_defaults_filled():
    cfg = ExperimentConfig("sparsity_sweep")
    assert cfg.grids["k"] == list(range(4, 11)) and cfg.params["snr_db"] == 30
    assert len(cfg.points()) == 2 * 7 * 7


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"experiment": "gamma_attack", "trials": 4, "grids": {"gamma": [1, 6]}}))
    cfg = load_config(p, seed=9, trials=None)
    assert cfg.seed == 9 and cfg.trials == 4 and cfg.grids["gamma"] == [1, 6]
    p.write_text(json.dumps({"experiment": "gamma_attack", "colour": "red"}))
    with pytest.raises(ParameterError):
        load_config(p)


def test_trial_seeds_independent_of_grid_size():
    a = np.random.default_rng(trial_seed(5, 3, 1)).random()
    b = np.random.default_rng(trial_seed(5, 3, 1)).random()
    c = np.random.default_rng(trial_seed(5, 3, 2)).random()
    assert a == b != c


def test_grid_completeness_and_order(tmp_path):
    cfg = small_cfg(tmp_path)
    rows, times = run_experiment(cfg)
    assert len(rows) == len(times) == 4 * 2
    assert [(r["grid_idx"], r["trial"]) for r in rows] == [(g, t) for g in range(4) for t in range(2)]


def test_cell_reproducible_in_isolation(tmp_path):
    from fdbbd.harness import _run_one
    cfg = small_cfg(tmp_path)
    full, _ = run_experiment(cfg)
    g, t = 3, 1
    row, _ = _run_one((cfg.experiment, g, t, cfg.seed, cfg.points()[g], cfg.params))
    assert row == full[g * cfg.trials + t]


def test_byte_identical_csv_serial_and_parallel(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    ra, ta = run_experiment(small_cfg(a))
    rb, tb = run_experiment(small_cfg(b, workers=2))
    pa = write_outputs(small_cfg(a), ra, ta)
    pb = write_outputs(small_cfg(b, workers=2), rb, tb)
    assert open(pa["csv"], "rb").read() == open(pb["csv"], "rb").read()
    assert open(pa["summary"], "rb").read() == open(pb["summary"], "rb").read()
    meta = json.loads(open(pa["meta"]).read())
    assert meta["seed"] == 3 and meta["rows"] == 8 and "code_version" in meta


def test_summary_recomputable(tmp_path):
    rows, _ = run_experiment(small_cfg(tmp_path))
    summary = summarize(rows)
    for rec in summary:
        vals = [r["rmse"] for r in rows if r["grid_idx"] == rec["grid_idx"] and not r["failed"]]
        assert rec["rmse_mean"] == pytest.approx(np.mean(vals))
        assert rec["failure_rate"] == 0


def test_failures_counted_not_fatal(tmp_path):
    cfg = small_cfg(tmp_path, grids={"snr_db": [None], "k": [2]},
                    params={"max_iter": 1})
    rows, _ = run_experiment(cfg)
    assert len(rows) == 2


def test_attack_experiment_rows(tmp_path):
    cfg = ExperimentConfig("gamma_attack", grids={"gamma": [1.0, 6.0]},
                           params={**SMALL, "k": 2, "s": 2}, trials=2, seed=1,
                           output_dir=str(tmp_path))
    rows, _ = run_experiment(cfg)
    assert {"success", "rmse_to_alice", "mse_to_true"} <= set(rows[0])


def test_csv_roundtrip(tmp_path):
    rows = [{"experiment": "x", "grid_idx": 0, "trial": 0, "v": 0.5, "flag": True, "z": float("nan")}]
    path = tmp_path / "r.csv"
    write_csv(rows, path)
    back = read_csv(path)[0]
    assert back["v"] == 0.5 and back["flag"] == 1 and np.isnan(back["z"])
    with pytest.raises(ParameterError):
        write_csv([], path)
    (tmp_path / "e.csv").write_text("a,b\n")
    with pytest.raises(ParameterError):
        read_csv(tmp_path / "e.csv")


def test_oracle_suite_quick_passes():
    rows = run_oracle_suite("quick", seed=1)
    assert all(r["passed"] for r in rows)
    assert {"closed_form", "oracle", "margin"} <= set(rows[0])
    neg = [r for r in rows if r["check"] == "injectivity_negative_control"][0]
    assert "(" in neg["detail"]


class TestPlots:
    def test_heatmap_per_dims_and_idempotent(self, tmp_path):
        from fdbbd.plots import emit_plots
        cfg = ExperimentConfig("sparsity_sweep", grids={"dims": [[40, 30], [50, 40]], "k": [2, 3],
                                                        "s": [2]},
                               params={"max_iter": 20}, trials=1, seed=2, output_dir=str(tmp_path))
        rows, times = run_experiment(cfg)
        paths = write_outputs(cfg, rows, times)
        svgs = emit_plots(paths["csv"])
        assert len(svgs) == 2
        first = [open(p, "rb").read() for p in svgs]
        assert [open(p, "rb").read() for p in emit_plots(paths["csv"])] == first

    def test_empty_csv_rejected(self, tmp_path):
        from fdbbd.plots import emit_plots
        p = tmp_path / "empty.csv"
        p.write_text("experiment,grid_idx\n")
        with pytest.raises(ParameterError):
            emit_plots(p)


class TestCli:
    def test_run_and_plot(self, tmp_path, capsys):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"experiment": "gamma_attack", "grids": {"gamma": [6.0]},
                                    "params": {**SMALL, "k": 2, "s": 2}}))
        out = tmp_path / "o"
        code = cli.main(["run", "gamma_attack", "--config", str(conf), "--seed", "7",
                         "--trials", "2", "--out", str(out)])
        assert code == 0
        assert (out / "gamma_attack.csv").exists() and (out / "gamma_attack.json").exists()
        assert cli.main(["plot", str(out / "gamma_attack.csv")]) == 0
        assert (out / "gamma_attack.svg").exists()

    def test_config_experiment_mismatch(self, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"experiment": "noise_sweep"}))
        assert cli.main(["run", "gamma_attack", "--config", str(conf)]) == 1

    def test_bad_seed_is_usage_error(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["run", "noise_sweep", "--seed", "-1"])
        assert err.value.code == 1

    def test_oracle_exit_codes(self, monkeypatch, tmp_path):
        assert cli.main(["oracle", "--suite", "quick", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "oracle_suite.csv").exists()
        import fdbbd.cli as mod
        monkeypatch.setattr(mod, "run_oracle_suite", lambda suite, seed: [
            {"check": "x", "params": "", "closed_form": 0.0, "oracle": 1.0, "stderr": 0.0,
             "margin": -1.0, "passed": False, "detail": ""}])
        assert cli.main(["oracle"]) == 2
