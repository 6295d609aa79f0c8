import json

import numpy as np
import pytest

from salasso.cli import main
from salasso.experiments import ConfigError, ExperimentConfig, load_config, parse_config_text, run_experiment
from salasso.metrics import read_metrics_csv


def test_config_dump_parse_round_trip(tmp_path):
    cfg = ExperimentConfig(kind="sweep", delta=(0.2, 0.6), T=(1, 3), gamma_grid=(0.5, 1.0), p=120)
    (tmp_path / "c.cfg").write_text(cfg.dump())
    assert load_config(tmp_path / "c.cfg") == cfg


def test_config_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="nope")
    with pytest.raises(ConfigError):
        ExperimentConfig(delta=(0.0,))
    with pytest.raises(ConfigError):
        ExperimentConfig(preset="high:huge")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"colour": "red"})
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")
    assert parse_config_text("# c\np = 3  # trailing\n") == {"p": "3"}


def test_se_sweep_null_prior_noiseless(tmp_path):
    cfg = ExperimentConfig(kind="se_sweep", structure="null", sigma2=0.0, n_points=4, out=str(tmp_path / "z"))
    csv_path, _ = run_experiment(cfg)
    rows = read_metrics_csv(csv_path)
    assert len(rows) == 4 and all(r["mse"] == 0 for r in rows)


def test_summary_means_match_csv(tmp_path):
    cfg = ExperimentConfig(kind="amp_vs_solver", p=200, replications=3, alphas=(2.0, 2.5), out=str(tmp_path / "a"))
    csv_path, json_path = run_experiment(cfg)
    rows = read_metrics_csv(csv_path)
    assert "rel_l2_discrepancy" in rows[0]
    summ = json.loads(json_path.read_text())["summary"]
    for key, stats in summ.items():
        method, delta, alpha = key.split("|")
        sel = [r for r in rows if r["method"] == method and r["alpha"] == float(alpha)]
        assert stats["mse"]["mean"] == pytest.approx(np.mean([r["mse"] for r in sel]), rel=1e-15)


def test_threads_give_identical_files(tmp_path):
    base = dict(kind="fig1", p=150, replications=3, n_points=4, n_mc=2000)
    a, _ = run_experiment(ExperimentConfig(**base, out=str(tmp_path / "one"), threads=1))
    b, _ = run_experiment(ExperimentConfig(**base, out=str(tmp_path / "two"), threads=3))
    strip = lambda p: [",".join(l.split(",")[:8]) for l in p.read_text().splitlines()]
    assert strip(a) == strip(b)
    methods = {r["method"] for r in read_metrics_csv(a)}
    assert methods == {"lasso", "se_lasso", "salasso", "se_salasso"}


def test_cli_exit_codes(tmp_path, capsys):
    prefix = str(tmp_path / "inst")
    assert main(["simulate", "--p", "100", "--out", prefix]) == 0
    assert main(["fit", "--data", prefix + "_data.csv", "--structure-file", prefix + "_structure.csv", "--lam", "0.01", "--out", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f.csv").exists() and (tmp_path / "f.json").exists()
    assert main(["fit", "--lam", "0.1"]) == 1
    assert main(["bogus"]) == 1
    assert main(["sweep", "--kind", "fig1", "--structure", "null"]) == 1
    (tmp_path / "bad.csv").write_text("y,x_0001\n1\n")
    assert main(["fit", "--data", str(tmp_path / "bad.csv"), "--lam", "0.1"]) == 2
    assert main(["amp", "--data", str(tmp_path / "missing.csv"), "--alpha", "1"]) == 2


def test_cli_config_file_and_dump(tmp_path, capsys):
    prefix = str(tmp_path / "inst")
    main(["simulate", "--p", "100", "--out", prefix])
    cfg = tmp_path / "fit.cfg"
    cfg.write_text(f"data = {prefix}_data.csv\nlam = 0.02\ngamma = 0.5\n")
    assert main(["fit", "--config", str(cfg), "--dump-config"]) == 0
    out = capsys.readouterr().out
    assert "lam = 0.02" in out and "gamma = 0.5" in out
    assert main(["fit", "--config", str(cfg), "--gamma", "0.75", "--dump-config"]) == 0
    assert "gamma = 0.75" in capsys.readouterr().out
    cfg.write_text("nonsense = 1\n")
    assert main(["fit", "--config", str(cfg)]) == 1


def test_cli_se_and_locmodel(tmp_path):
    assert main(["se", "--n-points", "3", "--out", str(tmp_path / "se")]) == 0
    assert len(read_metrics_csv(tmp_path / "se.csv")) >= 4
    assert main(["locmodel", "--sizes", "2000,2000,2000", "--a", "3,3", "--reps", "3", "--mc", "100", "--out", str(tmp_path / "loc")]) == 0
    data = json.loads((tmp_path / "loc.json").read_text())
    assert data["condition_holds"] and data["mc_risk_mean"] <= data["bound"]
