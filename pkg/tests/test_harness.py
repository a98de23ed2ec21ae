import csv
import json

import pytest

from chemolab import cli
from chemolab.errors import ConfigError, IoError
from chemolab.harness import (LEDGER_COLUMNS, THREADS_ENV, TIMESERIES_COLUMNS, ScenarioConfig, SweepConfig,
                              _worker_count, report_thresholds, run_scenario, run_sweep, validate_summary)
from chemolab.stepper import Status


def scenario(**kw):
    d = {"chi": 1.0, "r": 1.0, "mu": 1000.0, "alpha": 1.0, "beta": 1.0, "lambda": 0.5,
         "nx": 16, "ny": 16, "t_end": 1.0, "dt_max": 0.02, "sample_every": 0.1,
         "initial_kind": "perturbed", "initial_c": 5e-4, "initial_amplitude": 2e-4, "initial_kx": 1,
         "initial_ky": 1}
    d.update(kw)
    return d


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_config_errors():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(scenario(bogus=1))
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(scenario(**{"lambda": 1.5}))
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(scenario(initial_kind="random"))
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(scenario(initial_amplitude=1.0))
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(scenario(dt_init=1.0))


def test_config_roundtrip():
    cfg = ScenarioConfig.from_dict(scenario(initial_kind="random", initial_seed=3))
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.with_axis("mu", 50.0).params.mu == 50.0
    assert cfg.t_late == 0.5


def test_random_initial_data_is_seeded_and_nonnegative():
    cfg = ScenarioConfig.from_dict(scenario(initial_kind="random", initial_seed=7, initial_amplitude=1e-3))
    a = cfg.initial.build(cfg.params.grid).values
    b = cfg.initial.build(cfg.params.grid).values
    assert (a == b).all() and a.min() >= 0 and (a == 0).any()


def test_run_scenario_outputs(tmp_path):
    cfg = ScenarioConfig.from_dict(scenario())
    outcome, summary = run_scenario(cfg, tmp_path)
    assert outcome.status is Status.COMPLETED
    ts = read_csv(tmp_path / "timeseries.csv")
    assert ts[0] == TIMESERIES_COLUMNS and len(ts) == 12
    assert all(len(r) == len(TIMESERIES_COLUMNS) for r in ts)
    led = read_csv(tmp_path / "ledger.csv")
    assert led[0] == LEDGER_COLUMNS and all(r[5] in ("true", "false") for r in led[1:])
    on_disk = json.loads((tmp_path / "summary.json").read_text())
    validate_summary(on_disk)
    assert set(on_disk) >= {"params", "thresholds", "outcome", "tail", "rates"}
    assert set(on_disk["tail"]) == {"mass_min", "lp2_max", "min_v_min", "dist_sup_final"}
    assert set(on_disk["rates"]) == {"fitted_l2sq", "fitted_energy", "predicted_energy", "predicted_sup"}
    assert summary["ledger"]["all_pass"]


def test_steady_state_scenario(tmp_path):
    cfg = ScenarioConfig.from_dict(scenario(initial_kind="constant", initial_c=1e-3))
    outcome, summary = run_scenario(cfg, tmp_path)
    assert outcome.status is Status.COMPLETED
    assert summary["tail"]["dist_sup_final"] <= 1e-10
    assert summary["ledger"]["all_pass"]


def test_homogeneous_logistic_rate(tmp_path):
    cfg = ScenarioConfig.from_dict(scenario(chi=0.0, mu=1.0, initial_kind="constant", initial_c=0.8,
                                            t_end=10.0, sample_every=0.25, dt_max=0.01, fit_t_min=2.0))
    _, summary = run_scenario(cfg, tmp_path)
    assert summary["rates"]["fitted_l2sq"] == pytest.approx(2.0, rel=0.1)


def test_u_cap_scenario(tmp_path):
    _, summary = run_scenario(ScenarioConfig.from_dict(scenario(u_cap=1e-3, initial_c=1.0,
                                                                initial_amplitude=0.0)), tmp_path)
    assert summary["outcome"]["status"] == "BlowUpSuspected"
    assert summary["outcome"]["reason"] == "u_cap exceeded"
    validate_summary(json.loads((tmp_path / "summary.json").read_text()))


def test_timeseries_is_deterministic(tmp_path):
    cfg = ScenarioConfig.from_dict(scenario(initial_kind="random", initial_seed=11, initial_amplitude=3e-4))
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "timeseries.csv").read_bytes() == (tmp_path / "b" / "timeseries.csv").read_bytes()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        run_scenario(ScenarioConfig.from_dict(scenario(t_end=0.1)), blocker / "sub")
    with pytest.raises(ConfigError):
        run_scenario(ScenarioConfig.from_dict(scenario(t_end=0.1)))


def sweep_dict(**kw):
    d = {"base": scenario(t_end=0.2, nx=8, ny=8, sample_every=0.05),
         "axes": [{"name": "chi", "values": [2.0, 0.5, 1.0]}, {"name": "mu", "values": [900.0, 500.0]}]}
    d.update(kw)
    return d


def test_sweep_rows_and_columns(tmp_path):
    cfg = SweepConfig.from_dict(sweep_dict())
    rows = run_sweep(cfg, tmp_path)
    assert len(rows) == 6
    assert [(r["chi"], r["mu"]) for r in rows] == [(c, m) for c in (0.5, 1.0, 2.0) for m in (500.0, 900.0)]
    assert all(r["status"] == "Completed" for r in rows)
    table = read_csv(tmp_path / "sweep.csv")
    assert len(table) == 7
    assert table[0][:4] == ["run_id", "mu", "chi", "lambda"]
    assert "uniformly_persistent" in table[0] and "persistence_flip" in table[0]
    for r in rows:
        assert (tmp_path / r["run_id"] / "summary.json").exists()


def test_sweep_flags_persistence_flip(tmp_path):
    d = sweep_dict(axes=[{"name": "mu", "values": [700.0, 800.0, 900.0]}])
    d["base"]["t_end"] = 0.05
    rows = run_sweep(SweepConfig.from_dict(d), tmp_path)
    assert [r["uniformly_persistent"] for r in rows] == [False, True, True]
    assert [r["persistence_flip"] for r in rows] == [False, True, False]


def test_sweep_crash_isolation(tmp_path):
    d = sweep_dict(axes=[{"name": "mu", "values": [800.0, 900.0]}])
    d["base"]["elliptic_max_iter"] = 1
    d["base"]["elliptic_rel_tol"] = 1e-12
    d["base"]["initial_amplitude"] = 4e-4
    rows = run_sweep(SweepConfig.from_dict(d), tmp_path)
    assert len(rows) == 2 and all(r["status"] == "SolverFailure" for r in rows)
    good = sweep_dict(axes=[{"name": "lambda", "values": [0.3, 0.6]}])
    good["base"]["t_end"] = 0.05
    rows = run_sweep(SweepConfig.from_dict(good), tmp_path / "ok")
    assert all(r["status"] == "Completed" for r in rows)


def test_sweep_cell_exception_does_not_sink_others(tmp_path, monkeypatch):
    import chemolab.harness as h
    real = h.run_scenario

    def flaky(cfg, out):
        if cfg.params.mu == 800.0:
            raise RuntimeError("boom")
        return real(cfg, out)

    monkeypatch.setattr(h, "run_scenario", flaky)
    d = sweep_dict(axes=[{"name": "mu", "values": [800.0, 900.0]}])
    d["base"]["t_end"] = 0.05
    rows = run_sweep(SweepConfig.from_dict(d), tmp_path)
    assert rows[0]["status"] == "Error" and "boom" in rows[0]["error"]
    assert rows[1]["status"] == "Completed"


def test_sweep_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig.from_dict(sweep_dict(axes=[{"name": "lambda", "values": [0.5, 1.2]}]))
    with pytest.raises(ConfigError):
        SweepConfig.from_dict(sweep_dict(axes=[{"name": "r", "values": [1.0]}]))
    with pytest.raises(ConfigError):
        SweepConfig.from_dict(sweep_dict(axes=[{"name": "mu", "values": [1.0]}, {"name": "mu", "values": [2.0]}]))


def test_worker_cap(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "2")
    assert _worker_count(8) == 2
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(ConfigError):
        _worker_count(4)
    monkeypatch.delenv(THREADS_ENV)
    assert _worker_count(3) == 3


def test_parallel_sweep_matches_serial(tmp_path, monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    d = sweep_dict(axes=[{"name": "mu", "values": [800.0, 900.0]}])
    d["base"]["t_end"] = 0.05
    cfg = SweepConfig.from_dict(d)
    serial = run_sweep(cfg, tmp_path / "s", parallelism=1)
    par = run_sweep(cfg, tmp_path / "p", parallelism=2)
    assert [r["lp2_max"] for r in serial] == [r["lp2_max"] for r in par]


def test_report_thresholds_validation():
    args = dict(n_dim=2, p=2.0, q=0.5, lam=0.5, chi=1.0, alpha=1.0, beta=1.0, r=1.0, mu=1000.0, eta=1.0,
                lx=1.0, ly=1.0)
    assert report_thresholds(**args).mu3_star == pytest.approx(771.135, rel=1e-5)
    for bad in (dict(q=1.0), dict(p=1.0), dict(eta=0.0), dict(mu=-1.0), dict(n_dim=1)):
        with pytest.raises(ConfigError):
            report_thresholds(**{**args, **bad})


THRESH_ARGS = ["thresholds", "--ndim", "2", "--p", "2", "--q", "0.5", "--lambda", "0.5", "--chi", "1",
               "--alpha", "1", "--beta", "1", "--r", "1", "--mu", "1000", "--eta", "1", "--lx", "1", "--ly", "1"]


def test_cli_thresholds(capsys):
    assert cli.main(THRESH_ARGS) == 0
    out = json.loads(capsys.readouterr().out)
    assert "domain_error" in out["mu2_star"]
    assert out["mu3_star"] == pytest.approx(771.1, rel=1e-4)
    assert out["rate_sup"] == out["rate_energy"] / 4


def test_cli_thresholds_bad_input(capsys):
    args = list(THRESH_ARGS)
    args[args.index("--q") + 1] = "2"
    assert cli.main(args) != 0
    assert "config error" in capsys.readouterr().err


def test_cli_simulate_and_sweep(tmp_path, capsys):
    (tmp_path / "s.json").write_text(json.dumps(scenario(t_end=0.1)))
    assert cli.main(["simulate", "--config", str(tmp_path / "s.json"), "--out", str(tmp_path / "run")]) == 0
    assert json.loads(capsys.readouterr().out)["outcome"]["status"] == "Completed"
    d = sweep_dict(axes=[{"name": "mu", "values": [800.0, 900.0]}])
    d["base"]["t_end"] = 0.05
    (tmp_path / "w.json").write_text(json.dumps(d))
    assert cli.main(["sweep", "--config", str(tmp_path / "w.json"), "--out", str(tmp_path / "sw"),
                     "--parallel", "1"]) == 0
    assert json.loads(capsys.readouterr().out) == {"runs": 2, "status_counts": {"Completed": 2}}
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
