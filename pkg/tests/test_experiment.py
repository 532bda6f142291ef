import math

import numpy as np
import pytest

from magic_ope.cli import main
from magic_ope.domains import DomainSpec, build_modelfail
from magic_ope.experiment import (CSV_HEADER, ESTIMATORS, ExperimentConfig, ResultRow, TrialResult, aggregate,
                                  _generator, read_csv, run_experiment, run_trial, run_trials, trial_seed,
                                  write_csv)
from magic_ope.mdp import dataset_returns
from magic_ope.model import am_estimate, fit_mle_model, value_tables


@pytest.mark.parametrize("kwargs, match", [
    (dict(estimators=("XYZ",)), "unknown estimators"),
    (dict(estimators=()), "no estimators"),
    (dict(n_grid=(0, 4)), "positive"),
    (dict(n_grid=(8, 4)), "ascending"),
    (dict(trials=1), "trials"),
    (dict(data_mode="third"), "data_mode"),
    (dict(data_mode="half", n_grid=(3,)), "even"),
    (dict(kappa=1), "kappa"),
    (dict(delta=1.0), "delta"),
    (dict(j_set="ternary"), "j-set"),
    (dict(j_set=(0, math.inf)), "-1 and inf"),
    (dict(j_set=(-1, 0.5, math.inf)), "integers"),
])
def test_config_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        ExperimentConfig("modelfail", **kwargs)


def test_run_trial_is_deterministic():
    cfg = ExperimentConfig("hybrid", estimators=ESTIMATORS, n_grid=(16,), trials=2, kappa=20)
    a, b = run_trial(cfg, 16, 1), run_trial(cfg, 16, 1)
    assert a.estimates == b.estimates
    c = run_trial(cfg, 16, 0)
    assert a.estimates != c.estimates


def _on_policy_modelfail() -> DomainSpec:
    d = build_modelfail()
    return DomainSpec("modelfail", d.mdp, d.observation_map, d.behavior, d.behavior, d.model_horizon)


def test_on_policy_weighted_estimators_equal_mean_return():
    domain = _on_policy_modelfail()
    names = ("WIS", "CWPDIS", "PDIS", "IS")
    cfg = ExperimentConfig("modelfail", estimators=names, n_grid=(32,), trials=2)
    res = run_trial(cfg, 32, 0, domain)
    data = domain.sample(32, _generator(trial_seed(0, "modelfail", 32, 0, 0)))
    g = dataset_returns(data, 1.0)
    for name in names:
        assert res.estimates[name] == pytest.approx(g.mean(), abs=1e-12), name


def test_half_mode_am_and_is_use_all_data():
    full = ExperimentConfig("modelfail", estimators=("AM", "IS", "DR"), n_grid=(20,), trials=2)
    half = ExperimentConfig("modelfail", estimators=("AM", "IS", "DR"), n_grid=(20,), trials=2, data_mode="half")
    a, b = run_trial(full, 20, 0), run_trial(half, 20, 0)
    assert a.estimates["AM"] == b.estimates["AM"]
    assert a.estimates["IS"] == b.estimates["IS"]
    assert a.estimates["DR"] != b.estimates["DR"]


def test_half_mode_am_matches_direct_fit():
    domain = build_modelfail()
    cfg = ExperimentConfig("modelfail", estimators=("AM",), n_grid=(10,), trials=2, data_mode="half")
    res = run_trial(cfg, 10, 3, domain)
    data = domain.sample(10, _generator(trial_seed(0, "modelfail", 10, 3, 0)))
    m = fit_mle_model(data, 2, 2, 2)
    assert res.estimates["AM"] == pytest.approx(am_estimate(m, value_tables(m, domain.evaluation, 1.0)), abs=1e-15)


def test_magic_records_return_range():
    cfg = ExperimentConfig("modelfail", estimators=("MAGIC", "MAGIC-B"), n_grid=(16,), trials=2, kappa=20)
    res = run_trial(cfg, 16, 0)
    for name in ("MAGIC", "MAGIC-B"):
        lo, hi = res.return_ranges[name]
        assert lo - 1e-12 <= res.estimates[name] <= hi + 1e-12


def test_failures_become_nan_with_reason():
    cfg = ExperimentConfig("modelfail", estimators=("MAGIC",), n_grid=(1,), trials=2)
    res = run_trial(cfg, 1, 0)
    assert math.isnan(res.estimates["MAGIC"]) and "MAGIC" in res.reasons


def test_aggregate_zero_error_and_nan_exclusion():
    cfg = ExperimentConfig("modelfail", estimators=("AM",), n_grid=(4,), trials=3)
    results = [TrialResult(4, k, {"AM": v}) for k, v in enumerate([0.5, 0.5, math.nan])]
    (row,) = aggregate(cfg, results, 0.5)
    assert row.mse == 0.0 and row.std_err == 0.0 and row.trials == 2
    results = [TrialResult(4, k, {"AM": v}) for k, v in enumerate([1.0, 3.0])]
    (row,) = aggregate(cfg, results, 0.0)
    assert row.mse == 5.0 and row.std_err == pytest.approx(np.std([1.0, 9.0], ddof=1) / math.sqrt(2))


def test_csv_header_only(tmp_path):
    p = tmp_path / "out.csv"
    write_csv([], p)
    assert p.read_text() == ",".join(CSV_HEADER) + "\n"
    assert read_csv(p) == []


def test_csv_round_trip_and_order(tmp_path):
    rows = [ResultRow("modelfail", "WDR", "full", 64, 1 / 3, 0.1, 128),
            ResultRow("modelfail", "AM", "full", 1024, 2.0, math.nan, 1),
            ResultRow("modelfail", "AM", "full", 8, 1e-300, 0.0, 128)]
    p = tmp_path / "out.csv"
    write_csv(rows, p)
    lines = p.read_text().splitlines()
    assert lines[1].startswith("modelfail,AM,full,8,")
    assert "0.33333333333333331" in lines[3]
    back = read_csv(p)
    assert [(r.estimator, r.n) for r in back] == [("AM", 8), ("AM", 1024), ("WDR", 64)]
    assert back[2].mse == 1 / 3 and back[0].mse == 1e-300 and math.isnan(back[1].std_err)


def test_write_csv_reports_path(tmp_path):
    bad = tmp_path / "missing" / "out.csv"
    with pytest.raises(OSError, match="missing"):
        write_csv([], bad)


def test_thread_count_does_not_change_results():
    cfg = ExperimentConfig("modelfail", estimators=("WDR", "MAGIC"), n_grid=(8, 16), trials=3, kappa=20)
    one = run_trials(cfg, threads=1)
    two = run_trials(cfg, threads=2)
    assert [r.estimates for r in one] == [r.estimates for r in two]


def test_run_experiment_rows():
    cfg = ExperimentConfig("modelwin", estimators=("AM", "WDR"), n_grid=(8, 16), trials=4)
    rows = run_experiment(cfg)
    assert [(r.estimator, r.n) for r in rows] == [("AM", 8), ("AM", 16), ("WDR", 8), ("WDR", 16)]
    assert all(r.trials == 4 and r.mse >= 0 for r in rows)


def test_cli_writes_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(["--domain", "modelfail", "--estimators", "AM,WDR,MAGIC-B", "--n-grid", "8,16",
                 "--trials", "3", "--kappa", "20", "--j-set=-1,0,inf", "--out", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 6 and {r.domain for r in rows} == {"modelfail"}


def test_cli_is_reproducible(tmp_path):
    args = ["--domain", "modelwin", "--estimators", "WDR,MAGIC", "--n-grid", "8", "--trials", "3", "--kappa", "20"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--seed", "0"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_configuration_errors(tmp_path, capsys):
    out = str(tmp_path / "r.csv")
    assert main(["--domain", "modelfail", "--data-mode", "half", "--n-grid", "7", "--out", out]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert main(["--domain", "modelfail", "--estimators", "FOO", "--out", out]) == 2
    assert main(["--domain", "modelfail", "--j-set", "0,inf", "--out", out]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["--domain", "nowhere", "--out", out])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["--domain", "modelfail", "--threads", "0", "--out", out])


def test_cli_unwritable_output(tmp_path, capsys):
    out = str(tmp_path / "nope" / "r.csv")
    code = main(["--domain", "modelfail", "--estimators", "AM", "--n-grid", "8", "--trials", "2", "--out", out])
    assert code == 1 and "nope" in capsys.readouterr().err
