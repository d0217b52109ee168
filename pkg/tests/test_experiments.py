import math

import numpy as np
import pytest

from kdeis.errors import ConfigError
from kdeis.experiments import (
    bootstrap_band,
    default_config,
    load_config,
    parse_integrand,
    parse_model,
    run_experiment,
)
from kdeis.seeding import replicate_rng


def mini(experiment, **kw):
    base = dict(N_grid=(10, 20, 40), n_grid=(50,), reps=4, bootstrap_B=50)
    base.update(kw)
    return default_config(experiment, **base)


def test_parse_specs():
    assert parse_model("laplace(10,1.5)").pdf(np.array([10.0]))[0] == pytest.approx(1 / 3)
    assert parse_model("cauchy(30)").pdf(np.array([0.0]))[0] == pytest.approx(1 / (30 * math.pi))
    assert parse_model("normal").pdf(np.array([0.0]))[0] == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert parse_integrand("power(5,2)")(np.array([7.0]))[0] == 4.0
    assert parse_integrand("one")(np.array([7.0]))[0] == 1.0
    for bad in ("laplace(1)", "beta(1,2)", "laplace(0,-1)"):
        with pytest.raises(ConfigError):
            parse_model(bad)


@pytest.mark.parametrize("kw", [dict(N_grid=(20, 10)), dict(N_grid=()), dict(reps=1),
                                dict(delta_modes=("1.5",)), dict(delta_modes=("schedule:x",)),
                                dict(bandwidth_scale="wide"), dict(estimator="MLE")])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        mini("fig3_left", **kw)


def test_config_file_then_overrides(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[common]\nmaster_seed = 9\nreps = 5\n[fig3_mid]\nn_grid = 10, 20, 40\n")
    c = load_config("fig3_mid", cfg, {"reps": 7, "output_dir": None})
    assert (c.master_seed, c.reps, c.n_grid) == (9, 7, (10, 20, 40))
    assert not c.grid_defaults
    with pytest.raises(ConfigError):
        load_config("fig3_mid", cfg, {"nonsense": "1"})


def test_panel_rows_and_bands():
    raw, agg = run_experiment(mini("fig3_left"))
    assert len(raw) == 3 * 4 * 4
    assert all(r["reference"] == pytest.approx(29.5, abs=1e-9) for r in raw)
    maes = [r for r in agg if r["metric"] == "mae"]
    assert len(maes) == 3 * 4
    for r in maes:
        assert r["ci_lo"] <= r["value"] <= r["ci_hi"]
    assert any(r["metric"] == "schedule_vs_defense" for r in agg)


def test_pure_defense_mae_decreases_in_n():
    cfg = default_config("fig3_mid", n_grid=(100, 1000, 10000), reps=100, delta_modes=("1",),
                         bootstrap_B=100)
    _, agg = run_experiment(cfg)
    mae = [r["value"] for r in agg if r["metric"] == "mae"]
    assert all(math.isfinite(m) for m in mae)
    assert mae[0] > mae[1] > mae[2]


def test_right_panel_couplings():
    cfg = mini("fig3_right", coupling_fast=0.5, reps=2)
    raw, _ = run_experiment(cfg)
    pairs = {(r["regime"], r["N"], r["n"]) for r in raw}
    assert ("n~N^2", 20, 200) in pairs
    assert ("n~N^(2/5)", 40, math.ceil(40**0.4)) in pairs


def test_determinism_and_thread_invariance():
    a = run_experiment(mini("fig3_mid", N_grid=(30,), n_grid=(20, 40, 80)))
    b = run_experiment(mini("fig3_mid", N_grid=(30,), n_grid=(20, 40, 80), threads=3))
    assert a == b


def test_seed_changes_results():
    a, _ = run_experiment(mini("fig3_left"))
    b, _ = run_experiment(mini("fig3_left", master_seed=1))
    assert [r["value"] for r in a] != [r["value"] for r in b]


def test_bootstrap_band_contains_mean():
    rng = replicate_rng(0, "t")
    v = np.random.default_rng(0).exponential(size=30)
    mean, lo, hi = bootstrap_band(v, 500, rng)
    assert lo <= mean <= hi and mean == pytest.approx(v.mean())
    assert bootstrap_band([2.0, 2.0], 10, rng) == (2.0, 2.0, 2.0)


def test_rates_rows_small():
    cfg = default_config("rates_miae", N_grid=(64, 128, 256), reps=3, bootstrap_B=20,
                         regimes=("iid", "chain_burned_in"))
    _, agg = run_experiment(cfg)
    metrics = {(r["regime"], r["metric"]) for r in agg}
    assert ("iid", "miae_slope") in metrics and ("chain_burned_in", "mise_r_squared") in metrics
    assert ("chain_burned_in", "miae_slope_gap_to_iid") in metrics
    assert ("iid", "mise") in metrics and ("iid", "miae") in metrics


def test_lowerbound_rows():
    _, agg = run_experiment(default_config("lowerbound", reps=2000))
    p = [r for r in agg if r["metric"] == "p_all_left"]
    assert [r["reference"] for r in p] == [0.25, 0.125, 0.0625]
    assert all(r["check"] == "pass" for r in agg if r["metric"] == "target_mean")


def test_bounds_small():
    cfg = default_config("bounds", reps=50, mise_reps=5, rp_reps=10,
                         regimes=("defensive", "defensive_companion"))
    _, agg = run_experiment(cfg)
    d = {(r["regime"], r["metric"]): r for r in agg}
    assert d[("defensive", "var_f")]["value"] == pytest.approx(551.25, rel=1e-9)
    assert d[("defensive", "sigma_delta_f_sq")]["value"] == math.inf
    assert math.isfinite(d[("defensive_companion", "sigma_delta_f_sq")]["value"])
    assert d[("defensive_companion", "variance")]["check"] == "pass"


def test_estimate_runner_reports_weights():
    raw, agg = run_experiment(default_config("estimate", reps=2, estimator="SNIS"))
    assert {r["metric"] for r in raw} >= {"estimate", "ess", "max_weight"}
    assert agg[0]["metric"] == "mean_estimate"
