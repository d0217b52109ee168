"""Acceptance criteria at full tolerance, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
Runtime budgets are part of each verdict.
"""

import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from kdeis.analysis import integrated_bias, kl_tv_relations, rate_fit
from kdeis.distributions import cauchy_model, exact_integral, gaussian_model, laplace_model
from kdeis.estimators import clipped_snis_estimate, snis_estimate
from kdeis.experiments import default_config, run_experiment
from kdeis.kde import bias_bound, build_kde, gaussian_kernel, gaussian_sobolev_norms
from kdeis.proposals import make_defensive
from kdeis.report import read_rows, write_outputs
from kdeis.seeding import replicate_rng

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

P = laplace_model(10, 1.5)
PHI = cauchy_model(30)
F = lambda x: (np.asarray(x, dtype=float) - 5.0) ** 2  # noqa: E731
H200 = math.sqrt(4.5) * 200**-0.2


def default_problem_proposal(rng, delta=0.5, N=200):
    z = P.sample(rng, N)
    return make_defensive(build_kde(z, math.sqrt(4.5) * N**-0.2), PHI, delta)


def criterion_1():
    value = exact_integral(P, F)
    return abs(value - 29.5) <= 1e-6, f"I(f) = {value!r}", 1


def criterion_2():
    cfg = default_config("estimate", reps=2000, n_grid=(500,), N_grid=(200,), delta_modes=("0.5",))
    raw, _ = run_experiment(cfg)
    v = np.array([r["value"] for r in raw if r["metric"] == "estimate"])
    se = v.std(ddof=1) / math.sqrt(len(v))
    gap = abs(v.mean() - 29.5)
    return gap <= 4 * se, f"|mean - 29.5| = {gap:.4g}, 4 SE = {4 * se:.4g}", 60


def criterion_3():
    cfg = default_config("fig3_mid", delta_modes=("1",), n_grid=(100, 1000, 10_000, 100_000),
                         reps=1000)
    _, agg = run_experiment(cfg)
    rows = [r for r in agg if r["metric"] == "mae"]
    fit = rate_fit([r["n"] for r in rows], [r["value"] for r in rows])
    ok = -0.6 <= fit.slope <= -0.4 and fit.r_squared >= 0.98
    return ok, f"slope = {fit.slope:.4f}, R^2 = {fit.r_squared:.4f}", 300


def criterion_4():
    cfg = default_config("rates_mise", target="gaussian(0,1)", reps=200, regimes=("iid",),
                         bandwidth_scale="1")
    _, agg = run_experiment(cfg)
    out = {m: next(r["value"] for r in agg if r["metric"] == f"{m}_slope") for m in ("mise", "miae")}
    ok = -1.0 <= out["mise"] <= -0.6 and -0.55 <= out["miae"] <= -0.25
    return ok, f"MISE slope = {out['mise']:.4f}, MIAE slope = {out['miae']:.4f}", 300


def criterion_5():
    p = gaussian_model(0, 1)
    hs = [0.05, 0.1, 0.2, 0.4]
    bias = [integrated_bias(p, h, "L1") for h in hs]
    bounds = [bias_bound(gaussian_sobolev_norms(1.0), gaussian_kernel(1), h) for h in hs]
    fit = rate_fit(hs, bias)
    dominated = all(b <= c for b, c in zip(bias, bounds))
    ok = 1.9 <= fit.slope <= 2.1 and dominated
    return ok, f"slope = {fit.slope:.4f}, bias <= bound at every h: {dominated}", 60


def criterion_6():
    cfg = default_config("bounds", reps=2000, mise_reps=200,
                         regimes=("defensive", "defensive_companion"))
    _, agg = run_experiment(cfg)
    d = {(r["regime"], r["metric"]): r for r in agg}
    main, comp = d[("defensive", "variance")], d[("defensive_companion", "variance")]
    ok = main["check"] == "pass" and comp["check"] == "pass"
    detail = (f"Cauchy(30) defense: Var upper CI {main['ci_hi']:.4g} <= bound {main['reference']:.4g}"
              f" (sigma^2(f) infinite, vacuous); Laplace(10,4.5) defense: "
              f"{comp['ci_hi']:.4g} <= {comp['reference']:.4g}")
    return ok, detail, 300


def criterion_7():
    cfg = default_config("bounds", regimes=("random_proposal",), rp_reps=200, mise_reps=200)
    _, agg = run_experiment(cfg)
    rows = [r for r in agg if r["metric"] == "mae"]
    ok = len(rows) == 9 and all(r["check"] == "pass" for r in rows)
    worst = max(r["ci_hi"] / r["reference"] for r in rows)
    return ok, f"{sum(r['check'] == 'pass' for r in rows)}/9 grid points dominated, max CI/bound = {worst:.3f}", 300


def criterion_8():
    q = default_problem_proposal(np.random.default_rng(0))
    one = snis_estimate(lambda x: np.ones_like(x), P, q, 2000, 42).value
    values = {k: snis_estimate(F, P.scaled(k), q, 2000, 42).value for k in (1e-6, 1.0, 1e6)}
    identical = len(set(values.values())) == 1
    spread = max(abs(v - values[1.0]) / values[1.0] for v in values.values())
    ok = one == 1.0 and identical
    return ok, f"f=1 -> {one!r}; bit-identical under scaling: {identical} (max rel. diff {spread:.2e})", 60


def criterion_9():
    active = 0
    for r in range(1000):
        rng = replicate_rng(0, "acceptance-clipping", r)
        rep = clipped_snis_estimate(F, P, default_problem_proposal(rng), 10_000, rng)
        active += rep.clip_active
    freq = active / 1000
    return freq <= 0.01, f"clip active in {active}/1000 replicates", 600


def criterion_10():
    _, agg = run_experiment(default_config("lowerbound", reps=100_000))
    checks = [r for r in agg if r["metric"] in ("p_all_left", "target_mean")]
    ok = len(checks) == 6 and all(r["check"] == "pass" for r in checks)
    p = ", ".join(f"N={r['N']}: {r['value']:.5f} in [{r['ci_lo']:.5f}, {r['ci_hi']:.5f}]"
                  for r in checks if r["metric"] == "p_all_left")
    return ok, p, 120


def criterion_11():
    worst_gap, worst_pinsker = 0.0, math.inf
    for r in range(50):
        rng = replicate_rng(0, "acceptance-kltv", r)
        q = build_kde(P.sample(rng, 200), H200)
        rep = kl_tv_relations(P, q)
        worst_gap = max(worst_gap, rep.miae_identity_gap)
        worst_pinsker = min(worst_pinsker, rep.pinsker_slack)
    ok = worst_gap <= 1e-9 and worst_pinsker >= -1e-3
    return ok, f"max |2TV - IAE| = {worst_gap:.2e}, min sqrt(2KL) - 2TV = {worst_pinsker:.4f}", 60


def criterion_12():
    with tempfile.TemporaryDirectory() as out:
        bands_ok, notes = True, []
        for panel in ("fig3_left", "fig3_mid", "fig3_right"):
            raw, agg = run_experiment(default_config(panel, reps=200))
            paths = write_outputs(out, panel, raw, agg, {"reps": 200})
            rows = [r for r in read_rows(paths["agg"]) if r["metric"] == "mae"]
            bands_ok &= all(float(r["ci_lo"]) <= float(r["value"]) <= float(r["ci_hi"])
                            for r in rows)
            if panel == "fig3_left":
                check = next(r for r in agg if r["metric"] == "schedule_vs_defense")
                notes.append(f"schedule MAE {check['value']:.4f} <= delta=1 MAE + band "
                             f"{check['reference']:.4f}: {check['check']}")
        ok = bands_ok and notes and notes[0].endswith("pass")
    return ok, "; ".join(notes) + f"; bands contain MAE: {bands_ok}", 600


def evaluate(k):
    start = time.perf_counter()
    ok, detail, budget = globals()[f"criterion_{k}"]()
    elapsed = time.perf_counter() - start
    in_time = elapsed < budget
    passed = bool(ok) and in_time
    line = (f"criterion {k}: {'PASS' if passed else 'FAIL'} | {detail} | "
            f"{elapsed:.1f} s (budget {budget} s{'' if in_time else ', exceeded'})")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed, line


@pytest.mark.parametrize("k", range(1, 13))
def test_acceptance_criterion(k):
    passed, line = evaluate(k)
    assert passed, line


if __name__ == "__main__":
    sys.path.insert(0, str(Path(__file__).parent))
    results = [evaluate(k)[0] for k in range(1, 13)]
    sys.exit(0 if all(results) else 1)
