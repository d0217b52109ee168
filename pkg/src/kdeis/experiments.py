"""Replicated experiments behind the command line: configuration and runners.

Every runner returns a list of row dicts with the columns of
:data:`kdeis.report.COLUMNS`. Replicate ``r`` of grid point ``g`` under
delta mode ``j`` always draws from
``replicate_rng(master_seed, stream, g, j, r)``, so results do not depend
on the thread count or completion order.
"""

import configparser
import math
import re
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import stats

from . import analysis
from .distributions import (
    bimodal_lowerbound_model,
    cauchy_model,
    exact_integral,
    gaussian_model,
    laplace_model,
)
from .errors import ConfigError, DivisionHazardError, KdeisError
from .estimators import clipped_snis_estimate, is_estimate, snis_estimate
from .kde import bandwidth_schedule, build_kde, gaussian_kernel, kernel_moment_constant
from .mcmc import nonstationary_config, rwm_chains, stationary_config
from .proposals import DELTA_REGIMES, delta_schedule, make_defensive
from .seeding import parallel_map, replicate_rng

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "parse_model",
    "parse_integrand",
    "run_experiment",
    "run_panel",
    "run_rates",
    "run_bounds",
    "run_lowerbound",
    "run_estimate",
]

EXPERIMENTS = ("fig3_left", "fig3_mid", "fig3_right", "rates_mise", "rates_miae",
               "bounds", "lowerbound", "estimate")
PANELS = ("fig3_left", "fig3_mid", "fig3_right")
RATE_REGIMES = ("iid", "chain_burned_in", "chain_nonstationary")
BOUND_SECTIONS = ("defensive", "defensive_companion", "random_proposal")
ESTIMATORS = ("IS", "SNIS", "SNIS_CLIPPED")


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of one experiment; see :func:`default_config` for defaults."""

    experiment: str
    target: str = "laplace(10,1.5)"
    defense: str = "cauchy(30)"
    integrand: str = "power(5,2)"
    delta_modes: tuple = ("0", "0.5", "1", "schedule")
    N_grid: tuple = (200,)
    n_grid: tuple = (2000,)
    reps: int = 1000
    bootstrap_B: int = 2000
    master_seed: int = 0
    output_dir: str = "."
    threads: int = 1
    bandwidth_scale: str = "true_sd"
    delta_c0: float = 0.5
    coupling_fast: float = 1.0
    coupling_slow: float = 1.0
    regimes: tuple = ()
    mise_reps: int = 200
    companion_defense: str = "laplace(10,4.5)"
    rp_target: str = "gaussian(0,1)"
    rp_integrand: str = "power(0,2)"
    rp_N_grid: tuple = (50, 200, 800)
    rp_n_grid: tuple = (100, 400, 1600)
    rp_reps: int = 200
    alpha0: float = 1.0
    alpha1: float = 1.0
    estimator: str = "IS"
    target_mean_n: tuple = (1, 10, 100)
    grid_defaults: bool = field(default=True, compare=False)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        for name in ("N_grid", "n_grid", "rp_N_grid", "rp_n_grid"):
            g = getattr(self, name)
            if len(g) == 0 or any(int(v) != v or v < 1 for v in g):
                raise ConfigError(f"{name} must be a nonempty list of positive integers")
            if any(b <= a for a, b in zip(g[:-1], g[1:])):
                raise ConfigError(f"{name} must be strictly increasing")
        min_reps = 1 if self.experiment == "estimate" else 2
        if self.reps < min_reps:
            raise ConfigError(f"reps must be >= {min_reps} for {self.experiment}")
        if self.bootstrap_B < 1 or self.mise_reps < 2 or self.rp_reps < 2:
            raise ConfigError("bootstrap_B must be >= 1, mise_reps and rp_reps >= 2")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.delta_modes:
            raise ConfigError("delta_modes must not be empty")
        for mode in self.delta_modes:
            _parse_delta_mode(mode)
        for spec in (self.target, self.defense, self.companion_defense, self.rp_target):
            parse_model(spec)
        parse_integrand(self.integrand)
        parse_integrand(self.rp_integrand)
        if self.bandwidth_scale not in ("true_sd", "sample_sd"):
            try:
                if not float(self.bandwidth_scale) > 0:
                    raise ValueError
            except ValueError:
                raise ConfigError("bandwidth_scale must be true_sd, sample_sd or a positive number")
        if self.experiment.startswith("rates"):
            bad = set(self.regimes) - set(RATE_REGIMES)
            if bad:
                raise ConfigError(f"unknown rate regimes {sorted(bad)}")
        if self.experiment == "bounds":
            bad = set(self.regimes) - set(BOUND_SECTIONS)
            if bad:
                raise ConfigError(f"unknown bound sections {sorted(bad)}")
        if self.experiment == "lowerbound" and self.N_grid[0] < 2:
            raise ConfigError("lowerbound needs N >= 2")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if not (self.coupling_fast > 0 and self.coupling_slow > 0 and self.delta_c0 > 0):
            raise ConfigError("coupling constants and delta_c0 must be positive")
        return self


_PANEL_DEFAULTS = {
    "fig3_left": dict(N_grid=(25, 50, 100, 200, 400, 800, 1600), n_grid=(2000,)),
    "fig3_mid": dict(N_grid=(200,), n_grid=(125, 250, 500, 1000, 2000, 4000, 8000)),
    "fig3_right": dict(N_grid=tuple(range(10, 101, 10)), n_grid=(1,)),
    "rates_mise": dict(target="gaussian(0,1)", N_grid=tuple(2**k for k in range(8, 15)),
                       reps=200, regimes=RATE_REGIMES, bandwidth_scale="1"),
    "rates_miae": dict(target="gaussian(0,1)", N_grid=tuple(2**k for k in range(8, 15)),
                       reps=200, regimes=RATE_REGIMES, bandwidth_scale="1"),
    "bounds": dict(delta_modes=("0.5",), N_grid=(200,), n_grid=(2000,), reps=2000,
                   regimes=BOUND_SECTIONS),
    "lowerbound": dict(N_grid=(2, 3, 4), n_grid=(10,), reps=100_000),
    "estimate": dict(delta_modes=("0.5",), N_grid=(200,), n_grid=(2000,), reps=1),
}


def default_config(experiment, **overrides):
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    values = dict(_PANEL_DEFAULTS[experiment])
    values.update(overrides)
    return ExperimentConfig(experiment=experiment, **values).validate()


_TUPLE_INT = {"N_grid", "n_grid", "rp_N_grid", "rp_n_grid", "target_mean_n"}
_TUPLE_STR = {"delta_modes", "regimes"}


def _coerce(name, raw):
    """Convert a config-file or flag string to the field's type."""
    kind = {f.name: f.type for f in fields(ExperimentConfig)}.get(name)
    if kind is None:
        raise ConfigError(f"unknown config key {name!r}")
    try:
        if name in _TUPLE_INT:
            return tuple(int(v) for v in str(raw).replace(" ", "").split(",") if v)
        if name in _TUPLE_STR:
            return tuple(v.strip() for v in str(raw).split(",") if v.strip())
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            return str(raw).lower() in ("1", "true", "yes", "on")
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def load_config(experiment, path=None, overrides=None):
    """Defaults, then the ``[common]`` and ``[<experiment>]`` INI sections, then overrides."""
    values = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section in ("common", experiment):
            if parser.has_section(section):
                for key, raw in parser.items(section):
                    values[key] = _coerce(key, raw)
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = raw if not isinstance(raw, str) else _coerce(key, raw)
    grid_keys = {"N_grid", "n_grid"}
    values["grid_defaults"] = not (grid_keys & set(values))
    try:
        return default_config(experiment, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


_SPEC = re.compile(r"^\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*$")


def _spec_args(spec):
    m = _SPEC.match(str(spec).lower())
    if not m:
        raise ConfigError(f"cannot parse {spec!r}")
    name, args = m.group(1), m.group(2)
    try:
        values = [float(a) for a in args.split(",")] if args and args.strip() else []
    except ValueError as exc:
        raise ConfigError(f"bad arguments in {spec!r}") from exc
    return name, values


def parse_model(spec):
    """``laplace(mu,b)``, ``gaussian(mu,sigma)`` / ``normal(...)`` or ``cauchy(s[,loc])``."""
    name, a = _spec_args(spec)
    try:
        if name == "laplace" and len(a) == 2:
            return laplace_model(*a)
        if name in ("gaussian", "normal") and len(a) in (0, 2):
            return gaussian_model(*a)
        if name == "cauchy" and len(a) in (1, 2):
            return cauchy_model(*a)
    except KdeisError as exc:
        raise ConfigError(f"invalid model {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown model {spec!r}")


def parse_integrand(spec):
    """``power(a,k)`` for ``(x - a)^k``, ``identity`` or ``one``."""
    name, a = _spec_args(spec)
    if name == "power" and len(a) == 2:
        shift, k = a
        if k == int(k) and k >= 0:
            k = int(k)
            return lambda x: (np.asarray(x, dtype=float) - shift) ** k
    if name == "identity" and not a:
        return lambda x: np.asarray(x, dtype=float) + 0.0
    if name == "one" and not a:
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    raise ConfigError(f"unknown integrand {spec!r}")


def _parse_delta_mode(mode):
    if mode == "schedule":
        return "numerics_rule"
    if mode.startswith("schedule:"):
        regime = mode.split(":", 1)[1]
        if regime not in DELTA_REGIMES or regime == "general_eta":
            raise ConfigError(f"unknown delta schedule {regime!r}")
        return regime
    try:
        value = float(mode)
    except ValueError as exc:
        raise ConfigError(f"bad delta mode {mode!r}") from exc
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"fixed delta must lie in [0, 1], got {mode!r}")
    return value


def _delta_value(mode, N, c0):
    parsed = _parse_delta_mode(mode)
    if isinstance(parsed, float):
        return parsed
    return delta_schedule(parsed, 1, N, c0)


def _bandwidth(config, target, sample, N, regime="numerics_rule"):
    if config.bandwidth_scale == "true_sd":
        scale = math.sqrt(target.variance)
    elif config.bandwidth_scale == "sample_sd":
        scale = None
    else:
        scale = float(config.bandwidth_scale)
    return bandwidth_schedule(regime, 1, N, scale=scale, sample=sample)


def _row(config, regime="", N="", n="", delta_mode="", delta_value="", h="",
         replicate="AGG", metric="", value="", reference="", ci_lo="", ci_hi="",
         failures="", check=""):
    return dict(experiment=config.experiment, regime=regime, N=N, n=n,
                delta_mode=delta_mode, delta_value=delta_value, h=h, replicate=replicate,
                metric=metric, value=value, reference=reference, ci_lo=ci_lo,
                ci_hi=ci_hi, failures=failures, check=check)


def bootstrap_band(values, B, rng, level=0.95):
    """Percentile bootstrap interval of the mean, widened to contain it."""
    v = np.asarray(values, dtype=float)
    mean = math.fsum(v) / len(v)
    if len(v) < 2 or np.ptp(v) == 0.0:
        return mean, mean, mean
    res = stats.bootstrap((v,), np.mean, n_resamples=int(B), confidence_level=level,
                          method="percentile", vectorized=True, random_state=rng)
    lo, hi = float(res.confidence_interval.low), float(res.confidence_interval.high)
    return mean, min(lo, mean), max(hi, mean)


def _is_replicate(target, defense, f, N, n, delta, config, rng):
    z = target.sample(rng, N)
    h = _bandwidth(config, target, z, N)
    proposal = make_defensive(build_kde(z, h), defense, delta)
    try:
        value = is_estimate(f, target, proposal, n, rng).value
    except DivisionHazardError:
        return h, math.nan
    return h, value


def _panel_points(config):
    """``(regime, N, n)`` triples for a panel."""
    exp = config.experiment
    if exp == "fig3_left":
        return [("fixed_n", N, config.n_grid[0]) for N in config.N_grid]
    if exp == "fig3_mid":
        return [("fixed_N", config.N_grid[0], n) for n in config.n_grid]
    fast = [("n~N^2", N, max(1, math.ceil(config.coupling_fast * N * N))) for N in config.N_grid]
    slow = [("n~N^(2/5)", N, max(1, math.ceil(config.coupling_slow * N**0.4)))
            for N in config.N_grid]
    return fast + slow


def run_panel(config):
    """MAE of defensive-KDE IS over a grid of ``(N, n)`` and delta modes."""
    target = parse_model(config.target)
    defense = parse_model(config.defense)
    f = parse_integrand(config.integrand)
    exact = exact_integral(target, f)
    points = _panel_points(config)
    jobs = [(g, j, r) for g in range(len(points))
            for j in range(len(config.delta_modes)) for r in range(config.reps)]

    def one(job):
        g, j, r = job
        regime, N, n = points[g]
        delta = _delta_value(config.delta_modes[j], N, config.delta_c0)
        rng = replicate_rng(config.master_seed, config.experiment, g, j, r)
        return _is_replicate(target, defense, f, N, n, delta, config, rng)

    results = parallel_map(one, jobs, config.threads)
    raw, agg = [], []
    by_cell = {}
    for (g, j, r), (h, value) in zip(jobs, results):
        regime, N, n = points[g]
        mode = config.delta_modes[j]
        delta = _delta_value(mode, N, config.delta_c0)
        failed = math.isnan(value)
        raw.append(_row(config, regime, N, n, mode, delta, h, r, "estimate", value, exact,
                        failures=int(failed)))
        by_cell.setdefault((g, j), []).append((h, value))
    for (g, j), cell in sorted(by_cell.items()):
        regime, N, n = points[g]
        mode = config.delta_modes[j]
        delta = _delta_value(mode, N, config.delta_c0)
        values = np.array([v for _, v in cell])
        ok = values[~np.isnan(values)]
        failures = int(len(values) - len(ok))
        hs = np.array([h for h, _ in cell])
        h = float(hs[0]) if np.all(hs == hs[0]) else float(hs.mean())
        if len(ok) == 0:
            mae = lo = hi = math.nan
        else:
            boot_rng = replicate_rng(config.master_seed, config.experiment + ":bootstrap", g, j)
            mae, lo, hi = bootstrap_band(np.abs(ok - exact), config.bootstrap_B, boot_rng)
        agg.append(_row(config, regime, N, n, mode, delta, h, "AGG", "mae", mae, exact,
                        lo, hi, failures))
    if config.experiment == "fig3_left":
        agg.extend(_interpolation_check(config, agg))
    return raw, agg


def _interpolation_check(config, agg):
    """Schedule MAE at the largest N against the pure-defense MAE plus band."""
    if "schedule" not in config.delta_modes or "1" not in config.delta_modes:
        return []
    N = config.N_grid[-1]
    cell = {r["delta_mode"]: r for r in agg if r["N"] == N and r["metric"] == "mae"}
    sched, pure = cell["schedule"]["value"], cell["1"]
    limit = pure["value"] + (pure["ci_hi"] - pure["value"])
    ok = sched <= limit
    return [_row(config, "fixed_n", N, config.n_grid[0], "schedule", "", "", "AGG",
                 "schedule_vs_defense", sched, limit, failures=0,
                 check="pass" if ok else "fail")]


def _rate_sample(regime, target, N, rngs):
    if regime == "iid":
        return [target.sample(rng, N) for rng in rngs]
    if regime == "chain_burned_in":
        cfg = stationary_config(target, N)
    else:
        cfg = nonstationary_config(target, N)
    return [out.states for out in rwm_chains(cfg, rngs)]


def run_rates(config):
    """Empirical MISE and MIAE of the KDE over ``N_grid`` with fitted slopes.

    Auxiliary samples come from i.i.d. draws, a burned-in random-walk
    Metropolis chain, or a chain from a fixed start without burn-in. The
    first two use ``h = scale N^(-1/(d+4))``, the last
    ``h = scale N^(-1/(2d+4))``. Both error metrics come from the same
    evaluation; the experiment name picks the primary one, which drives the
    burned-in versus i.i.d. slope check and the bound evaluation.
    """
    target = parse_model(config.target)
    primary = "mise" if config.experiment == "rates_mise" else "miae"
    theory = {"mise": -0.8, "miae": -0.4}
    regimes = config.regimes or RATE_REGIMES
    kernel = gaussian_kernel(1)
    raw, agg = [], []
    slopes = {}
    for ri, regime in enumerate(regimes):
        bw_regime = "nonstationary_optimal" if regime == "chain_nonstationary" else "iid_optimal"
        means = {"mise": [], "miae": []}
        for g, N in enumerate(config.N_grid):
            rngs = [replicate_rng(config.master_seed, f"rates:{regime}", g, 0, r)
                    for r in range(config.reps)]
            samples = _rate_sample(regime, target, N, rngs)

            def one(z, N=N):
                h = _bandwidth(config, target, z, N, bw_regime)
                iae, ise = analysis.integrated_errors(build_kde(z, h, kernel), target)
                return h, ise, iae

            results = parallel_map(one, samples, config.threads)
            hs = np.array([res[0] for res in results])
            for k, metric in ((1, "mise"), (2, "miae")):
                values = np.array([res[k] for res in results])
                for r, v in enumerate(values):
                    raw.append(_row(config, regime, N, "", "", "", hs[r], r, metric, v))
                boot_rng = replicate_rng(config.master_seed,
                                         f"{config.experiment}:bootstrap:{metric}", ri, g)
                mean, lo, hi = bootstrap_band(values, config.bootstrap_B, boot_rng)
                means[metric].append(mean)
                agg.append(_row(config, regime, N, "", "", "", float(hs.mean()), "AGG", metric,
                                mean, "", lo, hi, 0))
        for metric in (primary, "miae" if primary == "mise" else "mise"):
            fit = analysis.rate_fit(config.N_grid, means[metric])
            if metric == primary:
                slopes[regime] = fit.slope
            agg.append(_row(config, regime, "", "", "", "", "", "AGG", f"{metric}_slope",
                            fit.slope, theory[metric]))
            agg.append(_row(config, regime, "", "", "", "", "", "AGG", f"{metric}_r_squared",
                            fit.r_squared))
        if regime == "chain_nonstationary":
            agg.extend(_nonstationary_bound_rows(config, kernel, primary))
    if "iid" in slopes and "chain_burned_in" in slopes:
        gap = abs(slopes["chain_burned_in"] - slopes["iid"])
        agg.append(_row(config, "chain_burned_in", "", "", "", "", "", "AGG",
                        f"{primary}_slope_gap_to_iid", gap, 0.15,
                        check="pass" if gap <= 0.15 else "fail"))
    return raw, agg


def _nonstationary_bound_rows(config, kernel, metric):
    """Evaluate the fixed-start bound along the grid and fit its slope."""
    phi = lambda t: (1.0 + np.asarray(t, dtype=float)) ** -2.0  # noqa: E731
    B = {r: kernel_moment_constant(kernel.envelope, phi, r, 1) for r in (1, 2, 4)}
    rows, values = [], []
    for N in config.N_grid:
        h = bandwidth_schedule("nonstationary_optimal", 1, N, scale=1.0)
        b = analysis.nonstationary_bound(config.alpha0, config.alpha1, B[1], B[2], B[4],
                                         kernel, N, h)
        v = b.mise_stoch_bound if metric == "mise" else b.miae_stoch_bound
        values.append(v)
        rows.append(_row(config, "chain_nonstationary", N, "", "", "", h, "AGG",
                         f"{metric}_stoch_bound", v))
    fit = analysis.rate_fit(config.N_grid, values)
    theory = -2.0 / 3.0 if metric == "mise" else -1.0 / 3.0
    rows.append(_row(config, "chain_nonstationary", "", "", "", "", "", "AGG",
                     f"{metric}_stoch_bound_slope", fit.slope, theory))
    return rows


def _kde_generator(target, N, config):
    def make(rng):
        z = target.sample(rng, N)
        return build_kde(z, _bandwidth(config, target, z, N))
    return make


def _defensive_section(config, defense_spec, regime):
    target = parse_model(config.target)
    defense = parse_model(defense_spec)
    f = parse_integrand(config.integrand)
    exact = exact_integral(target, f)
    N, n = config.N_grid[0], config.n_grid[0]
    delta = _delta_value(config.delta_modes[0], N, config.delta_c0)
    errs = analysis.mise_miae_estimate(_kde_generator(target, N, config), config.mise_reps,
                                       target, "both", master_seed=config.master_seed,
                                       threads=config.threads, stream=f"bounds:{regime}:mise")
    terms = analysis.defensive_variance_terms(target, defense, f, delta, errs["L2"].mean,
                                              extended=True)

    def one(r):
        rng = replicate_rng(config.master_seed, f"bounds:{regime}", 0, 0, r)
        return _is_replicate(target, defense, f, N, n, delta, config, rng)

    results = parallel_map(one, range(config.reps), config.threads)
    rows = []
    for r, (h, v) in enumerate(results):
        rows.append(_row(config, regime, N, n, config.delta_modes[0], delta, h, r, "estimate",
                         v, exact, failures=int(math.isnan(v))))
    values = np.array([v for _, v in results])
    ok = values[~np.isnan(values)]
    failures = len(values) - len(ok)
    var_hat = float(np.var(ok, ddof=1))
    var_hi = analysis.variance_upper_ci(ok, 0.99)
    bound = terms.sigma_delta_f_sq / n
    mae_hi = analysis.mean_upper_ci(np.abs(ok - exact), 0.99)
    mae_bound = math.sqrt(terms.sigma_delta_f_sq / n)
    h = results[0][0]
    common = dict(regime=regime, N=N, n=n, delta_mode=config.delta_modes[0],
                  delta_value=delta, h=h)
    agg = [
        _row(config, **common, metric="mise_q0", value=errs["L2"].mean,
             ci_lo=errs["L2"].mean - 2.576 * errs["L2"].se,
             ci_hi=errs["L2"].mean + 2.576 * errs["L2"].se),
        _row(config, **common, metric="var_f", value=terms.var_f),
        _row(config, **common, metric="term_sqrtp_over_phi", value=terms.sqrtp_over_phi),
        _row(config, **common, metric="term_f2sqrtp_over_phi", value=terms.f2sqrtp_over_phi),
        _row(config, **common, metric="term_abs_p_minus_phi_f2",
             value=terms.abs_p_minus_phi_f2),
        _row(config, **common, metric="sigma_delta_sq", value=terms.sigma_delta_sq),
        _row(config, **common, metric="sigma_delta_f_sq", value=terms.sigma_delta_f_sq),
        _row(config, **common, metric="variance", value=var_hat, reference=bound,
             ci_hi=var_hi, failures=failures, check="pass" if var_hi <= bound else "fail"),
        _row(config, **common, metric="mae", value=float(np.mean(np.abs(ok - exact))),
             reference=mae_bound, ci_hi=mae_hi, failures=failures,
             check="pass" if mae_hi <= mae_bound else "fail"),
    ]
    return rows, agg


def _random_proposal_section(config):
    target = parse_model(config.rp_target)
    f = parse_integrand(config.rp_integrand)
    exact = exact_integral(target, f)
    f_norm = analysis.l2_norm(target, f)
    raw, agg = [], []
    for g, N in enumerate(config.rp_N_grid):
        errs = analysis.mise_miae_estimate(_kde_generator(target, N, config), config.mise_reps,
                                           target, "both", master_seed=config.master_seed,
                                           threads=config.threads,
                                           stream=f"bounds:random_proposal:miae:{g}")
        miae = errs["L1"].mean
        agg.append(_row(config, "random_proposal", N, "", "0", 0.0, "", "AGG", "miae",
                        miae, "", miae - 2.576 * errs["L1"].se, miae + 2.576 * errs["L1"].se))
        for k, n in enumerate(config.rp_n_grid):
            def one(r, N=N, n=n, g=g, k=k):
                rng = replicate_rng(config.master_seed, "bounds:random_proposal", g, k, r)
                z = target.sample(rng, N)
                q = build_kde(z, _bandwidth(config, target, z, N))
                try:
                    return is_estimate(f, target, q, n, rng).value
                except DivisionHazardError:
                    return math.nan

            values = np.array(parallel_map(one, range(config.rp_reps), config.threads))
            ok = values[~np.isnan(values)]
            for r, v in enumerate(values):
                raw.append(_row(config, "random_proposal", N, n, "0", 0.0, "", r,
                                "estimate", v, exact, failures=int(math.isnan(v))))
            errors = np.abs(ok - exact)
            mae_hi = analysis.mean_upper_ci(errors, 0.99)
            bound = analysis.random_proposal_error_bound(f_norm, n, miae)
            agg.append(_row(config, "random_proposal", N, n, "0", 0.0, "", "AGG", "mae",
                            float(errors.mean()), bound, ci_hi=mae_hi,
                            failures=len(values) - len(ok),
                            check="pass" if mae_hi <= bound else "fail"))
    return raw, agg


def run_bounds(config):
    """Empirical errors next to the defensive and random-proposal bounds.

    Sections: ``defensive`` (the configured defense), ``defensive_companion``
    (``companion_defense``, for which all integrability terms are finite)
    and ``random_proposal`` (pure-KDE IS on ``rp_target`` over the
    ``rp_N_grid x rp_n_grid`` grid).
    """
    raw, agg = [], []
    sections = config.regimes or BOUND_SECTIONS
    if "defensive" in sections:
        r, a = _defensive_section(config, config.defense, "defensive")
        raw += r
        agg += a
    if "defensive_companion" in sections:
        r, a = _defensive_section(config, config.companion_defense, "defensive_companion")
        raw += r
        agg += a
    if "random_proposal" in sections:
        r, a = _random_proposal_section(config)
        raw += r
        agg += a
    return raw, agg


def run_lowerbound(config):
    """Frequency of the all-left event and of constant-size IS errors."""
    raw, agg = [], []
    n = config.n_grid[0]
    for g, N in enumerate(config.N_grid):
        rng = replicate_rng(config.master_seed, config.experiment, g)
        res = analysis.lowerbound_demo(N, n, config.reps, rng)
        lo, hi = analysis.binomial_acceptance_interval(config.reps, res.p_en_exact)
        ok = lo <= res.p_en_hat <= hi
        agg.append(_row(config, "bimodal", N, n, "", "", "", "AGG", "p_all_left", res.p_en_hat,
                        res.p_en_exact, lo, hi, 0, "pass" if ok else "fail"))
        agg.append(_row(config, "bimodal", N, n, "", "", "", "AGG", "p_error_ge_1",
                        res.error_mass_hat))
        agg.append(_row(config, "bimodal", N, n, "", "", "", "AGG",
                        "p_error_ge_1_given_all_left", res.error_mass_given_en))
    for m in config.target_mean_n:
        mean = exact_integral(bimodal_lowerbound_model(m), lambda x: x)
        ok = abs(mean - 1.0) <= 1e-6
        agg.append(_row(config, "bimodal", "", m, "", "", "", "AGG", "target_mean", mean, 1.0,
                        check="pass" if ok else "fail"))
    return raw, agg


def run_estimate(config):
    """Replicated single-configuration estimates with weight diagnostics."""
    target = parse_model(config.target)
    defense = parse_model(config.defense)
    f = parse_integrand(config.integrand)
    exact = exact_integral(target, f)
    N, n = config.N_grid[0], config.n_grid[0]
    mode = config.delta_modes[0]
    delta = _delta_value(mode, N, config.delta_c0)
    estimator = {"IS": is_estimate, "SNIS": snis_estimate,
                 "SNIS_CLIPPED": clipped_snis_estimate}[config.estimator]

    def one(r):
        rng = replicate_rng(config.master_seed, config.experiment, 0, 0, r)
        z = target.sample(rng, N)
        h = _bandwidth(config, target, z, N)
        q = make_defensive(build_kde(z, h), defense, delta)
        try:
            return h, estimator(f, target, q, n, rng)
        except DivisionHazardError:
            return h, None

    raw = []
    values = []
    for r, (h, rep) in enumerate(parallel_map(one, range(config.reps), config.threads)):
        common = dict(regime=config.estimator, N=N, n=n, delta_mode=mode, delta_value=delta,
                      h=h, replicate=r)
        if rep is None:
            raw.append(_row(config, **common, metric="estimate", value=math.nan,
                            reference=exact, failures=1))
            continue
        values.append(rep.value)
        raw.append(_row(config, **common, metric="estimate", value=rep.value, reference=exact,
                        failures=0))
        for name in ("ess", "mean_weight", "max_weight"):
            raw.append(_row(config, **common, metric=name, value=getattr(rep, name)))
        raw.append(_row(config, **common, metric="clip_active", value=int(rep.clip_active)))
    agg = []
    if values:
        v = np.asarray(values)
        boot_rng = replicate_rng(config.master_seed, config.experiment + ":bootstrap")
        mean, lo, hi = bootstrap_band(v, config.bootstrap_B, boot_rng)
        agg.append(_row(config, config.estimator, N, n, mode, delta, "", "AGG", "mean_estimate",
                        mean, exact, lo, hi, config.reps - len(values)))
        if len(values) > 1:
            mae, lo, hi = bootstrap_band(np.abs(v - exact), config.bootstrap_B, boot_rng)
            agg.append(_row(config, config.estimator, N, n, mode, delta, "", "AGG", "mae", mae,
                            exact, lo, hi, config.reps - len(values)))
    return raw, agg


_RUNNERS = {
    "fig3_left": run_panel,
    "fig3_mid": run_panel,
    "fig3_right": run_panel,
    "rates_mise": run_rates,
    "rates_miae": run_rates,
    "bounds": run_bounds,
    "lowerbound": run_lowerbound,
    "estimate": run_estimate,
}


def run_experiment(config):
    """Dispatch to the runner for ``config.experiment``; returns ``(raw, agg)``."""
    config.validate()
    return _RUNNERS[config.experiment](config)


def config_dict(config):
    d = asdict(config)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
