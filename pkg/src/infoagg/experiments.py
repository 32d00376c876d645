"""Named experiments: each writes a CSV, a summary with PASS/FAIL checks and,
for curves, an optional SVG."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import stats

from . import rng
from .chatbot import AffineQuery, ChatbotConfig, LogisticQuery, chatbot_demo
from .equilibrium import (aggregate_loading, precision_sweep, price_precision,
                          price_precision_formula, reduced_precision, report_root,
                          solve_multi, solve_report, stability_probe)
from .errors import ConfigError
from .inference import (SignalSet, condition_generic, posterior_theta_multi,
                        report_observation)
from .market import (ScenarioConfig, estimate_price_precision, lln_rate,
                     publisher_advantage_demo, simulate, validate_config)
from .output import Check, write_csv, write_summary, write_svg
from .params import ModelParams, validate

EXPERIMENTS = ("baseline", "report", "sweep", "recover", "stability", "lln", "chatbot",
               "oracle-check")

PARAM_KEYS = tuple(f.name for f in fields(ModelParams))
SCENARIO_KEYS = ("theta", "n_agents", "n_reps", "seed", "lambda")

# per-experiment extra keys and their defaults
EXTRAS: Dict[str, Dict[str, Any]] = {
    "baseline": {},
    "report": {},
    "sweep": {"m_max": 30},
    "recover": {},
    "stability": {"deltas": None, "damping": 0.5, "max_iter": 200_000},
    "lln": {"sizes": [100, 1000, 10_000, 100_000, 1_000_000], "n_seeds": 100},
    "chatbot": {"query_map": {"kind": "affine", "p": 2.0, "q": 1.0},
                "sigma_tau_answer": 1.0, "n_trials": 100},
    "oracle-check": {"n_draws": 1000},
}

SCENARIO_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "baseline": {"n_reps": 10, "n_agents": 1000, "theta": 3.0},
    "report": {"n_reps": 2000, "n_agents": 200, "theta": 0.0},
    "sweep": {"n_reps": 2000, "n_agents": 100, "theta": 0.0},
    "recover": {"n_reps": 1000, "n_agents": 100, "theta": {"mean": 0.0, "std": 1.0}},
    "stability": {"n_reps": 1, "n_agents": 100},
    "lln": {"n_reps": 1, "n_agents": 100, "theta": 2.0},
    "chatbot": {"n_reps": 1, "n_agents": 1_000_000, "theta": 5.0},
    "oracle-check": {"n_reps": 1, "n_agents": 100, "seed": 42},
}

REQUIRED_PUBLISHERS = {"baseline": 0, "report": 1, "recover": 1, "stability": 1}


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    scenario: ScenarioConfig
    output_path: Path
    emit_svg: bool = False
    extras: Dict[str, Any] = field(default_factory=dict)
    workers: int = 1


@dataclass
class ExperimentResult:
    exit_code: int
    checks: List[Check]
    csv_path: Path
    summary_path: Path
    svg_path: Optional[Path] = None


def load_config(path) -> Dict[str, Any]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return raw


def _number(key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def build_spec(name: str, raw: Dict[str, Any], output_path, emit_svg: bool = False,
               seed: Optional[int] = None, reps: Optional[int] = None,
               agents: Optional[int] = None, workers: int = 1) -> ExperimentSpec:
    """Validate a raw config object against ``name`` and fold in CLI overrides."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    extras = dict(EXTRAS[name])
    allowed = set(PARAM_KEYS) | set(SCENARIO_KEYS) | set(extras)
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys for {name}: {', '.join(unknown)}")

    merged = dict(SCENARIO_DEFAULTS[name])
    merged.update(raw)
    param_kw = {}
    for key in PARAM_KEYS:
        if key in merged:
            param_kw[key] = _number(key, merged[key], int if key == "publishers" else float)
    need = REQUIRED_PUBLISHERS.get(name)
    if need is not None:
        if param_kw.get("publishers", need) != need:
            raise ConfigError(f"{name} requires publishers = {need}")
        param_kw["publishers"] = need
    params = ModelParams(**param_kw)

    theta, theta_std = merged.get("theta", 0.0), 0.0
    if isinstance(theta, dict):
        bad = set(theta) - {"mean", "std"}
        if bad:
            raise ConfigError(f"unknown theta keys: {', '.join(sorted(bad))}")
        theta_std = _number("theta.std", theta.get("std", 0.0))
        theta = _number("theta.mean", theta.get("mean", 0.0))
    else:
        theta = _number("theta", theta)

    scenario = ScenarioConfig(
        params=params, theta=theta, theta_std=theta_std,
        n_agents=agents if agents is not None else _number("n_agents", merged.get("n_agents", 1000), int),
        n_reps=reps if reps is not None else _number("n_reps", merged.get("n_reps", 1), int),
        seed=seed if seed is not None else _number("seed", merged.get("seed", 0), int),
        lam=_number("lambda", merged.get("lambda", 0.0)),
    )
    for key in extras:
        if key in raw:
            extras[key] = raw[key]
    return ExperimentSpec(name, scenario, Path(output_path), emit_svg, extras, workers)


def _settings(spec: ExperimentSpec) -> Dict[str, object]:
    s = spec.scenario
    out: Dict[str, object] = {k: getattr(s.params, k) for k in PARAM_KEYS}
    out.update(theta=s.theta, theta_std=s.theta_std, n_agents=s.n_agents, n_reps=s.n_reps,
               seed=s.seed, **{"lambda": s.lam})
    for k, v in spec.extras.items():
        out[k] = json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v
    return out


def _band(n_reps: int) -> float:
    return 3.0 * math.sqrt(2.0 / n_reps)


# --- experiments ----------------------------------------------------------
# each returns (header, rows, checks, notes, svg_series or None)

def _baseline(spec: ExperimentSpec):
    sc = spec.scenario
    p = sc.params
    outcomes = simulate(sc, workers=spec.workers)
    analytic = sc.theta - p.gamma * p.sigma_eta ** 2 * p.supply
    rows = [(o.rep, o.theta, o.price_analytic, o.price_root, o.clearing_residual)
            for o in outcomes]
    price_gap = max(abs(o.price_root - o.price_analytic) for o in outcomes)
    resid = max(abs(o.clearing_residual) for o in outcomes)
    checks = [
        Check("price_formula", analytic, outcomes[0].price_analytic, 1e-14,
              sc.theta_std > 0 or abs(analytic - outcomes[0].price_analytic) <= 1e-14),
        Check("clearing_price", 0.0, price_gap, 1e-14, price_gap <= 1e-14),
        Check("clearing_residual", 0.0, resid, 1e-14, resid <= 1e-14),
    ]
    header = ("rep", "theta", "price_analytic", "price_root", "clearing_residual")
    return header, rows, checks, [], None


def _report(spec: ExperimentSpec):
    sc = spec.scenario
    p = sc.params
    coeffs, diag = solve_report(p)
    outcomes = simulate(sc, workers=spec.workers)
    rows = [(o.rep, o.theta, o.eps[0], o.price_analytic, o.price_root, o.clearing_residual,
             o.z_residual) for o in outcomes]
    checks = [Check("fixed_point_residual", 0.0, diag.residual, 1e-12, diag.residual < 1e-12)]
    if diag.numeric_roots:
        gap = max(abs(r - coeffs.b) for r in diag.numeric_roots)
        checks.append(Check("numeric_root", coeffs.b, diag.numeric_roots[0], 1e-12,
                            len(diag.numeric_roots) == 1 and gap <= 1e-12))
    az = price_precision(p, coeffs)
    formula = price_precision_formula(p)
    if not az.is_infinite:
        rel = abs(az.value - formula.value) / formula.value
        checks.append(Check("precision_formula", formula, az, 1e-12, rel <= 1e-12))
        if sc.n_reps >= 1000 and sc.theta_std == 0:
            z = np.array([o.z_residual for o in outcomes])
            alpha_hat = 1.0 / float(np.var(z, ddof=1))
            tol = _band(sc.n_reps)
            checks.append(Check("precision_mc_rel", az, alpha_hat, tol,
                                abs(alpha_hat - az.value) / az.value <= tol))
    notes = [f"selected loading b = {coeffs.b!r}; other root 0 (unstable)"]
    if coeffs.b > 0 and p.sigma_y > 0:
        notes.append("cross-sectional mean of posterior means loads "
                     f"{aggregate_loading(p, coeffs.b)!r} on eps, not b; the simulated "
                     "clearing price tracks that loading")
    header = ("rep", "theta", "eps", "price_analytic", "price_root", "clearing_residual",
              "z_residual")
    return header, rows, checks, notes, None


def _sweep(spec: ExperimentSpec):
    sc = spec.scenario
    p = sc.params
    m_max = int(spec.extras["m_max"])
    curve = precision_sweep(p, m_max)
    rows, alpha_hats = [], []
    n_finite = sum(1 for pt in curve.points if not pt.alpha_z.is_infinite)
    z_crit = float(stats.norm.ppf(1 - 0.0027 / (2 * max(n_finite, 1))))
    mc_ok, worst = True, 0.0
    for pt in curve.points:
        if pt.alpha_z.is_infinite:
            rows.append((pt.m, pt.b, pt.alpha_z, None, None))
            alpha_hats.append(math.inf)
            continue
        est = estimate_price_precision(replace(sc, params=p.with_publishers(pt.m)))
        rows.append((pt.m, pt.b, pt.alpha_z, est.alpha_hat, est.std_error))
        alpha_hats.append(est.alpha_hat.value)
        rel = abs(est.alpha_hat.value - pt.alpha_z.value) / pt.alpha_z.value
        worst = max(worst, rel)
        mc_ok &= rel <= z_crit * math.sqrt(2.0 / sc.n_reps)

    m_dagger = p.sigma_y ** 2 / p.sigma_x ** 2
    target = min(max(m_dagger, 1.0), float(m_max))
    finite = [pt for pt in curve.points if not pt.alpha_z.is_infinite]
    after = [pt.alpha_z.value for pt in finite if pt.m >= curve.argmin_m]
    rising = all(b > a for a, b in zip(after, after[1:]))
    before = [pt.alpha_z.value for pt in finite if pt.m <= curve.argmin_m]
    falling = all(b < a for a, b in zip(before, before[1:]))
    checks = [
        Check("m0_fully_revealing", "inf", curve.points[0].alpha_z, 0,
              curve.points[0].alpha_z.is_infinite),
        Check("argmin_m", target, curve.argmin_m, 1.0, abs(curve.argmin_m - target) < 1.0),
        Check("decreasing_before_argmin", 1, int(falling), 0, falling),
        Check("increasing_after_argmin", 1, int(rising), 0, rising),
        Check("closed_form_agrees", 0.0,
              max(abs(pt.alpha_z.value - reduced_precision(p, pt.m)) / pt.alpha_z.value
                  for pt in finite), 1e-12,
              all(abs(pt.alpha_z.value - reduced_precision(p, pt.m)) <= 1e-12 * pt.alpha_z.value
                  for pt in finite)),
        Check("precision_mc_rel_max", 0.0, worst, z_crit * math.sqrt(2.0 / sc.n_reps), mc_ok),
    ]
    notes = ["finite-m points use the symmetric m-report generalization",
             f"real-valued minimizer sigma_y^2/sigma_x^2 = {m_dagger!r}",
             f"Monte Carlo band is Bonferroni-adjusted over {n_finite} points (z = {z_crit:.4f})"]
    ms = [pt.m for pt in finite]
    svg = {"alpha_z (analytic)": (ms, [pt.alpha_z.value for pt in finite]),
           "alpha_hat (Monte Carlo)": (ms, alpha_hats[1:] if curve.points[0].alpha_z.is_infinite
                                       else alpha_hats)}
    header = ("m", "b", "alpha_z", "alpha_hat", "stderr")
    return header, rows, checks, notes, (svg, "publishers m", "price precision")


def _recover(spec: ExperimentSpec):
    sc = spec.scenario
    rep = publisher_advantage_demo(sc)
    rows = [(i, t, r, abs(r - t)) for i, (t, r) in enumerate(zip(rep.truth, rep.recovered))]
    checks = [
        Check("max_recovery_error", 0.0, rep.max_abs_error, 1e-10, rep.max_abs_error < 1e-10),
        Check("variance_gap_positive", 0.0, rep.gap, 0.0, rep.gap > 0),
        Check("oracle_variance", rep.non_publisher_variance, rep.oracle_variance, 1e-10,
              abs(rep.oracle_variance - rep.non_publisher_variance) < 1e-10),
    ]
    notes = [f"publisher variance {rep.publisher_variance!r}, "
             f"non-publisher variance {rep.non_publisher_variance!r}"]
    return ("rep", "theta", "theta_hat", "abs_error"), rows, checks, notes, None


def _stability(spec: ExperimentSpec):
    p = spec.scenario.params
    b_star = report_root(p)
    deltas = spec.extras["deltas"]
    if deltas is None:
        deltas = [f * b_star for f in (1e-4, 1e-3, 1e-2)]
    rows, checks, series = [], [], {}
    for d in deltas:
        rep = stability_probe(p, float(d), damping=float(spec.extras["damping"]),
                              max_iter=int(spec.extras["max_iter"]))
        err = abs(rep.limit - b_star)
        rows.append((float(d), rep.expansion, rep.iterations, rep.limit, err))
        checks.append(Check(f"expands_from_{d!r}", 0.0, rep.expansion, 0.0, rep.expansion > 0))
        checks.append(Check(f"converges_from_{d!r}", b_star, rep.limit, 1e-12, err < 1e-12))
        idx = np.unique(np.geomspace(1, len(rep.trajectory), 200).astype(int) - 1)
        series[f"delta={float(d):.3g}"] = (list(idx.astype(float)), list(rep.trajectory[idx]))
    header = ("delta", "expansion", "iterations", "limit", "abs_error")
    return header, rows, checks, [f"positive root b* = {b_star!r}"], \
        (series, "iteration", "loading b")


def _lln(spec: ExperimentSpec):
    sc = spec.scenario
    sizes = [int(n) for n in spec.extras["sizes"]]
    rmse, slope = lln_rate(sc.params, sc.theta, sizes, int(spec.extras["n_seeds"]), sc.seed)
    rows = list(zip(sizes, rmse))
    checks = [Check("loglog_slope", -0.5, slope, 0.05, abs(slope + 0.5) <= 0.05)]
    svg = {"RMSE": (list(np.log10(sizes)), list(np.log10(rmse)))}
    return ("n", "rmse"), rows, checks, [], (svg, "log10 n", "log10 RMSE")


def _query_map(raw):
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("query_map must be an object with a 'kind'")
    kind = raw["kind"]
    rest = {k: v for k, v in raw.items() if k != "kind"}
    if kind == "affine":
        bad = set(rest) - {"p", "q"}
        qm = AffineQuery(**{k: _number(k, v) for k, v in rest.items() if k not in bad})
    elif kind == "logistic":
        bad = set(rest) - {"scale"}
        qm = LogisticQuery(**{k: _number(k, v) for k, v in rest.items() if k not in bad})
    else:
        raise ConfigError(f"unknown query_map kind {kind!r}")
    if bad:
        raise ConfigError(f"unknown query_map keys: {', '.join(sorted(bad))}")
    return qm


def _chatbot(spec: ExperimentSpec):
    sc = spec.scenario
    qm = _query_map(spec.extras["query_map"])
    cfg = ChatbotConfig(sc.n_agents, qm, _number("sigma_tau_answer",
                                                 spec.extras["sigma_tau_answer"]),
                        sc.params, sc.theta, sc.seed)
    n_trials = int(spec.extras["n_trials"])
    rows, covered, worst_inv, first = [], 0, 0.0, None
    for t in range(n_trials):
        rep = chatbot_demo(cfg, trial=t)
        first = first or rep
        inside = rep.abs_error <= 3 * rep.clt_sd
        covered += inside
        worst_inv = max(worst_inv, rep.max_inversion_error)
        rows.append((t, rep.theta_hat, rep.abs_error, 3 * rep.clt_sd, inside))
    inv_tol = 1e-12 if isinstance(qm, AffineQuery) else 1e-9
    coverage = covered / n_trials
    checks = [
        Check("inversion_error", 0.0, worst_inv, inv_tol, worst_inv <= inv_tol),
        Check("clt_coverage", 0.99, coverage, 0.0, coverage >= 0.99),
    ]
    noisy = sc.params.sigma_eps > 0 or cfg.sigma_tau_answer > 0
    if noisy:
        checks.append(Check("trader_less_informed", first.chatbot_variance,
                            first.trader_variance, 0.0,
                            first.trader_variance > first.chatbot_variance))
    else:
        checks.append(Check("noiseless_answers_reveal", first.chatbot_variance,
                            first.trader_variance, 1e-12,
                            abs(first.trader_variance - first.chatbot_variance) <= 1e-12))
    notes = [f"query map {type(qm).__name__}{tuple(vars(qm).values())} is a modelling choice",
             "answers AI_i = theta + sigma_eps*eps + sigma_tau*tau_i; traders condition on "
             "(x_i, AI_i, Z) with Z from the economy where the answer is the report"]
    header = ("trial", "theta_hat", "abs_error", "band_3sd", "within_band")
    return header, rows, checks, notes, None


def oracle_discrepancies(n_draws: int, seed: int, publishers: int = 1) -> np.ndarray:
    """|closed form - generic conditioning| for mean, variance and alpha over random draws.

    Standard deviations are log-uniform on [0.1, 10]; b is the equilibrium
    loading. Columns: mean, variance, alpha (alpha only comparable for m = 1,
    NaN otherwise).
    """
    g = rng.stream(seed, 0, 99)
    out = np.empty((n_draws, 3))
    m = publishers
    for i in range(n_draws):
        s_eta, s_x, s_eps, s_y = 10.0 ** g.uniform(-1, 1, 4)
        p = ModelParams(s_eta, s_x, s_eps, s_y, 1.0, 1.0, m)
        coeffs, _ = solve_multi(p)
        theta = g.normal(0.0, 5.0)
        eps = g.standard_normal(m)
        x = theta + s_x * g.standard_normal()
        y = theta + s_eps * eps + s_y * g.standard_normal(m)
        z = theta + coeffs.b * eps.sum()
        sig = SignalSet(x, y, z)
        closed = posterior_theta_multi(p, coeffs, sig)
        oracle = condition_generic(report_observation(p, coeffs.b, sig))
        out[i, 0] = abs(closed.mean - oracle.mean)
        out[i, 1] = abs(closed.variance_return - oracle.variance_return)
        out[i, 2] = (abs(closed.determinant_alpha - oracle.determinant_alpha)
                     if m == 1 else math.nan)
    return out


def _oracle_check(spec: ExperimentSpec):
    sc = spec.scenario
    m = max(1, sc.params.publishers)
    d = oracle_discrepancies(int(spec.extras["n_draws"]), sc.seed, m)
    rows = [(i, *r) for i, r in enumerate(d)]
    checks = [Check("max_mean_diff", 0.0, float(d[:, 0].max()), 1e-10, d[:, 0].max() < 1e-10),
              Check("max_var_diff", 0.0, float(d[:, 1].max()), 1e-10, d[:, 1].max() < 1e-10)]
    return ("draw", "d_mean", "d_var", "d_alpha"), rows, checks, [], None


RUNNERS = {
    "baseline": _baseline, "report": _report, "sweep": _sweep, "recover": _recover,
    "stability": _stability, "lln": _lln, "chatbot": _chatbot, "oracle-check": _oracle_check,
}


def output_paths(out: Path):
    out = Path(out)
    return (out.with_name(out.name + ".csv"), out.with_name(out.name + ".summary.txt"),
            out.with_name(out.name + ".svg"))


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run one experiment and write its files. Exit code 0 if every check passes, else 4."""
    validate_config(spec.scenario) if spec.name in ("baseline", "report", "recover") \
        else validate(spec.scenario.params)
    header, rows, checks, notes, svg = RUNNERS[spec.name](spec)
    csv_path, summary_path, svg_path = output_paths(spec.output_path)
    write_csv(csv_path, header, rows)
    write_summary(summary_path, spec.name, _settings(spec), checks, notes)
    written_svg = None
    if spec.emit_svg and svg is not None:
        series, xlabel, ylabel = svg
        write_svg(svg_path, series, xlabel, ylabel, title=spec.name)
        written_svg = svg_path
    code = 0 if all(c.passed for c in checks) else 4
    return ExperimentResult(code, list(checks), csv_path, summary_path, written_svg)
