"""Finite-agent Monte Carlo of the market.

Each replication draws the fundamental, the report errors and every agent's
private and reading noise, forms each agent's CARA demand from the
closed-form posteriors at the analytic equilibrium price, and records how
far the finite market is from clearing. The return noise eta never enters
prices or demands, so it is never drawn.

Clearing is per capita: mean demand equals the supply K.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import rng
from .equilibrium import recover_theta, solve
from .errors import InsufficientReps, ParameterError, WrongScenario
from .inference import (SignalSet, condition_generic, reduced_params,
                        report_observation, report_weights)
from .params import EquilibriumCoefficients, ModelParams, Precision, validate


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment's inputs.

    theta is fixed when ``theta_std`` is 0, otherwise drawn per replication
    from normal(theta, theta_std). ``lam`` is the fraction of agents who
    ignore the reports.
    """

    params: ModelParams = field(default_factory=ModelParams)
    theta: float = 0.0
    theta_std: float = 0.0
    n_agents: int = 1000
    n_reps: int = 1
    seed: int = 0
    lam: float = 0.0


@dataclass(frozen=True)
class RepOutcome:
    rep: int
    theta: float
    eps: Tuple[float, ...]
    price_analytic: float
    clearing_residual: float
    price_root: float
    z_residual: float
    posterior_mean_std: float


@dataclass(frozen=True)
class PrecisionEstimate:
    alpha_hat: Precision
    std_error: float
    n_reps_used: int


def validate_config(config: ScenarioConfig) -> ScenarioConfig:
    validate(config.params)
    if config.n_agents < 100:
        raise ParameterError(f"n_agents must be at least 100, got {config.n_agents}")
    if config.n_reps < 1:
        raise ParameterError(f"n_reps must be at least 1, got {config.n_reps}")
    if not 0.0 <= config.lam <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {config.lam}")
    if config.theta_std < 0:
        raise ParameterError("theta_std must be nonnegative")
    return config


def draw_common(config: ScenarioConfig, rep: int) -> Tuple[float, np.ndarray]:
    """Fundamental and report errors of replication ``rep``."""
    theta = config.theta
    if config.theta_std > 0:
        theta = theta + config.theta_std * rng.stream(config.seed, rep, rng.THETA).standard_normal()
    eps = rng.stream(config.seed, rep, rng.COMMON).standard_normal(config.params.publishers)
    return float(theta), eps


def _blend(config: ScenarioConfig, coeffs: EquilibriumCoefficients):
    """Price loading and constant when a fraction lam of agents ignores the reports.

    Report users keep their equilibrium weights; ignorers condition on
    (x, Z) only. The loading shrinks to (1 - lam) b and the constant uses
    the demand-weighted (harmonic) posterior variance.
    """
    p = config.params
    if config.lam == 0 or p.publishers == 0:
        return coeffs.b, coeffs.c
    b_lam = (1.0 - config.lam) * coeffs.b
    var_ignore = _ignorer_variance(p, b_lam)
    inv = (1.0 - config.lam) / coeffs.posterior_variance + config.lam / var_ignore
    return b_lam, -p.gamma * p.supply / inv


def _ignorer_variance(p: ModelParams, b_lam: float) -> float:
    if b_lam == 0:
        return p.sigma_eta ** 2
    noise_z = p.publishers * b_lam ** 2
    return 1.0 / (1.0 / p.sigma_x ** 2 + 1.0 / noise_z) + p.sigma_eta ** 2


def run_replication(config: ScenarioConfig, rep: int,
                    coeffs: Optional[EquilibriumCoefficients] = None) -> RepOutcome:
    p = config.params
    if coeffs is None:
        validate_config(config)
        coeffs = solve(p)
    m, n = p.publishers, config.n_agents
    theta, eps = draw_common(config, rep)
    b_price, c_price = _blend(config, coeffs)
    z = theta + b_price * float(np.sum(eps)) if m else theta
    price = coeffs.a * z + c_price

    if m == 0:
        means = np.full(n, z)
        variances = np.full(n, coeffs.posterior_variance)
    else:
        xi = rng.stream(config.seed, rep, rng.PRIVATE).standard_normal(n)
        tau = rng.stream(config.seed, rep, rng.READING).standard_normal((n, m))
        x = theta + p.sigma_x * xi
        ybar = theta + p.sigma_eps * eps.mean() + p.sigma_y * tau.mean(axis=1)
        w_y, w_z, var_theta, _ = report_weights(reduced_params(p), math.sqrt(m) * coeffs.b)
        means = x + w_y * (ybar - x) + w_z * (z - x)
        variances = np.full(n, var_theta + p.sigma_eta ** 2)
        n_ignore = int(math.floor(config.lam * n))
        if n_ignore:
            if b_price == 0:
                means[:n_ignore] = z
            else:
                prec_x = 1.0 / p.sigma_x ** 2
                prec_z = 1.0 / (m * b_price ** 2)
                means[:n_ignore] = (prec_x * x[:n_ignore] + prec_z * z) / (prec_x + prec_z)
            variances[:n_ignore] = _ignorer_variance(p, b_price)

    demand = (means - price) / (p.gamma * variances)
    residual = float(np.mean(demand) - p.supply)
    if np.all(variances == variances[0]):
        price_root = float(np.mean(means) - p.gamma * variances[0] * p.supply)
    else:
        inv = 1.0 / variances
        price_root = float((np.sum(means * inv) - n * p.gamma * p.supply) / np.sum(inv))
    return RepOutcome(rep, theta, tuple(float(e) for e in eps), float(price), residual,
                      price_root, float(z - theta), float(np.std(means, ddof=1)))


def _run_chunk(args):
    config, coeffs, reps = args
    return [run_replication(config, r, coeffs) for r in reps]


def simulate(config: ScenarioConfig, workers: int = 1) -> List[RepOutcome]:
    """All replications of ``config`` in rep order; identical for any worker count."""
    validate_config(config)
    coeffs = solve(config.params)
    reps = list(range(config.n_reps))
    if workers <= 1 or config.n_reps < 2:
        return [run_replication(config, r, coeffs) for r in reps]
    n_chunks = min(config.n_reps, workers * 4)
    chunks = [reps[i::n_chunks] for i in range(n_chunks)]
    out: List[RepOutcome] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_run_chunk, [(config, coeffs, ch) for ch in chunks]):
            out.extend(part)
    out.sort(key=lambda o: o.rep)
    return out


def z_residuals(config: ScenarioConfig) -> np.ndarray:
    """Z - theta for every replication, from the common shocks alone.

    Same keyed draws as :func:`run_replication`, so the values are identical
    to its ``z_residual`` without simulating the agents.
    """
    validate_config(config)
    coeffs = solve(config.params)
    b_price, _ = _blend(config, coeffs)
    out = np.empty(config.n_reps)
    for r in range(config.n_reps):
        theta, eps = draw_common(config, r)
        z = theta + b_price * float(np.sum(eps)) if config.params.publishers else theta
        out[r] = z - theta
    return out


def estimate_price_precision(config: ScenarioConfig) -> PrecisionEstimate:
    """1 / sample variance of Z - theta, with the chi-square standard error."""
    p = config.params
    if p.publishers < 1:
        raise WrongScenario("m = 0: the price is fully revealing, nothing to estimate")
    if not p.sigma_eps > 0:
        raise WrongScenario("sigma_eps = 0: the price is fully revealing, nothing to estimate")
    if config.n_reps < 1000:
        raise InsufficientReps(f"need at least 1000 replications, got {config.n_reps}")
    if config.theta_std != 0:
        raise WrongScenario("precision estimation needs a fixed theta")
    resid = z_residuals(config)
    var = float(np.var(resid, ddof=1))
    alpha_hat = 1.0 / var
    se = alpha_hat * math.sqrt(2.0 / (config.n_reps - 1))
    return PrecisionEstimate(Precision.finite(alpha_hat), se, config.n_reps)


def lln_aggregate(params: ModelParams, theta: float, n_reports: int, seed: int):
    """Average of n published signals y_i = theta + sigma_x xi_i + sigma_y tau_i.

    Returns (estimate, |estimate - theta|).
    """
    if n_reports < 1:
        raise ParameterError("n_reports must be positive")
    xi = rng.stream(seed, n_reports, rng.PRIVATE).standard_normal(n_reports)
    tau = rng.stream(seed, n_reports, rng.READING).standard_normal(n_reports)
    est = float(np.mean(theta + params.sigma_x * xi + params.sigma_y * tau))
    return est, abs(est - theta)


def lln_rate(params: ModelParams, theta: float, sizes: Sequence[int], n_seeds: int,
             seed: int = 0):
    """RMSE of :func:`lln_aggregate` over seeds for each size, and the log-log slope."""
    rmse = []
    for n in sizes:
        errs = np.array([lln_aggregate(params, theta, n, seed * 1_000_003 + s)[1]
                         for s in range(n_seeds)])
        rmse.append(float(np.sqrt(np.mean(errs ** 2))))
    slope = float(np.polyfit(np.log(sizes), np.log(rmse), 1)[0])
    return np.asarray(rmse), slope


@dataclass(frozen=True)
class AdvantageReport:
    max_abs_error: float
    publisher_variance: float
    non_publisher_variance: float
    oracle_variance: float
    gap: float
    recovered: np.ndarray = field(repr=False)
    truth: np.ndarray = field(repr=False)


def publisher_advantage_demo(config: ScenarioConfig) -> AdvantageReport:
    """Publisher recovers theta from (own signal, price); readers keep a noisy posterior.

    The published signal is x_j = theta + sigma_eps * eps, so sigma_eps plays
    the role of the publisher's private noise.
    """
    p = config.params
    if p.publishers != 1:
        raise WrongScenario("publisher demo needs m = 1")
    validate_config(config)
    coeffs = solve(p)
    rec, truth = np.empty(config.n_reps), np.empty(config.n_reps)
    for r in range(config.n_reps):
        theta, eps = draw_common(config, r)
        x_j = theta + p.sigma_eps * eps[0]
        price = coeffs.a * theta + coeffs.b * eps[0] + coeffs.c
        rec[r], _ = recover_theta(p, coeffs, x_j, price)
        truth[r] = theta

    obs = report_observation(p, coeffs.b, SignalSet(0.0, [0.0], 0.0))
    oracle_var = condition_generic(obs).variance_return
    pub_var = p.sigma_eta ** 2
    return AdvantageReport(float(np.max(np.abs(rec - truth))), pub_var,
                           coeffs.posterior_variance, oracle_var,
                           coeffs.posterior_variance - pub_var, rec, truth)
