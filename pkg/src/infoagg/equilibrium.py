"""Equilibrium price functions.

The price is guessed as P = theta + b * sum_k eps_k + c. With one report the
loading b solves b = T(b); T has the root b = 0 (prices ignore the report)
and one positive root, which is the one selected. With m reports the
economy is reduced to an equivalent one-report economy (see
:func:`infoagg.inference.reduced_params`); the m-report interior is a
generalization, only the m = 0, m = 1 and m -> infinity ends are classical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize

from .errors import (ConvergenceError, DegenerateRecovery, NonPositiveDeterminant,
                     WrongScenario)
from .inference import (SignalSet, condition_generic, determinant_alpha,
                        reduced_params, report_observation, report_weights)
from .params import EquilibriumCoefficients, ModelParams, Precision, validate

ROOT_XTOL = 1e-13
ROOT_MAXITER = 200
ROOT_LOWER = 1e-9


@dataclass(frozen=True)
class FixedPointDiagnostics:
    roots: Tuple[float, ...]
    selected: float
    residual: float
    iterations: int
    numeric_roots: Tuple[float, ...] = ()
    degenerate: bool = False


@dataclass(frozen=True)
class SweepPoint:
    m: int
    alpha_z: Precision
    b: float


@dataclass(frozen=True)
class PrecisionCurve:
    points: Tuple[SweepPoint, ...]
    argmin_m: Optional[int]


@dataclass(frozen=True)
class StabilityReport:
    expansion: float            # T(delta) - delta
    trajectory: np.ndarray = field(repr=False)
    limit: float = 0.0
    iterations: int = 0
    target: float = 0.0         # the positive root, for reference


def _require(params: ModelParams, m_ok, what: str):
    validate(params)
    if not m_ok(params.publishers):
        raise WrongScenario(f"{what} not defined for m = {params.publishers}")


def solve_baseline(params: ModelParams) -> EquilibriumCoefficients:
    """No reports: P = theta - gamma * sigma_eta^2 * K, fully revealing."""
    _require(params, lambda m: m == 0, "baseline equilibrium")
    var = params.sigma_eta ** 2
    return EquilibriumCoefficients(1.0, 0.0, -params.gamma * var * params.supply, var)


def fixed_point_map(params: ModelParams, b: float) -> float:
    """T(b) = (sigma_y^2 + sigma_eps^2 - b sigma_eps) b sigma_x^2 / alpha(b), with a = 1."""
    alpha = determinant_alpha(params, b)
    if not alpha > 0:
        raise NonPositiveDeterminant(f"alpha({b!r}) = {alpha!r}")
    se = params.sigma_eps
    # sigma_y^2 + se^2 - b se, grouped so that it does not cancel near b = se
    return (params.sigma_y ** 2 + se * (se - b)) * b * params.sigma_x ** 2 / alpha


def aggregate_loading(params: ModelParams, b: float) -> float:
    """eps-loading of the cross-sectional mean of posterior means when the price loads b.

    Unlike :func:`fixed_point_map`, this keeps the report term's average,
    which equals sigma_eps * eps rather than zero. Its only fixed point is
    b = 0; it is a diagnostic for what a large simulated market clears at.
    """
    w_y, w_z, _, _ = report_weights(params, b)
    return w_y * params.sigma_eps + w_z * b


def report_root(params: ModelParams) -> float:
    return params.sigma_x ** 2 * params.sigma_eps / (params.sigma_x ** 2 + params.sigma_y ** 2)


def posterior_variance_at(params: ModelParams, b: float) -> float:
    """Var(theta + eta | x, y, Z) in the one-report economy with loading b."""
    if b == 0:
        return params.sigma_eta ** 2
    _, _, var_theta, _ = report_weights(params, b)
    return var_theta + params.sigma_eta ** 2


def find_roots(f, lo: float, hi: float, n_grid: int = 65,
               xtol: float = ROOT_XTOL, maxiter: int = ROOT_MAXITER):
    """All sign-change roots of f on [lo, hi] found by a geometric grid scan plus Brent.

    Returns (roots, total_iterations).
    """
    grid = np.geomspace(lo, hi, n_grid)
    values = [f(g) for g in grid]
    roots, iterations = [], 0
    for x0, x1, f0, f1 in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if f0 == 0:
            roots.append(float(x0))
        elif f0 * f1 < 0:
            r, info = optimize.brentq(f, x0, x1, xtol=xtol, maxiter=maxiter,
                                      full_output=True)
            roots.append(float(r))
            iterations += info.iterations
    if values[-1] == 0:
        roots.append(float(grid[-1]))
    return roots, iterations


def solve_report(params: ModelParams):
    """One-report equilibrium with the positive root selected.

    Returns (coefficients, diagnostics). The b = 0 root is always listed in
    ``diagnostics.roots`` but never selected when a positive root exists.
    """
    _require(params, lambda m: m == 1, "one-report equilibrium")
    se, sy = params.sigma_eps, params.sigma_y
    k_gamma = params.gamma * params.supply

    if se == 0:
        # no common error to load on: only b = 0 survives
        var = params.sigma_eta ** 2
        coeffs = EquilibriumCoefficients(1.0, 0.0, -k_gamma * var, var)
        return coeffs, FixedPointDiagnostics((0.0,), 0.0, 0.0, 0, (), degenerate=True)

    b = report_root(params)
    if sy == 0:
        # price signal duplicates the report; alpha vanishes at b = sigma_eps
        sx2 = params.sigma_x ** 2
        var = params.sigma_eta ** 2 + sx2 * se ** 2 / (sx2 + se ** 2)
        coeffs = EquilibriumCoefficients(1.0, b, -k_gamma * var, var)
        return coeffs, FixedPointDiagnostics((0.0, b), b, 0.0, 0, (), degenerate=True)

    numeric, iterations = find_roots(lambda v: fixed_point_map(params, v) - v, ROOT_LOWER, se)
    residual = abs(fixed_point_map(params, b) - b)
    var = posterior_variance_at(params, b)
    coeffs = EquilibriumCoefficients(1.0, b, -k_gamma * var, var)
    diag = FixedPointDiagnostics((0.0, b), b, residual, iterations, tuple(numeric))
    return coeffs, diag


def stability_probe(params: ModelParams, delta: float, damping: float = 1.0,
                    max_iter: int = 200_000, step_tol: float = 1e-15) -> StabilityReport:
    """Iterate b <- (1 - w) b + w T(b) from b = delta.

    Stops when successive iterates differ by at most ``step_tol`` (relative
    above 1); raises
    ConvergenceError after ``max_iter`` steps. Near b = 0 the map expands
    only quadratically (T(b) - b ~ sigma_eps b^2 / (sigma_eps^2 + sigma_y^2)),
    so escape takes O(1/delta) steps.
    """
    _require(params, lambda m: m == 1, "stability probe")
    if not params.sigma_eps > 0:
        raise WrongScenario("stability probe needs sigma_eps > 0")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    b_star = report_root(params)
    if not 0 < delta <= b_star:
        raise ValueError(f"delta must lie in (0, b*] = (0, {b_star!r}]")
    expansion = fixed_point_map(params, delta) - delta
    traj = [delta]
    b = delta
    for k in range(1, max_iter + 1):
        nxt = (1 - damping) * b + damping * fixed_point_map(params, b)
        traj.append(nxt)
        if abs(nxt - b) <= step_tol * max(1.0, abs(nxt)):
            return StabilityReport(expansion, np.asarray(traj), nxt, k, b_star)
        b = nxt
    raise ConvergenceError(f"no convergence from delta={delta!r} in {max_iter} iterations")


def price_precision(params: ModelParams, coeffs: EquilibriumCoefficients) -> Precision:
    """Precision of Z = theta + b * sum_k eps_k about theta: 1 / (m b^2)."""
    m = params.publishers
    if m == 0 or coeffs.b == 0:
        return Precision.infinite()
    return Precision.finite(1.0 / (m * coeffs.b ** 2))


def price_precision_formula(params: ModelParams) -> Precision:
    """alpha_eps * (1 + alpha_x / alpha_y)^2 for one report, from the precisions directly."""
    if params.sigma_eps == 0:
        return Precision.infinite()
    alpha_x = 1.0 / params.sigma_x ** 2
    alpha_eps = 1.0 / params.sigma_eps ** 2
    if params.sigma_y == 0:
        return Precision.finite(alpha_eps)
    alpha_y = 1.0 / params.sigma_y ** 2
    return Precision.finite(alpha_eps * (1.0 + alpha_x / alpha_y) ** 2)


def recover_theta(params: ModelParams, coeffs: EquilibriumCoefficients,
                  x_j: float, price: float) -> Tuple[float, float]:
    """Publisher's exact solve of {P = theta + b eps + c, x_j = theta + sigma_eps eps}."""
    _require(params, lambda m: m == 1, "theta recovery")
    se = params.sigma_eps
    if not se > 0:
        raise DegenerateRecovery("sigma_eps = 0: the published signal carries no error to remove")
    r = coeffs.b / se
    if params.sigma_y == 0 or abs(1.0 - r) < 1e-12:
        raise DegenerateRecovery("price signal coincides with the published signal (sigma_y = 0)")
    theta = (price - coeffs.c - r * x_j) / (1.0 - r)
    eps = (x_j - theta) / se
    return theta, eps


def vector_map(params: ModelParams, loadings) -> np.ndarray:
    """Per-report loadings implied by aggregate demand when the price loads ``loadings``.

    The trader's weight on the price signal comes from dense conditioning on
    the full (x, y_1..y_m, Z) stack; as in :func:`fixed_point_map`, only the
    price channel carries the common errors into aggregate demand, so the
    new loading on eps_k is w_Z * b_k.
    """
    b = np.asarray(loadings, dtype=float)
    m = b.size
    base = report_observation(params.with_publishers(m), 0.0,
                              SignalSet(0.0, np.zeros(m), 0.0))
    L = base.loadings.copy()
    L[m + 1, 1:] = b
    # the posterior mean is linear in the signals; its slope in Z is w_Z
    z_unit = np.zeros(m + 2)
    z_unit[m + 1] = 1.0
    w_z = condition_generic(replace(base, loadings=L, observed=z_unit)).mean
    return w_z * b


def vector_fixed_point(params: ModelParams, init, damping: float = 0.5,
                       tol: float = 1e-12, max_iter: int = 10_000):
    """Damped iteration of :func:`vector_map`. Returns (loadings, iterations)."""
    b = np.asarray(init, dtype=float).copy()
    for k in range(1, max_iter + 1):
        nxt = (1 - damping) * b + damping * vector_map(params, b)
        if np.max(np.abs(nxt - b)) < tol:
            return nxt, k
        b = nxt
    raise ConvergenceError(f"vector fixed point did not converge in {max_iter} iterations")


def solve_multi(params: ModelParams, cross_check: bool = False):
    """Symmetric m-report equilibrium via the one-report reduction.

    Per-report loading b = b' / sqrt(m) where b' is the one-report root of the
    reduced economy. With ``cross_check`` the full-stack vector fixed point is
    run from a displaced symmetric start and must agree to 1e-9.
    """
    _require(params, lambda m: m >= 1, "report equilibrium")
    m = params.publishers
    if m == 1:
        return solve_report(params)
    reduced = reduced_params(params)
    coeffs_r, diag_r = solve_report(reduced)
    root = math.sqrt(m)
    b = coeffs_r.b / root
    coeffs = EquilibriumCoefficients(1.0, b, coeffs_r.c, coeffs_r.posterior_variance)
    diag = FixedPointDiagnostics(
        tuple(r / root for r in diag_r.roots), b, diag_r.residual, diag_r.iterations,
        tuple(r / root for r in diag_r.numeric_roots), diag_r.degenerate)
    if cross_check and b > 0:
        loadings, _ = vector_fixed_point(params, np.full(m, 1.1 * b))
        if np.max(np.abs(loadings - b)) > 1e-9:
            raise ConvergenceError(
                f"vector fixed point {loadings} disagrees with reduction b={b!r}")
    return coeffs, diag


def solve(params: ModelParams):
    """Equilibrium coefficients for any m (baseline, one report or m reports)."""
    validate(params)
    if params.publishers == 0:
        return solve_baseline(params)
    return solve_multi(params)[0]


def reduced_precision(params: ModelParams, m: int) -> float:
    """alpha_z(m) = m (sigma_x^2 + sigma_y^2 / m)^2 / (sigma_x^4 sigma_eps^2), m >= 1."""
    sx2 = params.sigma_x ** 2
    return m * (sx2 + params.sigma_y ** 2 / m) ** 2 / (sx2 ** 2 * params.sigma_eps ** 2)


def precision_sweep(params: ModelParams, m_max: int) -> PrecisionCurve:
    validate(params)
    if not params.sigma_eps > 0:
        raise WrongScenario("precision sweep needs sigma_eps > 0")
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    points: List[SweepPoint] = []
    for m in range(m_max + 1):
        p = params.with_publishers(m)
        coeffs = solve(p)
        points.append(SweepPoint(m, price_precision(p, coeffs), coeffs.b))
    finite = [pt for pt in points if not pt.alpha_z.is_infinite]
    argmin = min(finite, key=lambda pt: pt.alpha_z.value).m if finite else None
    return PrecisionCurve(tuple(points), argmin)
